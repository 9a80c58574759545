#pragma once

// JSON forms of the library objects: p-adic numbers, points, configurations,
// cells, spaces, measure specs and transformation ASTs, plus check records
// and CSV trajectories. Parse errors carry a JSON pointer to the bad field.

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cfgspace/kakutani.hpp"
#include "cfgspace/rep.hpp"

namespace cfgspace::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// A spec document that does not match the schema; `pointer` locates the field.
class schema_error : public std::runtime_error {
 public:
  schema_error(std::string pointer, const std::string& what)
      : std::runtime_error(what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

// ---------------------------------------------------------------------------
// Field access with located errors

inline std::string child_path(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child_path(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw schema_error(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw schema_error(child_path(path, key), "missing required field '" + key + "'");
  return *it;
}

inline double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw schema_error(path, "expected a number");
  return j.get<double>();
}

inline long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw schema_error(path, "expected an integer");
  return j.get<long long>();
}

inline std::size_t as_count(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw schema_error(path, "expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw schema_error(path, "expected a string");
  return j.get<std::string>();
}

inline const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw schema_error(path, "expected an array");
  return j;
}

inline std::vector<double> as_doubles(const json& j, const std::string& path) {
  std::vector<double> v;
  for (std::size_t i = 0; i < as_array(j, path).size(); ++i) v.push_back(as_double(j[i], child_path(path, i)));
  return v;
}

/// Rethrows library validation errors with the location of the offending node.
template <class F>
auto located(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const schema_error&) {
    throw;
  } catch (const std::exception& e) {
    throw schema_error(path, e.what());
  }
}

// ---------------------------------------------------------------------------
// Spaces

inline json to_json(const RealSpace& s) { return json{{"kind", "real"}, {"dim", s.dim}, {"step", s.step}}; }
inline json to_json(const PadicSpace& s) {
  return json{{"kind", "padic"}, {"prime", s.prime}, {"dim", s.dim}, {"precision", s.precision}};
}

inline std::string space_kind(const json& j, const std::string& path) {
  const std::string k = as_string(field(j, "kind", path), child_path(path, "kind"));
  if (k != "real" && k != "padic") throw schema_error(child_path(path, "kind"), "space kind must be 'real' or 'padic'");
  return k;
}

inline RealSpace real_space_from_json(const json& j, const std::string& path) {
  RealSpace s;
  s.dim = as_count(field(j, "dim", path), child_path(path, "dim"));
  if (s.dim == 0) throw schema_error(child_path(path, "dim"), "dimension must be positive");
  if (j.contains("step")) s.step = as_double(j["step"], child_path(path, "step"));
  return s;
}

inline PadicSpace padic_space_from_json(const json& j, const std::string& path) {
  PadicSpace s;
  s.prime = static_cast<int>(as_integer(field(j, "prime", path), child_path(path, "prime")));
  located(child_path(path, "prime"), [&] { return PAdicNumber::zero(s.prime); });
  s.dim = as_count(field(j, "dim", path), child_path(path, "dim"));
  if (s.dim == 0) throw schema_error(child_path(path, "dim"), "dimension must be positive");
  if (j.contains("precision")) {
    s.precision = static_cast<int>(as_integer(j["precision"], child_path(path, "precision")));
    if (s.precision < 1) throw schema_error(child_path(path, "precision"), "precision must be positive");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Numbers, points, configurations, cells

inline json to_json(const PAdicNumber& x) { return x.to_string(); }

/// Accepts the textual form "p:val:digits" or an integer literal.
inline PAdicNumber padic_from_json(const PadicSpace& s, const json& j, const std::string& path) {
  if (j.is_number_integer()) return PAdicNumber::from_integer(j.get<long long>(), s.prime, s.precision);
  const std::string text = as_string(j, path);
  const auto x = located(path, [&] { return PAdicNumber::parse(text); });
  if (x.prime() != s.prime) throw schema_error(path, "number over a different prime");
  return x;
}

inline json point_to_json(const std::vector<double>& x) { return json(x); }
inline json point_to_json(const std::vector<PAdicNumber>& x) {
  json a = json::array();
  for (const auto& c : x) a.push_back(to_json(c));
  return a;
}

inline std::vector<double> point_from_json(const RealSpace& s, const json& j, const std::string& path) {
  auto x = as_doubles(j, path);
  if (x.size() != s.dim) throw schema_error(path, "point dimension mismatch");
  return x;
}

inline std::vector<PAdicNumber> point_from_json(const PadicSpace& s, const json& j, const std::string& path) {
  std::vector<PAdicNumber> x;
  for (std::size_t i = 0; i < as_array(j, path).size(); ++i) x.push_back(padic_from_json(s, j[i], child_path(path, i)));
  if (x.size() != s.dim) throw schema_error(path, "point dimension mismatch");
  return x;
}

/// Points in canonical order, so equal configurations serialize identically.
template <class Space>
json to_json(const FiniteConfig<Space>& g) {
  json a = json::array();
  for (const auto& x : g) a.push_back(point_to_json(x));
  return a;
}

template <class Space>
FiniteConfig<Space> config_from_json(const Space& s, const json& j, const std::string& path) {
  std::vector<typename Space::Point> pts;
  for (std::size_t i = 0; i < as_array(j, path).size(); ++i) pts.push_back(point_from_json(s, j[i], child_path(path, i)));
  return located(path, [&] { return FiniteConfig<Space>(s, std::move(pts)); });
}

inline json to_json(const Box& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }
inline json to_json(const PadicBall& b) {
  return json{{"center", point_to_json(b.center)}, {"radius_exp", b.radius_exp}};
}

inline Box cell_from_json(const RealSpace& s, const json& j, const std::string& path) {
  Box b{point_from_json(s, field(j, "lo", path), child_path(path, "lo")),
        point_from_json(s, field(j, "hi", path), child_path(path, "hi"))};
  for (std::size_t i = 0; i < s.dim; ++i)
    if (!(b.lo[i] < b.hi[i])) throw schema_error(path, "box needs lo < hi in every coordinate");
  return b;
}

/// A ball {center, radius_exp} of radius p^{-radius_exp}; the center defaults to the origin.
inline PadicBall cell_from_json(const PadicSpace& s, const json& j, const std::string& path) {
  PadicBall b = s.ball_at_origin(0);
  if (j.contains("center")) b.center = point_from_json(s, j["center"], child_path(path, "center"));
  b.radius_exp = static_cast<int>(as_integer(field(j, "radius_exp", path), child_path(path, "radius_exp")));
  return b;
}

template <class Space>
std::vector<typename Space::Cell> cells_from_json(const Space& s, const json& j, const std::string& path) {
  std::vector<typename Space::Cell> out;
  for (std::size_t i = 0; i < as_array(j, path).size(); ++i) out.push_back(cell_from_json(s, j[i], child_path(path, i)));
  return out;
}

// ---------------------------------------------------------------------------
// Measures: {kind, parameters}

inline json to_json(const MeasureModel<RealSpace>& m) {
  const auto& n = m.node();
  if (m.is_sum()) {
    json parts = json::array();
    for (const auto& q : n.sum) parts.push_back(to_json(q));
    return json{{"kind", "sum"}, {"parameters", {{"parts", parts}, {"weights", n.weights}}}};
  }
  if (const auto* l = std::get_if<Lebesgue>(&n.kind))
    return json{{"kind", "lebesgue"}, {"parameters", {{"dim", m.space().dim}, {"intensity", l->intensity}}}};
  return json{{"kind", "gaussian"}, {"parameters", {{"eigenvalues", std::get<GaussianProduct>(n.kind).eigenvalues}}}};
}

inline json to_json(const MeasureModel<PadicSpace>& m) {
  const auto& n = m.node();
  if (m.is_sum()) {
    json parts = json::array();
    for (const auto& q : n.sum) parts.push_back(to_json(q));
    return json{{"kind", "sum"}, {"parameters", {{"parts", parts}, {"weights", n.weights}}}};
  }
  if (const auto* h = std::get_if<Haar>(&n.kind))
    return json{{"kind", "haar"}, {"parameters", {{"intensity", h->intensity}}}};
  const auto& g = std::get<PadicGaussianAnalog>(n.kind);
  std::vector<double> scales;
  for (const auto& c : g.coords) scales.push_back(c.scale);
  return json{{"kind", "padic_gaussian"},
              {"parameters", {{"scales", scales}, {"cutoff", g.coords.empty() ? 40 : g.coords.front().cutoff}}}};
}

inline json parameters_of(const json& j, const std::string& path) {
  if (!j.contains("parameters")) return json::object();
  const json& p = j["parameters"];
  if (!p.is_object()) throw schema_error(child_path(path, "parameters"), "expected an object");
  return p;
}

inline MeasureModel<RealSpace> measure_from_json(const RealSpace& s, const json& j, const std::string& path) {
  const std::string kind = as_string(field(j, "kind", path), child_path(path, "kind"));
  const json p = parameters_of(j, path);
  const std::string pp = child_path(path, "parameters");
  if (kind == "lebesgue") {
    const double c = p.contains("intensity") ? as_double(p["intensity"], child_path(pp, "intensity")) : 1.0;
    auto m = located(pp, [&] { return MeasureModel<RealSpace>::lebesgue(s.dim, c); });
    return m;
  }
  if (kind == "gaussian") {
    const auto eig = as_doubles(field(p, "eigenvalues", pp), child_path(pp, "eigenvalues"));
    if (eig.size() != s.dim) throw schema_error(child_path(pp, "eigenvalues"), "one eigenvalue per coordinate required");
    return located(child_path(pp, "eigenvalues"), [&] { return MeasureModel<RealSpace>::gaussian(eig); });
  }
  if (kind == "sum") {
    const json& parts = as_array(field(p, "parts", pp), child_path(pp, "parts"));
    std::vector<MeasureModel<RealSpace>> ms;
    for (std::size_t i = 0; i < parts.size(); ++i)
      ms.push_back(measure_from_json(s, parts[i], child_path(child_path(pp, "parts"), i)));
    const auto w = p.contains("weights") ? as_doubles(p["weights"], child_path(pp, "weights")) : std::vector<double>{};
    return located(pp, [&] { return MeasureModel<RealSpace>::sum(ms, w); });
  }
  throw schema_error(child_path(path, "kind"), "unknown real measure kind '" + kind + "' (lebesgue, gaussian, sum)");
}

inline MeasureModel<PadicSpace> measure_from_json(const PadicSpace& s, const json& j, const std::string& path) {
  const std::string kind = as_string(field(j, "kind", path), child_path(path, "kind"));
  const json p = parameters_of(j, path);
  const std::string pp = child_path(path, "parameters");
  if (kind == "haar") {
    const double c = p.contains("intensity") ? as_double(p["intensity"], child_path(pp, "intensity")) : 1.0;
    return located(pp, [&] { return MeasureModel<PadicSpace>::haar(s, c); });
  }
  if (kind == "padic_gaussian") {
    const auto scales = as_doubles(field(p, "scales", pp), child_path(pp, "scales"));
    const int cutoff = p.contains("cutoff") ? static_cast<int>(as_integer(p["cutoff"], child_path(pp, "cutoff"))) : 40;
    return located(pp, [&] { return MeasureModel<PadicSpace>::padic_gaussian(s, scales, cutoff); });
  }
  if (kind == "sum") {
    const json& parts = as_array(field(p, "parts", pp), child_path(pp, "parts"));
    std::vector<MeasureModel<PadicSpace>> ms;
    for (std::size_t i = 0; i < parts.size(); ++i)
      ms.push_back(measure_from_json(s, parts[i], child_path(child_path(pp, "parts"), i)));
    const auto w = p.contains("weights") ? as_doubles(p["weights"], child_path(pp, "weights")) : std::vector<double>{};
    return located(pp, [&] { return MeasureModel<PadicSpace>::sum(ms, w); });
  }
  throw schema_error(child_path(path, "kind"),
                     "unknown p-adic measure kind '" + kind + "' (haar, padic_gaussian, sum)");
}

// ---------------------------------------------------------------------------
// Transformations: {kind, params, children, inverse}

template <class Space>
json to_json(const Transformation<Space>& t) {
  json j{{"kind", to_string(t.kind())}, {"params", json::object()}, {"children", json::array()},
         {"inverse", t.inverted()}};
  auto& p = j["params"];
  switch (t.kind()) {
    case TransformKind::real_piecewise_affine:
      p["maps"] = json::array();
      for (const auto& m : t.affine_maps()) p["maps"].push_back({{"knots", m.knots()}, {"images", m.images()}});
      break;
    case TransformKind::real_flow_step:
      p["flows"] = json::array();
      for (const auto& f : t.flows())
        p["flows"].push_back(
            {{"a", f.a()}, {"c", f.c()}, {"b", f.b()}, {"peak_speed", f.peak_speed()}, {"time", f.time()}});
      break;
    case TransformKind::real_translation: p["shift"] = t.real_shift(); break;
    case TransformKind::padic_ball_permutation:
      if constexpr (std::is_same_v<Space, PadicSpace>) {
        p["balls"] = json::array();
        for (const auto& b : t.balls()) p["balls"].push_back(to_json(b));
        p["perm"] = t.ball_perm().image();
      }
      break;
    case TransformKind::padic_translation:
      if constexpr (std::is_same_v<Space, PadicSpace>) {
        p["window"] = to_json(t.shift_window());
        p["shift"] = point_to_json(t.padic_shift());
      }
      break;
    case TransformKind::composite:
      for (std::size_t i = 0; i < t.child_count(); ++i) j["children"].push_back(to_json(t.child(i)));
      break;
    case TransformKind::identity: break;
  }
  return j;
}

namespace detail {

inline Transformation<RealSpace> real_leaf(const RealSpace& s, const std::string& kind, const json& p,
                                           const std::string& pp) {
  if (kind == "real_piecewise_affine") {
    const json& maps = as_array(field(p, "maps", pp), child_path(pp, "maps"));
    if (maps.size() != s.dim) throw schema_error(child_path(pp, "maps"), "one map per coordinate required");
    std::vector<PiecewiseAffine1D> out;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const std::string mp = child_path(child_path(pp, "maps"), i);
      if (maps[i].is_object() && maps[i].empty()) {
        out.emplace_back();
        continue;
      }
      const auto knots = as_doubles(field(maps[i], "knots", mp), child_path(mp, "knots"));
      const auto images = as_doubles(field(maps[i], "images", mp), child_path(mp, "images"));
      out.push_back(located(mp, [&] { return PiecewiseAffine1D(knots, images); }));
    }
    return Transformation<RealSpace>::piecewise_affine(std::move(out));
  }
  if (kind == "real_flow_step") {
    const json& flows = as_array(field(p, "flows", pp), child_path(pp, "flows"));
    if (flows.size() != s.dim) throw schema_error(child_path(pp, "flows"), "one flow per coordinate required");
    std::vector<TentFlow1D> out;
    for (std::size_t i = 0; i < flows.size(); ++i) {
      const std::string fp = child_path(child_path(pp, "flows"), i);
      const json& f = flows[i];
      if (f.is_object() && f.empty()) {
        out.emplace_back();
        continue;
      }
      const auto num = [&](const char* k) { return as_double(field(f, k, fp), child_path(fp, k)); };
      const double a = num("a"), c = num("c"), b = num("b"), h = num("peak_speed"), t = num("time");
      out.push_back(located(fp, [&] { return TentFlow1D(a, c, b, h, t); }));
    }
    return Transformation<RealSpace>::flow_step(std::move(out));
  }
  if (kind == "real_translation") {
    auto shift = point_from_json(s, field(p, "shift", pp), child_path(pp, "shift"));
    return Transformation<RealSpace>::translation(std::move(shift));
  }
  throw schema_error("", "unknown real transformation kind '" + kind +
                             "' (identity, real_piecewise_affine, real_flow_step, real_translation, composite)");
}

inline Transformation<PadicSpace> padic_leaf(const PadicSpace& s, const std::string& kind, const json& p,
                                             const std::string& pp) {
  if (kind == "padic_ball_permutation") {
    auto balls = cells_from_json(s, field(p, "balls", pp), child_path(pp, "balls"));
    const json& pj = as_array(field(p, "perm", pp), child_path(pp, "perm"));
    std::vector<std::size_t> image;
    for (std::size_t i = 0; i < pj.size(); ++i) image.push_back(as_count(pj[i], child_path(child_path(pp, "perm"), i)));
    const Permutation perm = located(child_path(pp, "perm"), [&] { return Permutation(image); });
    return located(pp, [&] { return Transformation<PadicSpace>::ball_permutation(balls, perm); });
  }
  if (kind == "padic_translation") {
    const auto window = cell_from_json(s, field(p, "window", pp), child_path(pp, "window"));
    const auto shift = point_from_json(s, field(p, "shift", pp), child_path(pp, "shift"));
    return located(pp, [&] { return Transformation<PadicSpace>::padic_translation(window, shift); });
  }
  throw schema_error("", "unknown p-adic transformation kind '" + kind +
                             "' (identity, padic_ball_permutation, padic_translation, composite)");
}

}  // namespace detail

template <class Space>
Transformation<Space> transformation_from_json(const Space& s, const json& j, const std::string& path) {
  const std::string kind = as_string(field(j, "kind", path), child_path(path, "kind"));
  Transformation<Space> t;
  if (kind == "identity") {
    t = Transformation<Space>::identity();
  } else if (kind == "composite") {
    const json& ch = as_array(field(j, "children", path), child_path(path, "children"));
    if (ch.size() != 2) throw schema_error(child_path(path, "children"), "composite needs exactly two children");
    t = Transformation<Space>::compose(transformation_from_json(s, ch[0], child_path(child_path(path, "children"), 0)),
                                       transformation_from_json(s, ch[1], child_path(child_path(path, "children"), 1)));
  } else {
    const json p = j.contains("params") ? j["params"] : json::object();
    try {
      if constexpr (std::is_same_v<Space, RealSpace>) t = detail::real_leaf(s, kind, p, child_path(path, "params"));
      else t = detail::padic_leaf(s, kind, p, child_path(path, "params"));
    } catch (const schema_error& e) {
      if (!e.pointer().empty()) throw;
      throw schema_error(child_path(path, "kind"), e.what());
    }
  }
  if (j.contains("inverse")) {
    if (!j["inverse"].is_boolean()) throw schema_error(child_path(path, "inverse"), "expected a boolean");
    if (j["inverse"].get<bool>()) t = t.inverse();
  }
  return t;
}

// ---------------------------------------------------------------------------
// Reports

inline ordered_json to_json(const CheckRecord& r) {
  return ordered_json{{"check", r.check},     {"witness", r.witness},   {"estimate", r.estimate},
                      {"stderr", r.stderr_},  {"verdict", r.verdict},   {"asserted", r.asserted}};
}

inline ordered_json to_json(const ChiSquareResult& r) {
  return ordered_json{{"statistic", r.statistic}, {"dof", r.dof}, {"p_value", r.p_value}};
}

inline ordered_json to_json(const KsResult& r) {
  return ordered_json{{"statistic", r.statistic}, {"p_value", r.p_value}};
}

/// Fixed-format number for CSV cells: shortest round-trip text.
inline std::string csv_number(double x) { return json(x).dump(); }

/// k, affinity, decrement, log_partial, partial_product; one row per factor.
inline std::string trajectory_csv(const KakutaniResult& r) {
  std::ostringstream os;
  os << "k,affinity,decrement,log_partial,partial_product\n";
  for (const auto& s : r.trajectory)
    os << s.k << ',' << csv_number(s.affinity) << ',' << csv_number(s.decrement) << ',' << csv_number(s.log_partial)
       << ',' << csv_number(s.partial_product) << '\n';
  return os.str();
}

/// One row per window level with exact and sampled estimates.
inline std::string scaling_csv(const ScalingReport& r) {
  std::ostringstream os;
  os << "mass,affinity,affinity_closed_form,affinity_mc,affinity_mc_stderr,llr_mean,llr_var,llr_mean_mc,llr_var_mc\n";
  for (const auto& l : r.levels)
    os << csv_number(l.mass) << ',' << csv_number(l.affinity) << ',' << csv_number(l.affinity_closed_form) << ','
       << csv_number(l.affinity_mc) << ',' << csv_number(l.affinity_mc_stderr) << ',' << csv_number(l.llr_mean)
       << ',' << csv_number(l.llr_var) << ',' << csv_number(l.llr_mean_mc) << ',' << csv_number(l.llr_var_mc)
       << '\n';
  return os.str();
}

}  // namespace cfgspace::io
