#pragma once

// Verification suites driven by experiment spec documents. Each suite returns
// check records, a suite-specific result tree and optional CSV files. Monte
// Carlo loops are split over shards, each with its own seeded stream, and the
// shard tallies are merged in shard order so output depends only on
// (spec, seed, shard count).

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cfgspace/io.hpp"

namespace cfgspace::suites {

using io::json;
using io::ordered_json;

inline constexpr const char* kLibraryVersion = "1.0.0";
inline constexpr const char* kSpecSchema = "cfgspace.experiment/1";
inline constexpr const char* kReportSchema = "cfgspace.report/1";

struct ParamDoc {
  std::string name;
  std::string doc;
};

struct SuiteInfo {
  std::string name;
  std::string summary;
  std::vector<std::string> spaces;
  std::vector<ParamDoc> fields;
};

inline const std::vector<SuiteInfo>& suite_catalog() {
  static const std::vector<SuiteInfo> c{
      {"metrics",
       "metric and ultrametric axioms on random triples; assignment solver against brute force",
       {"real", "padic"},
       {{"samples", "random triples per property (default 10000)"},
        {"parameters.points", "points per tuple or configuration (default 3)"},
        {"parameters.oracle_pairs", "configuration pairs per size for the brute-force oracle (default 100)"},
        {"parameters.oracle_max_n", "largest configuration size for the oracle, at most 8 (default 7)"}}},
      {"poisson_identity",
       "joint count frequencies over disjoint regions against the exact product of Poisson laws",
       {"real", "padic"},
       {{"windows", "pairwise disjoint regions inside measure.window"},
        {"samples", "Poisson samples (default 100000)"},
        {"parameters.events", "list of count vectors, one count per region (default: 0, 1, 2 in each region)"}}},
      {"consistency",
       "restriction of the outer law to an inner window against the inner law; superposition",
       {"real", "padic"},
       {{"windows", "[outer, inner] with inner inside outer"},
        {"lambdas", "optional pair of intensity scales for the superposition check"},
        {"samples", "samples per check (default 20000)"}}},
      {"kakutani",
       "equivalence or singularity of infinite product measures from Hellinger affinities",
       {"real", "padic"},
       {{"parameters.canned", "run the built-in fixture set (default true)"},
        {"parameters.cutoff", "number of factors evaluated (default 4096)"},
        {"parameters.sequences",
         "extra families {name, family: gauss_shift | gauss_scale, coefficient, exponent}; factor k differs by "
         "coefficient * k^-exponent"}}},
      {"spherical",
       "spherical function by quadrature and Monte Carlo; power law in the intensity; scaling singularity and "
       "witness search",
       {"real (one-dimensional)", "padic"},
       {{"transformations", "candidate maps, each preserving measure.window"},
        {"lambdas", "intensity scales; the first two drive the scaling and witness checks"},
        {"windows", "window ladder for the scaling evidence (optional)"},
        {"samples", "Monte Carlo samples per estimate (default 20000)"}}},
      {"representation",
       "unitarity, homomorphism, cocycle and sign-twist checks for the induced representations",
       {"real", "padic"},
       {{"transformations", "maps preserving measure.window"},
        {"windows", "regions used by the count dictionary functions (optional)"},
        {"samples", "samples per check (default 5000)"}}},
  };
  return c;
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

inline std::string nearest_suite(const std::string& name) {
  std::string best;
  std::size_t d = SIZE_MAX;
  for (const auto& s : suite_catalog()) {
    const std::size_t e = edit_distance(name, s.name);
    if (e < d) {
      d = e;
      best = s.name;
    }
  }
  return best;
}

inline bool known_suite(const std::string& name) {
  return std::any_of(suite_catalog().begin(), suite_catalog().end(), [&](const auto& s) { return s.name == name; });
}

inline ordered_json catalog_json() {
  ordered_json suites = ordered_json::array();
  for (const auto& s : suite_catalog()) {
    ordered_json f = ordered_json::object();
    for (const auto& p : s.fields) f[p.name] = p.doc;
    suites.push_back({{"name", s.name}, {"summary", s.summary}, {"spaces", s.spaces}, {"fields", f}});
  }
  return ordered_json{
      {"schema", kSpecSchema},
      {"common_fields",
       {{"schema", std::string("must equal \"") + kSpecSchema + "\""},
        {"suite", "suite name"},
        {"seed", "unsigned integer, mandatory"},
        {"space", "{kind: real, dim} or {kind: padic, prime, dim, precision}"},
        {"measure",
         "{kind, parameters, window}; real kinds lebesgue {intensity}, gaussian {eigenvalues}, sum {parts, weights}; "
         "p-adic kinds haar {intensity}, padic_gaussian {scales, cutoff}, sum; window is a box {lo, hi} or a ball "
         "{center, radius_exp}"},
        {"transformations",
         "list of {kind, params, children, inverse, name}; kinds identity, real_piecewise_affine {maps: [{knots, "
         "images}]}, real_flow_step {flows: [{a, c, b, peak_speed, time}]}, real_translation {shift}, "
         "padic_ball_permutation {balls, perm}, padic_translation {window, shift}, composite (children [outer, "
         "inner])"},
        {"windows", "list of cells"},
        {"lambdas", "list of positive intensity scales"},
        {"samples", "sample count"},
        {"parameters", "suite-specific options"}}},
      {"suites", suites}};
}

struct RunOptions {
  std::size_t shards = 1;
  std::optional<std::uint64_t> seed_override;
};

struct SuiteOutput {
  std::vector<CheckRecord> checks;
  ordered_json results = ordered_json::object();
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::uint64_t seed = 0;
};

namespace detail {

/// Independent streams for work that is not split over shards.
inline constexpr std::uint64_t kFixedStream = std::uint64_t{1} << 40;

inline Rng stream(std::uint64_t seed, std::uint64_t id) { return shard_rng(seed, kFixedStream + id); }

/// Runs work(rng, count) on each shard in its own thread and merges the
/// results in shard order.
template <class Tally, class Work>
Tally run_shards(std::uint64_t seed, std::size_t shards, std::size_t samples, std::uint64_t stream_id, Work work) {
  shards = std::max<std::size_t>(1, std::min(shards, std::max<std::size_t>(samples, 1)));
  std::vector<Tally> parts(shards);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(shards);
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t n = samples / shards + (s < samples % shards ? 1 : 0);
    threads.emplace_back([&, s, n] {
      try {
        Rng rng = shard_rng(seed, stream_id * 4096 + s);
        parts[s] = work(rng, n);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  Tally total = std::move(parts[0]);
  for (std::size_t s = 1; s < shards; ++s) total.merge(parts[s]);
  return total;
}

struct Mergeable {
  RunningStats stats;
  void merge(const Mergeable& o) { stats.merge(o.stats); }
};

/// Per-property trial and violation counts.
struct PropertyTally {
  std::vector<std::string> names;
  std::vector<std::size_t> trials, failures;
  std::vector<double> worst;

  std::size_t slot(const std::string& n) {
    const auto it = std::find(names.begin(), names.end(), n);
    if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
    names.push_back(n);
    trials.push_back(0);
    failures.push_back(0);
    worst.push_back(0.0);
    return names.size() - 1;
  }
  void record(const std::string& n, bool ok, double excess = 0.0) {
    const std::size_t i = slot(n);
    ++trials[i];
    if (!ok) ++failures[i];
    worst[i] = std::max(worst[i], excess);
  }
  void merge(const PropertyTally& o) {
    for (std::size_t k = 0; k < o.names.size(); ++k) {
      const std::size_t i = slot(o.names[k]);
      trials[i] += o.trials[k];
      failures[i] += o.failures[k];
      worst[i] = std::max(worst[i], o.worst[k]);
    }
  }
};

template <class Space>
struct Context {
  Space space;
  MeasureModel<Space> measure;
  typename Space::Cell window;
  std::vector<std::pair<std::string, Transformation<Space>>> transformations;
  std::vector<typename Space::Cell> windows;
  std::vector<double> lambdas;
  std::optional<std::size_t> samples;
  json parameters = json::object();
  std::uint64_t seed = 0;
  std::size_t shards = 1;

  std::size_t samples_or(std::size_t d) const { return samples.value_or(d); }
  PoissonLaw<Space> law(double scale = 1.0) const {
    return io::located("/measure", [&] { return make_poisson_law(measure, window, scale); });
  }
};

template <class Space>
Context<Space> make_context(const Space& space, const json& spec, std::uint64_t seed, std::size_t shards) {
  Context<Space> c;
  c.space = space;
  c.seed = seed;
  c.shards = shards;
  const json& m = io::field(spec, "measure", "");
  c.measure = io::measure_from_json(space, m, "/measure");
  c.window = io::cell_from_json(space, io::field(m, "window", "/measure"), "/measure/window");
  if (spec.contains("transformations")) {
    const json& ts = io::as_array(spec["transformations"], "/transformations");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string path = "/transformations/" + std::to_string(i);
      auto t = io::transformation_from_json(space, ts[i], path);
      std::string name = "psi" + std::to_string(i);
      if (ts[i].contains("name")) name = io::as_string(ts[i]["name"], path + "/name");
      c.transformations.emplace_back(std::move(name), std::move(t));
    }
  }
  if (spec.contains("windows")) c.windows = io::cells_from_json(space, spec["windows"], "/windows");
  if (spec.contains("lambdas")) {
    c.lambdas = io::as_doubles(spec["lambdas"], "/lambdas");
    for (std::size_t i = 0; i < c.lambdas.size(); ++i)
      if (!(c.lambdas[i] > 0)) throw io::schema_error("/lambdas/" + std::to_string(i), "intensity scales must be positive");
  }
  if (spec.contains("samples")) {
    c.samples = io::as_count(spec["samples"], "/samples");
    if (*c.samples == 0) throw io::schema_error("/samples", "sample count must be positive");
  }
  if (spec.contains("parameters")) {
    if (!spec["parameters"].is_object()) throw io::schema_error("/parameters", "expected an object");
    c.parameters = spec["parameters"];
  }
  return c;
}

template <class Space>
void require_preserving(const Context<Space>& c) {
  for (std::size_t i = 0; i < c.transformations.size(); ++i)
    if (!c.transformations[i].second.preserves(c.window))
      throw io::schema_error("/transformations/" + std::to_string(i),
                             "transformation does not map measure.window onto itself");
}

template <class Space>
void require_inside(const Context<Space>& c, const typename Space::Cell& w, const std::string& path) {
  if (!cfgspace::detail::cell_inside(c.window, w)) throw io::schema_error(path, "region leaves measure.window");
}

inline std::size_t param_count(const json& p, const char* key, std::size_t d) {
  return p.contains(key) ? io::as_count(p[key], std::string("/parameters/") + key) : d;
}

inline std::string pass_if(bool ok) { return ok ? "PASS" : "FAIL"; }

inline ordered_json records_json(const std::vector<CheckRecord>& r) {
  ordered_json a = ordered_json::array();
  for (const auto& c : r) a.push_back(io::to_json(c));
  return a;
}

// ---------------------------------------------------------------------------
// metrics

template <class Space>
typename Space::Distance brute_force_matching(const Space& s, const Tuple<Space>& a, const Tuple<Space>& b) {
  std::vector<std::size_t> perm(a.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::optional<typename Space::Distance> best;
  do {
    auto acc = s.zero_distance();
    for (std::size_t i = 0; i < a.size(); ++i)
      acc = cfgspace::detail::combine<Space>(acc, s.distance(a[i], b[perm[i]]));
    if (!best || acc < *best) best = acc;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return *best;
}

template <class Space>
Tuple<Space> distinct_points(const Context<Space>& c, std::size_t n, Rng& rng) {
  return fixed_count_sample(c.measure, c.window, n, rng).points();
}

/// d(x, z) <= d(x, y) + d(y, z) (real) or <= max(d(x, y), d(y, z)) (p-adic).
template <class Space, class D>
std::pair<bool, double> triangle(const D& xz, const D& xy, const D& yz) {
  if constexpr (Space::natural_mode == ProductMode::sum) {
    const double bound = xy + yz;
    const double excess = xz - bound;
    return {excess <= 1e-12 * std::max(1.0, bound), std::max(0.0, excess)};
  } else {
    const D bound = max(xy, yz);
    return {!(bound < xz), bound < xz ? Space::to_double(xz) - Space::to_double(bound) : 0.0};
  }
}

template <class Space>
SuiteOutput run_metrics(const Context<Space>& c) {
  const std::size_t triples = c.samples_or(10000);
  const std::size_t n = param_count(c.parameters, "points", 3);
  const std::size_t pairs = param_count(c.parameters, "oracle_pairs", 100);
  const std::size_t max_n = param_count(c.parameters, "oracle_max_n", 7);
  if (n < 2) throw io::schema_error("/parameters/points", "tuples need at least two points");
  if (max_n > 8) throw io::schema_error("/parameters/oracle_max_n", "brute force is limited to n <= 8");
  constexpr bool padic = std::is_same_v<Space, PadicSpace>;
  const std::string tri = padic ? "ultrametric" : "triangle";

  auto tally = run_shards<PropertyTally>(c.seed, c.shards, triples, 0, [&](Rng& rng, std::size_t count) {
    PropertyTally t;
    for (std::size_t s = 0; s < count; ++s) {
      const auto x = distinct_points(c, n, rng), y = distinct_points(c, n, rng), z = distinct_points(c, n, rng);
      if constexpr (padic) {
        const auto a = PowerOfP::of(x[0][0] - z[0][0]);
        const auto b = PowerOfP::of(x[0][0] - y[0][0]);
        const auto d = PowerOfP::of(y[0][0] - z[0][0]);
        const auto r = triangle<Space>(a, b, d);
        t.record("padic_abs." + tri, r.first, r.second);
      }
      {
        const auto r = triangle<Space>(c.space.distance(x[0], z[0]), c.space.distance(x[0], y[0]),
                                       c.space.distance(y[0], z[0]));
        t.record("base_metric." + tri, r.first, r.second);
      }
      {
        const auto r = triangle<Space>(product_metric(c.space, x, z), product_metric(c.space, x, y),
                                       product_metric(c.space, y, z));
        t.record("product_metric." + tri, r.first, r.second);
      }
      {
        const auto xz = delta_metric(c.space, x, z), xy = delta_metric(c.space, x, y), yz = delta_metric(c.space, y, z);
        const auto r = triangle<Space>(xz, xy, yz);
        t.record("delta_metric." + tri, r.first, r.second);
        const double v = Space::to_double(xz);
        t.record("delta_metric.bounded_by_1", v <= 1.0, std::max(0.0, v - 1.0));
        t.record("delta_metric.symmetric", xz == delta_metric(c.space, z, x));
      }
      {
        const auto mxz = matching_metric_points(c.space, x, z), mxy = matching_metric_points(c.space, x, y),
                   myz = matching_metric_points(c.space, y, z);
        const auto r = triangle<Space>(mxz, mxy, myz);
        t.record("matching_metric." + tri, r.first, r.second);
        t.record("matching_metric.below_product", !(product_metric(c.space, x, z) < mxz));
        t.record("matching_metric.identity", matching_metric_points(c.space, x, x) == c.space.zero_distance());
      }
    }
    return t;
  });

  auto oracle = run_shards<PropertyTally>(c.seed, c.shards, pairs, 1, [&](Rng& rng, std::size_t count) {
    PropertyTally t;
    for (std::size_t s = 0; s < count; ++s)
      for (std::size_t k = 1; k <= max_n; ++k) {
        const auto a = distinct_points(c, k, rng), b = distinct_points(c, k, rng);
        const bool ok = matching_metric_points(c.space, a, b) == brute_force_matching(c.space, a, b);
        t.record("matching_metric.assignment_oracle", ok);
      }
    return t;
  });
  tally.merge(oracle);

  SuiteOutput out;
  ordered_json table = ordered_json::array();
  for (std::size_t i = 0; i < tally.names.size(); ++i) {
    const bool ok = tally.failures[i] == 0;
    out.checks.push_back({tally.names[i], std::to_string(tally.trials[i]) + " trials",
                          static_cast<double>(tally.failures[i]), 0.0, pass_if(ok)});
    table.push_back({{"property", tally.names[i]},
                     {"trials", tally.trials[i]},
                     {"violations", tally.failures[i]},
                     {"worst_excess", tally.worst[i]}});
  }

  // soft: delta and the matching metric agree on which sampled pairs are close
  Rng rng = stream(c.seed, 2);
  const std::size_t soft_pairs = std::min<std::size_t>(triples, 2000);
  std::vector<std::pair<double, double>> v;
  for (std::size_t s = 0; s < soft_pairs; ++s) {
    const auto x = distinct_points(c, n, rng), y = distinct_points(c, n, rng);
    v.emplace_back(Space::to_double(delta_metric(c.space, x, y)),
                   Space::to_double(matching_metric_points(c.space, x, y)));
  }
  std::sort(v.begin(), v.end());
  const std::size_t tenth = std::max<std::size_t>(1, v.size() / 10);
  RunningStats low, all;
  for (std::size_t i = 0; i < v.size(); ++i) {
    all.add(v[i].second);
    if (i < tenth) low.add(v[i].second);
  }
  const bool comonotone = low.mean() <= all.mean();
  CheckRecord soft{"delta_vs_matching.comonotone", "mean matching distance over the delta-closest tenth / overall",
                   all.mean() > 0 ? low.mean() / all.mean() : 0.0, 0.0, pass_if(comonotone), false};
  out.checks.push_back(soft);
  out.results["property_table"] = table;
  return out;
}

// ---------------------------------------------------------------------------
// poisson_identity

struct CountTally {
  std::vector<std::size_t> hits;
  std::vector<RunningStats> counts;
  std::vector<RunningStats> cross;  // centered count products per region pair
  void merge(const CountTally& o) {
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += o.hits[i];
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i].merge(o.counts[i]);
    for (std::size_t i = 0; i < cross.size(); ++i) cross[i].merge(o.cross[i]);
  }
};

template <class Space>
SuiteOutput run_poisson_identity(const Context<Space>& c) {
  if (c.windows.empty()) throw io::schema_error("/windows", "poisson_identity needs at least one region");
  for (std::size_t i = 0; i < c.windows.size(); ++i) {
    require_inside(c, c.windows[i], "/windows/" + std::to_string(i));
    for (std::size_t j = 0; j < i; ++j)
      if (!c.windows[i].disjoint(c.windows[j]))
        throw io::schema_error("/windows/" + std::to_string(i), "regions must be pairwise disjoint");
  }
  const std::size_t r = c.windows.size();
  std::vector<std::vector<std::size_t>> events;
  if (c.parameters.contains("events")) {
    const json& ev = io::as_array(c.parameters["events"], "/parameters/events");
    for (std::size_t e = 0; e < ev.size(); ++e) {
      const std::string path = "/parameters/events/" + std::to_string(e);
      std::vector<std::size_t> v;
      for (std::size_t i = 0; i < io::as_array(ev[e], path).size(); ++i) v.push_back(io::as_count(ev[e][i], path));
      if (v.size() != r) throw io::schema_error(path, "one count per region required");
      events.push_back(v);
    }
  } else {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t k = 0; k <= 2; ++k) {
        std::vector<std::size_t> v(r, 0);
        v[i] = k;
        events.push_back(v);
      }
  }
  const auto law = c.law();
  std::vector<double> means(r);
  for (std::size_t i = 0; i < r; ++i) means[i] = law.mass(c.windows[i]);
  const std::size_t samples = c.samples_or(100000);

  const auto tally = run_shards<CountTally>(c.seed, c.shards, samples, 0, [&](Rng& rng, std::size_t count) {
    CountTally t;
    t.hits.assign(events.size(), 0);
    t.counts.resize(r);
    t.cross.resize(r * r);
    std::vector<std::size_t> n(r);
    for (std::size_t s = 0; s < count; ++s) {
      const auto g = poisson_sample(law, rng);
      for (std::size_t i = 0; i < r; ++i) {
        n[i] = cfgspace::count(g, c.windows[i]);
        t.counts[i].add(static_cast<double>(n[i]));
      }
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = i + 1; j < r; ++j)
          t.cross[i * r + j].add((static_cast<double>(n[i]) - means[i]) * (static_cast<double>(n[j]) - means[j]));
      for (std::size_t e = 0; e < events.size(); ++e)
        if (n == events[e]) ++t.hits[e];
    }
    return t;
  });

  SuiteOutput out;
  ordered_json rows = ordered_json::array();
  const double N = static_cast<double>(samples);
  for (std::size_t e = 0; e < events.size(); ++e) {
    const double exact = count_probability(law, c.windows, events[e]);
    const double freq = static_cast<double>(tally.hits[e]) / N;
    const double sigma = std::sqrt(exact * (1.0 - exact) / N);
    const double z = sigma > 0 ? (freq - exact) / sigma : (freq == exact ? 0.0 : INFINITY);
    std::string label = "N=(";
    for (std::size_t i = 0; i < r; ++i) label += (i ? "," : "") + std::to_string(events[e][i]);
    label += ")";
    out.checks.push_back({"poisson_identity.joint_count", label, freq, sigma, pass_if(std::abs(z) <= 3.0)});
    rows.push_back({{"event", events[e]}, {"exact", exact}, {"frequency", freq}, {"sigma", sigma}, {"z", z}});
  }
  for (std::size_t i = 0; i < r; ++i) {
    const auto& st = tally.counts[i];
    const double z = (st.mean() - means[i]) / std::sqrt(means[i] / N);
    out.checks.push_back({"poisson_identity.mean_count", "region " + std::to_string(i), st.mean(), std::sqrt(means[i] / N),
                          pass_if(std::abs(z) <= 3.0), false});
    for (std::size_t j = i + 1; j < r; ++j) {
      const auto& cr = tally.cross[i * r + j];
      const double zc = cr.stderr_mean() > 0 ? cr.mean() / cr.stderr_mean() : 0.0;
      out.checks.push_back({"poisson_identity.independence",
                            "cov(N_" + std::to_string(i) + ", N_" + std::to_string(j) + ")", cr.mean(),
                            cr.stderr_mean(), pass_if(std::abs(zc) <= 4.0), false});
    }
  }
  out.results["region_means"] = means;
  out.results["events"] = rows;
  return out;
}

// ---------------------------------------------------------------------------
// consistency

struct TallyBox {
  ConsistencyTally t;
  void merge(const TallyBox& o) { t.merge(o.t); }
};

struct HistTally {
  std::vector<double> bins = std::vector<double>(kCountBins);
  RunningStats n;
  void merge(const HistTally& o) {
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i] += o.bins[i];
    n.merge(o.n);
  }
};

template <class Space>
SuiteOutput run_consistency(const Context<Space>& c) {
  if (c.windows.size() != 2) throw io::schema_error("/windows", "consistency needs [outer, inner] windows");
  require_inside(c, c.windows[0], "/windows/0");
  if (!cfgspace::detail::cell_inside(c.windows[0], c.windows[1]))
    throw io::schema_error("/windows/1", "inner window must lie inside the outer window");
  const std::size_t samples = c.samples_or(20000);
  const auto outer = c.law().with_window(c.windows[0]);
  const auto tally = run_shards<TallyBox>(c.seed, c.shards, samples, 0, [&](Rng& rng, std::size_t count) {
    return TallyBox{consistency_tally(outer, c.windows[1], count, rng)};
  });
  const auto rep = consistency_finalize(tally.t);
  SuiteOutput out;
  out.checks.push_back({"consistency.restricted_vs_exact", "chi-square p, counts 0..12",
                        rep.restricted_vs_exact.p_value, 0.0, pass_if(rep.restricted_vs_exact.p_value > 1e-3)});
  out.checks.push_back({"consistency.restricted_vs_direct", "chi-square two-sample p",
                        rep.restricted_vs_direct.p_value, 0.0, pass_if(rep.restricted_vs_direct.p_value > 1e-3)});
  out.checks.push_back({"consistency.pairwise_distances", "KS two-sample p", rep.pairwise_distances.p_value, 0.0,
                        pass_if(rep.pairwise_distances.p_value > 1e-3), false});
  out.checks.push_back({"consistency.disjoint_independence", "cov(N(K_n), N(K_l \\ K_n))", rep.covariance,
                        rep.covariance_z != 0 ? std::abs(rep.covariance / rep.covariance_z) : 0.0,
                        pass_if(std::abs(rep.covariance_z) <= 4.0), false});
  out.results["inner_mass"] = rep.inner_mass;
  out.results["restricted_count_mean"] = rep.restricted_count_mean;
  out.results["direct_count_mean"] = rep.direct_count_mean;
  out.results["restricted_vs_exact"] = io::to_json(rep.restricted_vs_exact);
  out.results["restricted_vs_direct"] = io::to_json(rep.restricted_vs_direct);
  out.results["pairwise_distances"] = io::to_json(rep.pairwise_distances);
  out.results["covariance_z"] = rep.covariance_z;

  if (c.lambdas.size() >= 2) {
    const auto a = outer.with_scale(c.lambdas[0]), b = outer.with_scale(c.lambdas[1]);
    const double mean = a.mean() + b.mean();
    const auto hist = run_shards<HistTally>(c.seed, c.shards, samples, 1, [&](Rng& rng, std::size_t count) {
      HistTally h;
      for (std::size_t s = 0; s < count; ++s) {
        const std::size_t n = convolve_samples(poisson_sample(a, rng), poisson_sample(b, rng)).size();
        h.bins[std::min(n, kCountBins - 1)] += 1;
        h.n.add(static_cast<double>(n));
      }
      return h;
    });
    std::vector<double> expected(kCountBins);
    double below = 0.0;
    for (std::size_t n = 0; n + 1 < kCountBins; ++n) {
      expected[n] = static_cast<double>(samples) * poisson_pmf(mean, n);
      below += poisson_pmf(mean, n);
    }
    expected.back() = static_cast<double>(samples) * std::max(0.0, 1.0 - below);
    const auto gof = chi_square_gof(hist.bins, expected);
    const double se = std::sqrt(mean / static_cast<double>(samples));
    out.checks.push_back({"superposition.count_mean", "E N(union) = (lambda_1 + lambda_2) m(K)", hist.n.mean(), se,
                          pass_if(std::abs(hist.n.mean() - mean) <= 3.0 * se)});
    out.checks.push_back({"superposition.count_law", "chi-square p against Poisson(m_1 + m_2)", gof.p_value, 0.0,
                          pass_if(gof.p_value > 1e-3)});
    out.results["superposition"] = {{"expected_mean", mean}, {"chi_square", io::to_json(gof)}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// kakutani

inline std::string file_safe(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
  return s;
}

inline SuiteOutput run_kakutani(const json& params) {
  KakutaniOptions opt;
  opt.cutoff = param_count(params, "cutoff", opt.cutoff);
  if (opt.cutoff < 64) throw io::schema_error("/parameters/cutoff", "cutoff must be at least 64");
  bool canned = true;
  if (params.contains("canned")) {
    if (!params["canned"].is_boolean()) throw io::schema_error("/parameters/canned", "expected a boolean");
    canned = params["canned"].get<bool>();
  }
  std::vector<KakutaniFixture> fixtures;
  if (canned) fixtures = canned_kakutani_fixtures();
  if (params.contains("sequences")) {
    const json& seq = io::as_array(params["sequences"], "/parameters/sequences");
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const std::string path = "/parameters/sequences/" + std::to_string(i);
      const std::string name = io::as_string(io::field(seq[i], "name", path), path + "/name");
      const std::string family = io::as_string(io::field(seq[i], "family", path), path + "/family");
      const double coef = io::as_double(io::field(seq[i], "coefficient", path), path + "/coefficient");
      const double ex = io::as_double(io::field(seq[i], "exponent", path), path + "/exponent");
      if (!(coef > 0)) throw io::schema_error(path + "/coefficient", "coefficient must be positive");
      // sum_k (c k^-e)^2 converges iff e > 1/2
      const Verdict v = ex > 0.5 ? Verdict::equivalent : Verdict::singular;
      if (family == "gauss_shift") {
        fixtures.push_back({name, [coef, ex](std::size_t k) {
                              return std::pair<Law1D, Law1D>{
                                  RealLaw1D::gaussian(0, 1),
                                  RealLaw1D::gaussian(coef * std::pow(static_cast<double>(k), -ex), 1)};
                            },
                            v});
      } else if (family == "gauss_scale") {
        fixtures.push_back({name, [coef, ex](std::size_t k) {
                              return std::pair<Law1D, Law1D>{
                                  RealLaw1D::gaussian(0, 1),
                                  RealLaw1D::gaussian(0, 1 + coef * std::pow(static_cast<double>(k), -ex))};
                            },
                            v});
      } else {
        throw io::schema_error(path + "/family", "family must be gauss_shift or gauss_scale");
      }
    }
  }
  if (fixtures.empty()) throw io::schema_error("/parameters", "no product-measure sequences to classify");
  SuiteOutput out;
  ordered_json rows = ordered_json::array();
  std::size_t undecided = 0;
  for (const auto& f : fixtures) {
    const auto r = kakutani_dichotomy(f.pair_at, opt);
    if (r.verdict == Verdict::undecided) ++undecided;
    const std::string file = "kakutani_" + file_safe(f.name) + ".csv";
    out.files.emplace_back(file, io::trajectory_csv(r));
    out.checks.push_back({"kakutani.classification", f.name, r.limit_estimate, 0.0,
                          pass_if(r.verdict == f.expected)});
    rows.push_back({{"name", f.name},
                    {"verdict", to_string(r.verdict)},
                    {"expected", to_string(f.expected)},
                    {"reason", r.reason},
                    {"limit_estimate", r.limit_estimate},
                    {"block_ratio", r.block_ratio},
                    {"trajectory", file}});
  }
  out.checks.push_back({"kakutani.no_undecided", "fixtures left UNDECIDED", static_cast<double>(undecided), 0.0,
                        pass_if(undecided == 0)});
  out.results["cutoff"] = opt.cutoff;
  out.results["sequences"] = rows;
  return out;
}

// ---------------------------------------------------------------------------
// spherical

template <class Space>
SuiteOutput run_spherical(const Context<Space>& c) {
  if constexpr (std::is_same_v<Space, RealSpace>)
    if (c.space.dim != 1) throw io::schema_error("/space/dim", "spherical quadrature needs a one-dimensional real space");
  if (c.transformations.empty()) throw io::schema_error("/transformations", "spherical needs at least one transformation");
  require_preserving(c);
  const std::size_t samples = c.samples_or(20000);
  const auto law = c.law();
  SuiteOutput out;
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < c.transformations.size(); ++i) {
    const auto& [name, psi] = c.transformations[i];
    const auto quad = spherical_function(law, psi, SphericalMode::quadrature);
    const auto mc = run_shards<Mergeable>(c.seed, c.shards, samples, 10 + i, [&](Rng& rng, std::size_t count) {
      Mergeable m;
      for (std::size_t s = 0; s < count; ++s) m.stats.add(std::sqrt(rho_poisson(law, psi, poisson_sample(law, rng))));
      return m;
    });
    const double se = mc.stats.stderr_mean();
    const double gap = std::abs(quad.value - mc.stats.mean());
    out.checks.push_back({"spherical.quadrature_vs_mc", name, mc.stats.mean(), se,
                          pass_if(gap <= std::max(3.0 * se, 1e-3))});
    ordered_json powers = ordered_json::array();
    for (double l : c.lambdas) {
      const double ul = spherical_function(law.with_scale(l), psi, SphericalMode::quadrature).value;
      const double pw = std::pow(quad.value, l);
      out.checks.push_back({"spherical.power_law", name + " lambda=" + io::csv_number(l), ul, 0.0,
                            pass_if(std::abs(ul - pw) <= 1e-6)});
      powers.push_back({{"lambda", l}, {"u_lambda", ul}, {"u_to_lambda", pw}});
    }
    rows.push_back({{"name", name},
                    {"transformation", io::to_json(psi)},
                    {"integral", quad.integral},
                    {"u_quadrature", quad.value},
                    {"u_mc", mc.stats.mean()},
                    {"u_mc_stderr", se},
                    {"powers", powers}});
  }
  out.results["transformations"] = rows;

  if (c.lambdas.size() >= 2 && c.lambdas[0] != c.lambdas[1]) {
    const double l1 = c.lambdas[0], l2 = c.lambdas[1];
    std::vector<typename Space::Cell> ladder = c.windows;
    if (ladder.empty()) ladder.push_back(c.window);
    Rng rng = stream(c.seed, 3);
    const auto sc = scaling_singularity_evidence(law, l1, l2, ladder, std::min<std::size_t>(samples, 20000), rng);
    out.files.emplace_back("scaling.csv", io::scaling_csv(sc));
    out.checks.push_back({"scaling.verdict", "count-law affinity trend of P_{l1 m} vs P_{l2 m}", sc.slope, 0.0,
                          to_string(sc.verdict), true});
    if (sc.verdict != Verdict::singular) out.checks.back().verdict = "FAIL";
    out.checks.push_back({"scaling.below_threshold_at_last_level",
                          "affinity < " + io::csv_number(sc.threshold) + " at mass " +
                              io::csv_number(sc.levels.back().mass),
                          sc.levels.back().affinity, 0.0, pass_if(sc.below_threshold_at_last_level), false});
    out.results["scaling"] = {{"lambda1", l1},
                              {"lambda2", l2},
                              {"slope", sc.slope},
                              {"intercept", sc.intercept},
                              {"mass_to_threshold", std::isfinite(sc.mass_to_threshold) ? json(sc.mass_to_threshold)
                                                                                          : json(nullptr)},
                              {"verdict", to_string(sc.verdict)},
                              {"levels", "scaling.csv"}};

    Rng drng = stream(c.seed, 4);
    const auto d = spherical_discriminator(law, l1, l2, c.transformations, std::min<std::size_t>(samples, 20000), drng);
    ordered_json drows = ordered_json::array();
    for (const auto& r : d.rows)
      drows.push_back({{"name", r.name},
                       {"u1_quadrature", r.u1_quad},
                       {"u2_quadrature", r.u2_quad},
                       {"u1_mc", r.u1_mc},
                       {"u1_stderr", r.u1_stderr},
                       {"u2_mc", r.u2_mc},
                       {"u2_stderr", r.u2_stderr},
                       {"separation", r.separation},
                       {"separation_mc", r.separation_mc},
                       {"combined_stderr", r.combined_stderr},
                       {"separated", r.separated}});
    out.results["discriminator"] = {{"rows", drows},
                                    {"witness", d.witness ? json(d.rows[*d.witness].name) : json(nullptr)},
                                    {"separated", d.separated},
                                    {"no_witness_possible", d.no_witness_possible}};
    if (d.no_witness_possible) {
      out.checks.push_back({"spherical.witness", "every candidate preserves m; no witness possible", 0.0, 0.0,
                            "NO_WITNESS", false});
    } else {
      const auto& w = d.rows[*d.witness];
      out.checks.push_back({"spherical.witness", w.name, w.separation_mc, w.combined_stderr, pass_if(d.separated)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// representation

template <class Space>
std::vector<DictionaryFunction<Space>> dictionary_for(const Context<Space>& c) {
  std::vector<DictionaryFunction<Space>> d{DictionaryFunction<Space>::constant()};
  for (std::size_t i = 0; i < c.windows.size(); ++i) {
    const std::string label = "W" + std::to_string(i);
    d.push_back(DictionaryFunction<Space>::count(Region<Space>{c.windows[i]}, label));
    d.push_back(DictionaryFunction<Space>::count_indicator(Region<Space>{c.windows[i]}, 1, label));
  }
  d.push_back(DictionaryFunction<Space>::symmetric_poly(2));
  return d;
}

template <class Space>
SuiteOutput run_representation(const Context<Space>& c) {
  if (c.transformations.empty())
    throw io::schema_error("/transformations", "representation needs at least one transformation");
  require_preserving(c);
  for (std::size_t i = 0; i < c.windows.size(); ++i) require_inside(c, c.windows[i], "/windows/" + std::to_string(i));
  const std::size_t samples = c.samples_or(5000);
  const auto law = c.law();
  const auto dict = dictionary_for(c);
  SuiteOutput out;
  const std::size_t nt = c.transformations.size();
  const bool exact_measure = [&] {
    if constexpr (std::is_same_v<Space, PadicSpace>)
      return !c.measure.is_sum() && std::holds_alternative<Haar>(c.measure.node().kind);
    return false;
  }();
  for (std::size_t i = 0; i < nt; ++i) {
    const auto& [name, psi] = c.transformations[i];
    const auto& [name2, phi] = c.transformations[(i + 1) % nt];
    Rng r1 = stream(c.seed, 100 + 4 * i), r2 = stream(c.seed, 101 + 4 * i), r3 = stream(c.seed, 102 + 4 * i),
        r4 = stream(c.seed, 103 + 4 * i);
    for (auto rec : unitarity_check(law, psi, dict, samples, r1)) {
      rec.witness = name + ": " + rec.witness;
      out.checks.push_back(rec);
    }
    for (auto rec : homomorphism_check(law, psi, phi, dict, std::min<std::size_t>(samples, 2000), r2)) {
      rec.witness = name + " o " + name2 + ": " + rec.witness;
      out.checks.push_back(rec);
    }
    const auto f0 = matrix_coefficient_f0(law, psi, samples, r3);
    const double u = spherical_function(law, psi, SphericalMode::quadrature).value;
    out.checks.push_back({"matrix_coefficient.f0", name + ": <U f0, f0> against u_m quadrature " + io::csv_number(u),
                          f0.estimate, f0.stderr_,
                          pass_if(std::abs(f0.estimate - u) <= std::max(3.0 * f0.stderr_, 1e-12))});
    if constexpr (std::is_same_v<Space, PadicSpace>) {
      // exact measure preservation at sampled points
      bool all_one = true;
      const std::size_t pts = std::min<std::size_t>(samples, 10000);
      for (std::size_t s = 0; s < pts; ++s) all_one = all_one && rho_factor(c.measure, psi, c.measure.sample(c.window, r4)) == 1.0;
      out.checks.push_back({"rho.identity", name + ": rho_m(psi, x) == 1 at " + std::to_string(pts) + " points",
                            all_one ? 1.0 : 0.0, 0.0, pass_if(all_one), exact_measure});
      if (psi.kind() == TransformKind::padic_ball_permutation) {
        // all ball centers: psi permutes them, and V^sign carries sign(perm)
        std::vector<typename Space::Point> centers;
        for (const auto& b : psi.balls()) centers.push_back(b.center);
        const FiniteConfig<Space> g(c.space, centers);
        const SymmetricGroupRep q{centers.size(), RepKind::sign};
        const auto v = apply_Vq(law, psi, q, WFunction<Space>::of_scalar(DictionaryFunction<Space>::constant()), g);
        const double expect = static_cast<double>(psi.ball_perm().sign());
        out.checks.push_back({"twist.sign", name + ": V^sign 1 on the ball centers, expected " + io::csv_number(expect),
                              v[0], 0.0, pass_if(v[0] == expect)});
      }
    }
  }
  out.results["dictionary"] = [&] {
    ordered_json a = ordered_json::array();
    for (const auto& f : dict) a.push_back(f.name);
    return a;
  }();
  return out;
}

template <class Space>
SuiteOutput dispatch(const std::string& suite, const Space& space, const json& spec, std::uint64_t seed,
                     std::size_t shards) {
  if (suite == "kakutani") {
    json params = spec.contains("parameters") ? spec["parameters"] : json::object();
    if (!params.is_object()) throw io::schema_error("/parameters", "expected an object");
    return run_kakutani(params);
  }
  const auto c = make_context(space, spec, seed, shards);
  if (suite == "metrics") return run_metrics(c);
  if (suite == "poisson_identity") return run_poisson_identity(c);
  if (suite == "consistency") return run_consistency(c);
  if (suite == "spherical") return run_spherical(c);
  return run_representation(c);
}

}  // namespace detail

/// Validates the common fields and runs the suite. Schema problems raise
/// io::schema_error; the returned checks carry the numeric verdicts.
inline SuiteOutput run_suite(const json& spec, const RunOptions& opt = {}) {
  if (!spec.is_object()) throw io::schema_error("", "spec must be a JSON object");
  const std::string schema = io::as_string(io::field(spec, "schema", ""), "/schema");
  if (schema != kSpecSchema)
    throw io::schema_error("/schema", "unsupported schema '" + schema + "', expected '" + kSpecSchema + "'");
  const std::string suite = io::as_string(io::field(spec, "suite", ""), "/suite");
  if (!known_suite(suite))
    throw io::schema_error("/suite", "unknown suite '" + suite + "'; did you mean '" + nearest_suite(suite) + "'?");
  const json& seed_j = io::field(spec, "seed", "");
  if (!seed_j.is_number_integer() || (!seed_j.is_number_unsigned() && seed_j.get<long long>() < 0))
    throw io::schema_error("/seed", "seed must be a nonnegative integer");
  const std::uint64_t seed = opt.seed_override.value_or(seed_j.get<std::uint64_t>());
  const json& space = io::field(spec, "space", "");
  SuiteOutput out;
  if (io::space_kind(space, "/space") == "real")
    out = detail::dispatch(suite, io::real_space_from_json(space, "/space"), spec, seed, opt.shards);
  else
    out = detail::dispatch(suite, io::padic_space_from_json(space, "/space"), spec, seed, opt.shards);
  out.seed = seed;
  return out;
}

/// The report document; byte-stable for a fixed spec, seed and shard count.
inline ordered_json report_json(const json& spec, const SuiteOutput& out, const std::string& spec_sha256,
                                std::size_t shards) {
  std::vector<std::string> failed;
  for (const auto& c : out.checks)
    if (c.asserted && c.verdict == "FAIL") failed.push_back(c.check + " [" + c.witness + "]");
  std::vector<std::string> files;
  for (const auto& f : out.files) files.push_back(f.first);
  return ordered_json{{"schema", kReportSchema},
                      {"library_version", kLibraryVersion},
                      {"spec_sha256", spec_sha256},
                      {"suite", spec.at("suite")},
                      {"seed", out.seed},
                      {"shards", shards},
                      {"status", failed.empty() ? "PASS" : "FAIL"},
                      {"failed", failed},
                      {"checks", detail::records_json(out.checks)},
                      {"results", out.results},
                      {"files", files}};
}

}  // namespace cfgspace::suites
