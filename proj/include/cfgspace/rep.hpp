#pragma once

// Finite-rank realizations of U_m(psi) f(gamma) = rho^{1/2}(psi, gamma) f(psi^{-1} gamma)
// and of the twisted V^q_m(psi), with Monte-Carlo inner products and the
// unitarity, homomorphism and spherical-separation checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfgspace/poisson.hpp"

namespace cfgspace {

enum class DictionaryKind { constant, count_indicator, count, exp_linear, symmetric_poly };

inline std::string to_string(DictionaryKind k) {
  switch (k) {
    case DictionaryKind::constant: return "constant";
    case DictionaryKind::count_indicator: return "count_indicator";
    case DictionaryKind::count: return "count";
    case DictionaryKind::exp_linear: return "exp_linear";
    case DictionaryKind::symmetric_poly: return "symmetric_poly";
  }
  return "unknown";
}

/// A bounded symmetric function of a configuration.
template <class Space>
struct DictionaryFunction {
  using Point = typename Space::Point;

  DictionaryKind kind = DictionaryKind::constant;
  std::string name = "1";
  double value = 1.0;               // constant
  Region<Space> region;             // count_indicator, count
  std::size_t k = 0;                // count_indicator: N_A = k
  std::function<double(const Point&)> g;  // exp_linear: prod g(x)
  std::size_t power = 1;            // symmetric_poly: sum_x x_c^power
  std::size_t coordinate = 0;

  static DictionaryFunction constant(double c = 1.0) {
    DictionaryFunction f;
    f.value = c;
    f.name = "const(" + std::to_string(c) + ")";
    return f;
  }
  static DictionaryFunction count_indicator(Region<Space> a, std::size_t k, std::string label = "A") {
    DictionaryFunction f;
    f.kind = DictionaryKind::count_indicator;
    f.region = std::move(a);
    f.k = k;
    f.name = "1[N_" + label + "=" + std::to_string(k) + "]";
    return f;
  }
  static DictionaryFunction count(Region<Space> a, std::string label = "A") {
    DictionaryFunction f;
    f.kind = DictionaryKind::count;
    f.region = std::move(a);
    f.name = "N_" + label;
    return f;
  }
  static DictionaryFunction exp_linear(std::function<double(const Point&)> g, std::string label = "g") {
    DictionaryFunction f;
    f.kind = DictionaryKind::exp_linear;
    f.g = std::move(g);
    f.name = "prod " + label;
    return f;
  }
  /// Power sum over the points; p-adic coordinates enter through |x_c|.
  static DictionaryFunction symmetric_poly(std::size_t power, std::size_t coordinate = 0) {
    DictionaryFunction f;
    f.kind = DictionaryKind::symmetric_poly;
    f.power = power;
    f.coordinate = coordinate;
    f.name = "S_" + std::to_string(power);
    return f;
  }

  double operator()(const FiniteConfig<Space>& gamma) const {
    switch (kind) {
      case DictionaryKind::constant: return value;
      case DictionaryKind::count_indicator: return cfgspace::count(gamma, region) == k ? 1.0 : 0.0;
      case DictionaryKind::count: return static_cast<double>(cfgspace::count(gamma, region));
      case DictionaryKind::exp_linear: {
        double r = 1.0;
        for (const auto& x : gamma) r *= g(x);
        return r;
      }
      case DictionaryKind::symmetric_poly: {
        double s = 0.0;
        for (const auto& x : gamma) {
          double c;
          if constexpr (std::is_same_v<Space, RealSpace>) c = x.at(coordinate);
          else c = x.at(coordinate).abs();
          s += std::pow(c, static_cast<double>(power));
        }
        return s;
      }
    }
    return 0.0;
  }
};

enum class RepKind { trivial, sign, permutation };

inline std::string to_string(RepKind k) {
  switch (k) {
    case RepKind::trivial: return "trivial";
    case RepKind::sign: return "sign";
    case RepKind::permutation: return "permutation";
  }
  return "unknown";
}

/// q: Sigma_n -> U(W) for the trivial, sign and permutation representations.
/// The permutation representation sends e_j to e_{sigma(j)}.
struct SymmetricGroupRep {
  std::size_t n = 1;
  RepKind kind = RepKind::trivial;

  std::size_t dimension() const { return kind == RepKind::permutation ? n : 1; }

  Matrix<double> matrix(const Permutation& s) const {
    check(s);
    const std::size_t d = dimension();
    Matrix<double> m(d, std::vector<double>(d, 0.0));
    if (kind == RepKind::permutation) {
      for (std::size_t j = 0; j < n; ++j) m[s(j)][j] = 1.0;
    } else {
      m[0][0] = kind == RepKind::sign ? static_cast<double>(s.sign()) : 1.0;
    }
    return m;
  }
  std::vector<double> apply(const Permutation& s, const std::vector<double>& v) const {
    check(s);
    if (v.size() != dimension()) throw std::invalid_argument("vector does not live in the representation space");
    if (kind == RepKind::trivial) return v;
    if (kind == RepKind::sign) return {v[0] * static_cast<double>(s.sign())};
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) out[s(j)] = v[j];
    return out;
  }

 private:
  void check(const Permutation& s) const {
    if (s.size() != n) throw std::invalid_argument("permutation of the wrong degree");
  }
};

/// A W-valued function on n-point configurations: either a scalar dictionary
/// function (W = R) or the values of h at the ordered points s(gamma) (W = R^n).
template <class Space>
struct WFunction {
  std::optional<DictionaryFunction<Space>> scalar;
  std::function<double(const typename Space::Point&)> h;
  std::string name;

  static WFunction of_scalar(DictionaryFunction<Space> f) {
    WFunction w;
    w.name = f.name;
    w.scalar = std::move(f);
    return w;
  }
  static WFunction ordered_values(std::function<double(const typename Space::Point&)> h, std::string label = "h") {
    WFunction w;
    w.h = std::move(h);
    w.name = label + "(s(gamma))";
    return w;
  }

  std::vector<double> operator()(const FiniteConfig<Space>& g) const {
    if (scalar) return {(*scalar)(g)};
    std::vector<double> v;
    v.reserve(g.size());
    for (const auto& x : cross_section(g)) v.push_back(h(x));
    return v;
  }
};

/// U_m(psi) f(gamma) = rho_{P_m}^{1/2}(psi, gamma) f(psi^{-1} gamma).
template <class Space>
double apply_U(const PoissonLaw<Space>& law, const Transformation<Space>& psi, const DictionaryFunction<Space>& f,
               const FiniteConfig<Space>& gamma) {
  const double rho = rho_poisson(law, psi, gamma);
  if (rho == 1.0) return f(pull_back(psi, gamma));
  return std::sqrt(rho) * f(pull_back(psi, gamma));
}

/// V^q_m(psi) f(gamma) = rho_{m^n}^{1/2}(psi, gamma) q(sigma(psi, gamma)) f(psi^{-1} gamma).
template <class Space>
std::vector<double> apply_Vq(const PoissonLaw<Space>& law, const Transformation<Space>& psi,
                             const SymmetricGroupRep& q, const WFunction<Space>& f, const FiniteConfig<Space>& gamma) {
  if (gamma.size() != q.n) throw std::invalid_argument("configuration cardinality does not match the representation");
  const double rho = rho_poisson(law, psi, gamma);
  const Permutation sigma = cocycle(psi, gamma);
  std::vector<double> v = q.apply(sigma, f(pull_back(psi, gamma)));
  if (rho != 1.0)
    for (auto& c : v) c *= std::sqrt(rho);
  return v;
}

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
};

/// int f g dP_m by Monte Carlo.
template <class Space>
McEstimate mc_inner_product(const DictionaryFunction<Space>& f, const DictionaryFunction<Space>& g,
                            const PoissonLaw<Space>& law, std::size_t samples, Rng& rng) {
  if (samples == 0) throw std::invalid_argument("inner product needs at least one sample");
  RunningStats st;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto gamma = poisson_sample(law, rng);
    st.add(f(gamma) * g(gamma));
  }
  return {st.mean(), st.stderr_mean(), samples};
}

/// One line of a check report.
struct CheckRecord {
  std::string check;
  std::string witness;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::string verdict;  // PASS, FAIL, or a classification
  bool asserted = true;  // soft records never affect the exit status
};

inline bool all_pass(const std::vector<CheckRecord>& r) {
  return std::all_of(r.begin(), r.end(), [](const CheckRecord& c) { return !c.asserted || c.verdict != "FAIL"; });
}

namespace detail {

inline std::string pass_if(bool ok) { return ok ? "PASS" : "FAIL"; }

template <class Space>
constexpr bool exact_space = std::is_same_v<Space, PadicSpace>;

}  // namespace detail

/// <U f, U g> = <f, g> for every dictionary pair, by importance reweighting:
/// E[rho(psi, gamma) f g(psi^{-1} gamma)] - E[f g(gamma)] on paired samples.
/// For measure-preserving p-adic maps the per-sample identities
/// rho(psi, gamma) = 1 and rho(psi, psi gamma) rho(psi^{-1}, gamma) = 1 are also
/// checked exactly.
template <class Space>
std::vector<CheckRecord> unitarity_check(const PoissonLaw<Space>& law, const Transformation<Space>& psi,
                                         const std::vector<DictionaryFunction<Space>>& dictionary,
                                         std::size_t samples, Rng& rng) {
  if (!psi.preserves(law.window)) throw domain_error("transformation support exceeds the window");
  const std::size_t d = dictionary.size();
  std::vector<RunningStats> diff(d * d);
  bool per_sample_exact = true;
  double worst_cocycle = 0.0;
  const auto inv = psi.inverse();
  for (std::size_t s = 0; s < samples; ++s) {
    const auto gamma = poisson_sample(law, rng);
    const auto back = pull_back(psi, gamma);
    const double rho = rho_poisson(law, psi, gamma);
    const double pair = rho_poisson(law, psi, push_forward(psi, gamma)) * rho_poisson(law, inv, gamma);
    worst_cocycle = std::max(worst_cocycle, std::abs(pair - 1.0));
    if constexpr (detail::exact_space<Space>) per_sample_exact = per_sample_exact && pair == 1.0;
    std::vector<double> fb(d), fg(d);
    for (std::size_t i = 0; i < d; ++i) {
      fb[i] = dictionary[i](back);
      fg[i] = dictionary[i](gamma);
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) diff[i * d + j].add(rho * fb[i] * fb[j] - fg[i] * fg[j]);
  }
  std::vector<CheckRecord> out;
  const double tol = detail::exact_space<Space> ? 0.0 : 1e-9;
  out.push_back({"unitarity.rho_pair_identity", "rho(psi,psi g) rho(psi^-1,g) = 1", worst_cocycle, 0.0,
                 detail::pass_if(detail::exact_space<Space> ? per_sample_exact : worst_cocycle <= tol)});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      const auto& st = diff[i * d + j];
      const bool ok = std::abs(st.mean()) <= 3.0 * st.stderr_mean() || std::abs(st.mean()) <= 1e-12;
      out.push_back({"unitarity.inner_product", dictionary[i].name + " , " + dictionary[j].name, st.mean(),
                     st.stderr_mean(), detail::pass_if(ok)});
    }
  return out;
}

/// U(psi phi) f = U(psi) U(phi) f pointwise, and the cocycle law
/// sigma(psi phi, g) = sigma(psi, g) sigma(phi, psi^{-1} g), on sampled
/// configurations; exact for p-adic maps, relative 1e-9 for real ones.
template <class Space>
std::vector<CheckRecord> homomorphism_check(const PoissonLaw<Space>& law, const Transformation<Space>& psi,
                                            const Transformation<Space>& phi,
                                            const std::vector<DictionaryFunction<Space>>& dictionary,
                                            std::size_t samples, Rng& rng, std::size_t twist_n = 2) {
  const auto both = compose(psi, phi);
  const double tol = detail::exact_space<Space> ? 0.0 : 1e-9;
  double worst_u = 0.0;
  bool cocycle_ok = true;
  bool twist_ok = true;
  std::size_t cocycle_cases = 0;
  const std::vector<SymmetricGroupRep> reps{{twist_n, RepKind::trivial},
                                            {twist_n, RepKind::sign},
                                            {twist_n, RepKind::permutation}};
  const auto ordered = WFunction<Space>::ordered_values([](const typename Space::Point& x) {
    if constexpr (std::is_same_v<Space, RealSpace>) return x[0];
    else return x[0].abs();
  });
  const auto scalar = WFunction<Space>::of_scalar(DictionaryFunction<Space>::symmetric_poly(1));
  for (std::size_t s = 0; s < samples; ++s) {
    const auto gamma = poisson_sample(law, rng);
    const auto back = pull_back(psi, gamma);
    for (const auto& f : dictionary) {
      const double lhs = apply_U(law, both, f, gamma);
      const double rhs = std::sqrt(rho_poisson(law, psi, gamma)) * apply_U(law, phi, f, back);
      const double err = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
      worst_u = std::max(worst_u, err);
    }
    if (gamma.size() >= 1) {
      ++cocycle_cases;
      const Permutation a = cocycle(both, gamma);
      const Permutation b = cocycle(psi, gamma) * cocycle(phi, back);
      cocycle_ok = cocycle_ok && a == b;
    }
    // V^q on a fixed-count configuration
    const auto fixed = fixed_count_sample(law.base, law.window, twist_n, rng);
    const auto fixed_back = pull_back(psi, fixed);
    for (const auto& q : reps) {
      const auto& wf = q.kind == RepKind::permutation ? ordered : scalar;
      const auto lhs = apply_Vq(law, both, q, wf, fixed);
      auto inner = apply_Vq(law, phi, q, wf, fixed_back);
      const double r = rho_poisson(law, psi, fixed);
      auto rhs = q.apply(cocycle(psi, fixed), inner);
      for (auto& c : rhs) c *= std::sqrt(r);
      for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double err = std::abs(lhs[i] - rhs[i]) / std::max(1.0, std::abs(lhs[i]));
        twist_ok = twist_ok && err <= tol;
      }
    }
  }
  return {
      {"homomorphism.U", "U(psi phi) = U(psi) U(phi)", worst_u, 0.0, detail::pass_if(worst_u <= tol)},
      {"homomorphism.cocycle", "sigma(psi phi,g) = sigma(psi,g) sigma(phi,psi^-1 g)",
       static_cast<double>(cocycle_cases), 0.0, detail::pass_if(cocycle_ok)},
      {"homomorphism.Vq", "trivial, sign, permutation", 0.0, 0.0, detail::pass_if(twist_ok)},
  };
}

/// <U(psi) f_0, f_0> with f_0 = 1, i.e. E[rho^{1/2}(psi, gamma)].
template <class Space>
McEstimate matrix_coefficient_f0(const PoissonLaw<Space>& law, const Transformation<Space>& psi, std::size_t samples,
                                 Rng& rng) {
  const auto one = DictionaryFunction<Space>::constant(1.0);
  RunningStats st;
  for (std::size_t s = 0; s < samples; ++s) st.add(apply_U(law, psi, one, poisson_sample(law, rng)));
  return {st.mean(), st.stderr_mean(), samples};
}

struct DiscriminatorRow {
  std::string name;
  double integral = 0.0;  // int (rho^{1/2} - 1) dm at intensity 1
  double u1_quad = 1.0, u2_quad = 1.0;
  double u1_mc = 1.0, u1_stderr = 0.0;
  double u2_mc = 1.0, u2_stderr = 0.0;
  double separation = 0.0;     // |u1 - u2| by quadrature
  double separation_mc = 0.0;  // |u1 - u2| by Monte Carlo
  double combined_stderr = 0.0;
  bool separated = false;
};

struct DiscriminatorReport {
  std::vector<DiscriminatorRow> rows;
  std::optional<std::size_t> witness;  // row with the largest separation
  bool separated = false;
  bool no_witness_possible = false;  // every psi has rho = 1
};

/// u_{lambda_1 m}(psi) against u_{lambda_2 m}(psi) for each candidate psi.
template <class Space>
DiscriminatorReport spherical_discriminator(const PoissonLaw<Space>& law, double lambda1, double lambda2,
                                            const std::vector<std::pair<std::string, Transformation<Space>>>& psis,
                                            std::size_t samples, Rng& rng) {
  DiscriminatorReport rep;
  double best = -1.0;
  bool any_nontrivial = false;
  for (std::size_t i = 0; i < psis.size(); ++i) {
    const auto& [name, psi] = psis[i];
    DiscriminatorRow row;
    row.name = name;
    const auto l1 = law.with_scale(lambda1), l2 = law.with_scale(lambda2);
    row.integral = rho_half_integral(law.base, psi, law.window);
    row.u1_quad = spherical_function(l1, psi, SphericalMode::quadrature).value;
    row.u2_quad = spherical_function(l2, psi, SphericalMode::quadrature).value;
    row.separation = std::abs(row.u1_quad - row.u2_quad);
    if (samples > 0) {
      const auto m1 = spherical_function(l1, psi, SphericalMode::monte_carlo, samples, &rng);
      const auto m2 = spherical_function(l2, psi, SphericalMode::monte_carlo, samples, &rng);
      row.u1_mc = m1.value;
      row.u1_stderr = m1.stderr_;
      row.u2_mc = m2.value;
      row.u2_stderr = m2.stderr_;
      row.separation_mc = std::abs(m1.value - m2.value);
      row.combined_stderr = std::hypot(m1.stderr_, m2.stderr_);
      row.separated = row.separation_mc > 3.0 * row.combined_stderr && row.separation > 0.0;
    } else {
      row.separated = row.separation > 1e-9;
    }
    if (row.integral != 0.0) any_nontrivial = true;
    if (row.separation > best) {
      best = row.separation;
      rep.witness = i;
    }
    rep.rows.push_back(row);
  }
  rep.no_witness_possible = !any_nontrivial;
  if (rep.no_witness_possible) rep.witness.reset();
  rep.separated = rep.witness && rep.rows[*rep.witness].separated;
  return rep;
}

}  // namespace cfgspace
