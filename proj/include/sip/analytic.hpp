#pragma once

// Closed-form stationary quantities: equilibrium marginals, density
// profiles, local-equilibrium expansion and the McLennan coefficients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "sip/error.hpp"
#include "sip/model.hpp"

namespace sip {

namespace detail {

inline void require_fugacity(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw InvalidArgument("theta must lie in (0, 1)");
}

inline void require_subcritical(double b, double d) {
  if (!(b > 0.0 && d > 0.0)) throw InvalidArgument("b and d must be positive");
  if (!(b < d)) throw InvalidArgument("finite density requires b < d");
}

inline double checked_ratio(double num, double den, const char* what) {
  const double scale = std::max(std::abs(num), 1.0);
  if (!std::isfinite(den) || std::abs(den) <= 1e-14 * scale) {
    throw DegenerateDenominator(what);
  }
  return num / den;
}

}  // namespace detail

/// log gamma_theta(n) = n log theta + log Gamma(m+n) - log n! - log Gamma(m) + m log(1-theta).
inline double log_marginal_pmf(double theta, double m, unsigned long n) {
  detail::require_fugacity(theta);
  if (!(m > 0.0)) throw InvalidArgument("m must be positive");
  const double x = static_cast<double>(n);
  return x * std::log(theta) + std::lgamma(m + x) - std::lgamma(x + 1.0) - std::lgamma(m) +
         m * std::log1p(-theta);
}

inline double marginal_pmf(double theta, double m, unsigned long n) {
  return std::exp(log_marginal_pmf(theta, m, n));
}

/// Z_theta = (1 - theta)^{-m}.
inline double partition_function(double theta, double m) {
  detail::require_fugacity(theta);
  return std::pow(1.0 - theta, -m);
}

/// V(n) = -log gamma(n).
inline double single_site_potential(double theta, double m, unsigned long n) {
  detail::require_fugacity(theta);
  const double x = static_cast<double>(n);
  return -x * std::log(theta) - m * std::log1p(-theta) + std::lgamma(x + 1.0) -
         (std::lgamma(m + x) - std::lgamma(m));
}

/// U(x) = sum_i V(eta_i).
inline double thermodynamic_potential(double theta, double m, const Configuration& cfg) {
  double u = 0.0;
  for (auto n : cfg.occupations()) u += single_site_potential(theta, m, n);
  return u;
}

inline double mean_occupancy(double theta, double m) {
  if (theta == 0.0) return 0.0;
  detail::require_fugacity(theta);
  return m * theta / (1.0 - theta);
}

inline double theta_from_density(double rho, double m) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidArgument("density must be positive");
  if (!(m > 0.0)) throw InvalidArgument("m must be positive");
  return rho / (m + rho);
}

/// Smallest n such that P(eta > n) < tail under gamma_theta.
inline unsigned long marginal_quantile(double theta, double m, double tail) {
  detail::require_fugacity(theta);
  if (!(tail > 0.0 && tail < 1.0)) throw InvalidArgument("tail must lie in (0, 1)");
  // Tabulate until the terms are decreasing and negligible, then sum tails backwards.
  std::vector<double> pmf{marginal_pmf(theta, m, 0)};
  for (unsigned long k = 0;; ++k) {
    const double next = pmf.back() * theta * (m + k) / (k + 1.0);
    pmf.push_back(next);
    if (k + 1 > m && next < tail * 1e-6 * (1.0 - theta)) break;
  }
  double suffix = 0.0;
  unsigned long answer = pmf.size() - 1;
  for (std::size_t k = pmf.size() - 1; k > 0; --k) {
    suffix += pmf[k];  // P(eta >= k)
    if (suffix >= tail) break;
    answer = static_cast<unsigned long>(k - 1);
  }
  return answer;
}

/// rho_i = alpha + beta * i with i one-based.
struct DensityProfile {
  double alpha;
  double beta;

  double density(int site_one_based) const { return alpha + beta * site_one_based; }
  std::vector<double> densities(int sites) const {
    std::vector<double> out(static_cast<std::size_t>(sites));
    for (int i = 0; i < sites; ++i) out[static_cast<std::size_t>(i)] = density(i + 1);
    return out;
  }
};

/// Exact linear profile for arbitrary reservoir rates.
inline DensityProfile density_profile_general(const ModelParams& p) {
  const double b1 = p.b1(), d1 = p.d1(), bN = p.bN(), dN = p.dN(), m = p.m();
  const double n = p.sites();
  const double den = (bN - dN) * (b1 - d1) * n + (dN + d1 - bN - b1) * m + (b1 - d1) * (dN - bN);
  const double alpha_num = b1 * (dN - bN) * m * n + (bN + b1) * m * m + bN * (b1 - d1) * m;
  const double beta_num = (bN * d1 - b1 * dN) * m;
  const double scale = std::max({std::abs(alpha_num), std::abs(beta_num), 1.0});
  if (!std::isfinite(den) || std::abs(den) <= 1e-14 * scale) {
    throw DegenerateDenominator("density profile denominator vanishes for these reservoir rates");
  }
  return {alpha_num / den, beta_num / den};
}

/// D = (d-b)^2 N + 2(d-b) m - (d-b)^2.
inline double weak_profile_denominator(double b, double d, double m, int sites) {
  const double g = d - b;
  return g * g * sites + 2.0 * g * m - g * g;
}

/// First-order expansion in eps of the profile under perturbed_params.
inline DensityProfile density_profile_weak(double b, double d, double m, int sites, double eps) {
  detail::require_subcritical(b, d);
  if (sites < 2) throw InvalidArgument("N must be at least 2");
  const double den = weak_profile_denominator(b, d, m, sites);
  return {b * m / (d - b) + b * d * m * (sites + 1) * eps / den, -2.0 * b * d * m * eps / den};
}

/// Slope beta of the profile, which is the stationary expectation of
/// J_i = eta_{i+1} - eta_i. A negative value means particles flow toward
/// increasing site index at rate -beta per unit time.
inline double stationary_current(const ModelParams& p) { return density_profile_general(p).beta; }

/// log nu_LEQ(cfg) = sum_i log gamma_{theta_i}(eta_i).
inline double leq_log_weight(std::span<const double> theta_profile, double m,
                             const Configuration& cfg) {
  if (theta_profile.size() != cfg.size()) {
    throw InvalidArgument("theta profile length does not match configuration");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    total += log_marginal_pmf(theta_profile[i], m, cfg[i]);
  }
  return total;
}

/// Per-site exponent weights c_i of exp(eps * sum_i c_i eta_i), stored zero-based.
struct LinearCorrection {
  std::vector<double> coefficients;

  std::size_t size() const noexcept { return coefficients.size(); }
  double operator[](std::size_t i) const { return coefficients[i]; }

  double apply(const Configuration& cfg) const {
    double s = 0.0;
    for (std::size_t i = 0; i < cfg.size(); ++i) s += coefficients[i] * cfg[i];
    return s;
  }

  /// Change of apply() under one move, without forming both sums.
  double increment(Move move) const {
    const auto i = static_cast<std::size_t>(move.bond);
    switch (move.kind) {
      case TransitionKind::BulkRight: return coefficients[i + 1] - coefficients[i];
      case TransitionKind::BulkLeft: return coefficients[i] - coefficients[i + 1];
      case TransitionKind::BirthLeft: return coefficients.front();
      case TransitionKind::DeathLeft: return -coefficients.front();
      case TransitionKind::BirthRight: return coefficients.back();
      case TransitionKind::DeathRight: return -coefficients.back();
    }
    return 0.0;
  }
};

/// (L sum_i c_i eta_i)(cfg), summed from per-move increments.
inline double generator_apply_linear(const LinearCorrection& c, const Configuration& cfg, const ModelParams& p) {
  p.check(cfg);
  if (c.size() != cfg.size()) throw InvalidArgument("coefficient count does not match site count");
  double sum = 0.0;
  for_each_transition(cfg, p, [&](Move move, double r) { sum += r * c.increment(move); });
  return sum;
}

/// First-order expansion of the local-equilibrium measure around theta_0 = b/d.
struct LeqExpansion {
  double rho0;                  // equilibrium density, the same on every site
  std::vector<double> rho1;     // d rho_i / d eps at eps = 0
  double theta0;
  std::vector<double> theta1;   // d theta_i / d eps at eps = 0
  LinearCorrection correction;  // c_i = theta1_i / theta0
};

inline LeqExpansion leq_expansion(double b, double d, double m, int sites) {
  detail::require_subcritical(b, d);
  if (sites < 2) throw InvalidArgument("N must be at least 2");
  const double den = weak_profile_denominator(b, d, m, sites);
  if (den <= 0.0) throw DegenerateDenominator("weak profile denominator is not positive");
  LeqExpansion out;
  out.rho0 = b * m / (d - b);
  out.theta0 = out.rho0 / (m + out.rho0);
  const auto n = static_cast<std::size_t>(sites);
  out.rho1.resize(n);
  out.theta1.resize(n);
  out.correction.coefficients.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double i = static_cast<double>(k + 1);
    out.rho1[k] = b * d * m * (sites + 1) / den - 2.0 * b * d * m * i / den;
    out.theta1[k] = m * out.rho1[k] / ((m + out.rho0) * (m + out.rho0));
    out.correction.coefficients[k] = out.theta1[k] / out.theta0;
  }
  return out;
}

/// c_i of nu_LEQ = nu_EQ exp(eps sum_i c_i eta_i) + O(eps^2), obtained from the
/// first-order density profile through theta = rho / (m + rho).
inline LinearCorrection leq_first_order_coefficients(double b, double d, double m, int sites) {
  return leq_expansion(b, d, m, sites).correction;
}

/// Closed form (N + 1 - 2i) / (N - 1 + 2m/(d-b)) of the same coefficients.
inline LinearCorrection leq_closed_form_coefficients(double b, double d, double m, int sites) {
  detail::require_subcritical(b, d);
  const double den = sites - 1 + 2.0 * m / (d - b);
  LinearCorrection out;
  out.coefficients.resize(static_cast<std::size_t>(sites));
  for (int i = 1; i <= sites; ++i) {
    out.coefficients[static_cast<std::size_t>(i - 1)] = (sites + 1 - 2.0 * i) / den;
  }
  return out;
}

/// d/d eps of sum_i log Z_{theta_i(eps)} at eps = 0. Vanishes because sum_i theta1_i = 0.
inline double leq_log_normalizer_derivative(const LeqExpansion& leq, double m) {
  double s = 0.0;
  for (double t1 : leq.theta1) s += m * t1 / (1.0 - leq.theta0);
  return s;
}

/// c_i = A + B i solving L(sum_i c_i eta_i) = (b - d)(eta_1 - eta_N) at equilibrium.
struct McLennanCoefficients {
  double A;
  double B;
  LinearCorrection correction;
};

inline McLennanCoefficients mclennan_coefficients(double b, double d, double m, int sites) {
  if (!(b > 0.0 && d > 0.0 && m > 0.0)) throw InvalidArgument("b, d, m must be positive");
  if (sites < 2) throw InvalidArgument("N must be at least 2");
  if (b == d) throw DegenerateDenominator("McLennan coefficients need b != d");
  const double den = sites - 1 - 2.0 * m / (b - d);
  McLennanCoefficients out;
  out.A = detail::checked_ratio(sites + 1.0, den, "McLennan denominator vanishes");
  out.B = -2.0 / den;
  out.correction.coefficients.resize(static_cast<std::size_t>(sites));
  for (int i = 1; i <= sites; ++i) {
    out.correction.coefficients[static_cast<std::size_t>(i - 1)] = out.A + out.B * i;
  }
  return out;
}

/// Specialisation d = b + m: c_i = 1 - 2i/(N+1).
inline LinearCorrection extra_boundary_site_coefficients(int sites) {
  LinearCorrection out;
  out.coefficients.resize(static_cast<std::size_t>(sites));
  for (int i = 1; i <= sites; ++i) {
    out.coefficients[static_cast<std::size_t>(i - 1)] = 1.0 - 2.0 * i / (sites + 1.0);
  }
  return out;
}

}  // namespace sip
