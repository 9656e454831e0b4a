#pragma once

// Consistency checks between the rate definitions, the closed forms, the
// truncated master equation and the simulator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sip/analytic.hpp"
#include "sip/exactsolve.hpp"
#include "sip/model.hpp"
#include "sip/report.hpp"
#include "sip/rng.hpp"

namespace sip {

/// Uniform occupations in 0..max_occupation.
inline Configuration random_configuration(Xoshiro256& rng, int sites, Occupation max_occupation) {
  Configuration cfg(static_cast<std::size_t>(sites));
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    cfg.set(i, static_cast<Occupation>(rng() % (std::uint64_t{max_occupation} + 1)));
  }
  return cfg;
}

inline std::vector<Configuration> random_configurations(std::uint64_t seed, int count, int sites,
                                                        Occupation max_occupation) {
  Xoshiro256 rng(seed);
  std::vector<Configuration> out;
  for (int k = 0; k < count; ++k) out.push_back(random_configuration(rng, sites, max_occupation));
  return out;
}

/// Bulk jumps: lambda(x,y)/lambda(y,x) = eta_i (m + eta_j) / ((eta_j + 1)(m + eta_i - 1)).
inline CheckResult check_rate_ratio(const ModelParams& p, const std::vector<Configuration>& configs) {
  double worst = 0.0;
  for (const auto& x : configs) {
    for_each_transition(x, p, [&](Move move, double forward) {
      if (!move.is_bulk()) return;
      const Configuration y = applied(move, x);
      const double backward = rate(reverse(move), y, p);
      const auto from = static_cast<std::size_t>(move.kind == TransitionKind::BulkRight ? move.bond : move.bond + 1);
      const auto to = static_cast<std::size_t>(move.kind == TransitionKind::BulkRight ? move.bond + 1 : move.bond);
      const double ei = x[from], ej = x[to], m = p.m();
      const double expected = ei * (m + ej) / ((ej + 1.0) * (m + ei - 1.0));
      worst = std::max(worst, std::abs(forward / backward - expected) / expected);
    });
  }
  return make_check("rate_ratio", worst, 1e-12, "bulk rate ratios, relative");
}

/// log(lambda(x,y)/lambda(y,x)) = U(x) - U(y) + F_eps(x,y) for perturbed_params(b, d, eps).
inline CheckResult check_local_detailed_balance(double b, double d, double eps, int sites, double m,
                                                const std::vector<Configuration>& configs) {
  const ModelParams p = perturbed_params(b, d, eps, sites, m);
  const double theta = b / d;
  double worst = 0.0;
  for (const auto& x : configs) {
    const double ux = thermodynamic_potential(theta, m, x);
    for_each_transition(x, p, [&](Move move, double forward) {
      const Configuration y = applied(move, x);
      const double lhs = std::log(forward / rate(reverse(move), y, p));
      const double rhs = ux - thermodynamic_potential(theta, m, y) + local_force(move, eps);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
    });
  }
  return make_check("local_detailed_balance", worst, 1e-10, "log rate ratio against U(x)-U(y)+F_eps");
}

/// L(sum_i c_i eta_i) = (b - d)(eta_1 - eta_N) pointwise, relative to max(1, |w_1|).
inline CheckResult check_generator_identity(const LinearCorrection& c, double b, double d, double m,
                                            const std::vector<Configuration>& configs) {
  double worst = 0.0;
  for (const auto& x : configs) {
    const ModelParams p = ModelParams::equilibrium(static_cast<int>(x.size()), m, b, d);
    const double lhs = generator_apply_linear(c, x, p);
    const double w1 = entropy_production_w1(x, b, d);
    worst = std::max(worst, std::abs(lhs - w1) / std::max(1.0, std::abs(w1)));
  }
  return make_check("generator_identity", worst, 1e-12, "L Phi = w1 on random configurations");
}

inline double max_abs_difference(const LinearCorrection& a, const LinearCorrection& b) {
  if (a.size() != b.size()) throw InvalidArgument("coefficient vectors differ in length");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline CheckResult check_mclennan_equals_leq(double b, double d, double m, int sites) {
  const double diff = max_abs_difference(mclennan_coefficients(b, d, m, sites).correction,
                                         leq_first_order_coefficients(b, d, m, sites));
  return make_check("mclennan_equals_leq", diff, 1e-12, "McLennan against LEQ first-order coefficients");
}

/// Largest per-edge relative violation of nu(x) lambda(x,y) = nu(y) lambda(y,x).
inline double detailed_balance_violation(const GeneratorMatrix& g, const Distribution& nu) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < g.matrix.outerSize(); ++x) {
    for (SparseRowMatrix::InnerIterator it(g.matrix, x); it; ++it) {
      const Eigen::Index y = it.col();
      if (y == x) continue;
      const double forward = nu[x] * it.value();
      const double backward = nu[y] * g.matrix.coeff(y, x);
      worst = std::max(worst, std::abs(forward - backward) / std::max(forward, backward));
    }
  }
  return worst;
}

inline CheckResult check_truncated_detailed_balance(const ModelParams& p, int n_max) {
  if (!p.is_equilibrium()) throw InvalidArgument("detailed balance holds only at equilibrium");
  const GeneratorMatrix g = build_generator(build_space(p.sites(), n_max), p);
  const StationaryResult st = stationary_distribution(g);
  return make_check("truncated_detailed_balance", detailed_balance_violation(g, st.distribution), 1e-10,
                    "edges of the box with n_max = " + std::to_string(n_max));
}

/// Max |Phi - sum_i c_i eta_i| over states with every eta_i <= limit.
inline double interior_deviation(const TruncatedSpace& space, const Eigen::VectorXd& phi, const LinearCorrection& c,
                                 Occupation limit) {
  double worst = 0.0;
  Configuration cfg(static_cast<std::size_t>(space.sites()));
  for (StateIndex k = 0; k < space.size(); ++k) {
    space.decode(k, cfg);
    const auto occ = cfg.occupations();
    if (*std::max_element(occ.begin(), occ.end()) > limit) continue;
    worst = std::max(worst, std::abs(phi[k] - c.apply(cfg)));
  }
  return worst;
}

}  // namespace sip
