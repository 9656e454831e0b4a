#pragma once

// Run configuration: model parameters in either the (b, d, eps) form or the
// explicit four-rate form, plus solver and simulation settings.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "sip/analytic.hpp"
#include "sip/error.hpp"
#include "sip/exactsolve.hpp"
#include "sip/kmc.hpp"
#include "sip/model.hpp"

namespace sip {

inline constexpr double kDefaultB = 1.0;
inline constexpr double kDefaultD = 2.0;
inline constexpr StateIndex kDefaultStateBudget = 100'000;

struct RunConfig {
  int sites = 3;
  double m = 1.0;
  std::optional<double> b, d, eps;
  std::optional<double> b1, d1, bN, dN;
  std::optional<int> n_max;
  double total_time = 1e4;
  std::optional<double> burn_in;
  int replicas = 4;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  unsigned threads = 0;
  std::string out;
  std::string format = "csv";

  bool explicit_rates() const { return b1 || d1 || bN || dN; }

  /// Throws unless exactly one parameter form is in use and all values are valid.
  void validate() const {
    if (explicit_rates()) {
      if (b || d || eps) throw InvalidArgument("give either --b/--d/--eps or --b1/--d1/--bN/--dN, not both");
      if (!(b1 && d1 && bN && dN)) throw InvalidArgument("explicit rates need all of --b1 --d1 --bN --dN");
    }
    (void)params();
    if (n_max && *n_max < 1) throw InvalidArgument("--nmax must be at least 1");
    if (replicas < 1) throw InvalidArgument("--replicas must be at least 1");
    if (!(total_time > 0.0) || !std::isfinite(total_time)) throw InvalidArgument("--time must be positive");
    if (burn_in && (!(*burn_in >= 0.0) || *burn_in >= total_time)) {
      throw InvalidArgument("--burnin must lie in [0, time)");
    }
    if (format != "csv" && format != "json") throw InvalidArgument("--format must be csv or json");
  }

  double b_value() const { return b.value_or(kDefaultB); }
  double d_value() const { return d.value_or(kDefaultD); }
  double eps_value() const { return eps.value_or(0.0); }

  ModelParams params() const {
    if (explicit_rates()) return ModelParams(sites, m, {*b1, *d1}, {*bN, *dN});
    return perturbed_params(b_value(), d_value(), eps_value(), sites, m);
  }

  /// Equilibrium parameters (b, d) around which the expansions are taken.
  ModelParams reference_params() const {
    if (explicit_rates()) throw InvalidArgument("this command needs the --b/--d/--eps parameter form");
    return ModelParams::equilibrium(sites, m, b_value(), d_value());
  }

  double burn_in_value() const { return burn_in.value_or(std::min(default_burn_in(params()), 0.5 * total_time)); }
};

/// Box size for exact solves: the configured override, else the single-site
/// 1e-12 quantile at the largest reservoir fugacity, doubled when the
/// reservoirs differ, but never beyond the state budget unless the undoubled
/// cap already exceeds it.
inline int choose_nmax(const RunConfig& c, StateIndex budget = kDefaultStateBudget) {
  if (c.n_max) return *c.n_max;
  const ModelParams p = c.params();
  if (!p.has_finite_density()) throw InvalidArgument("exact solves need b1 < d1 and bN < dN");
  const double theta = std::max(p.b1() / p.d1(), p.bN() / p.dN());
  const int base = default_nmax(theta, p.m(), false);
  if (p.is_equilibrium()) return base;
  int cap = 1;
  while (true) {
    double states = 1.0;
    for (int i = 0; i < p.sites(); ++i) states *= cap + 2;
    if (states > static_cast<double>(budget)) break;
    ++cap;
  }
  return std::max(base, std::min(2 * base, cap));
}

}  // namespace sip
