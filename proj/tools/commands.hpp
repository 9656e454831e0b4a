#pragma once

// Subcommand implementations. Each returns a Report; the front end only
// handles argument parsing and output.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sip/analytic.hpp"
#include "sip/config.hpp"
#include "sip/exactsolve.hpp"
#include "sip/kmc.hpp"
#include "sip/model.hpp"
#include "sip/report.hpp"
#include "sip/verify.hpp"

namespace sip::cli {

inline constexpr const char* kVersion = "0.1.0";

struct CommandOptions {
  bool exact = false;         // add the exact-solver column
  bool kmc = false;           // add the simulation columns
  bool dyson = false;         // solve: append the expansion summary
  int dyson_order = 2;
  bool finite_difference = true;
  std::vector<double> fd_eps{0.01, 0.02};
  bool statistical_checks = false;  // simulate: compare against the closed forms
  double corrupt_c1 = 0.0;          // added to c_1 in the generator check
  int random_configs = 200;
  int max_occupation = 20;
};

namespace detail {

inline Report start_report(const std::string& command, const RunConfig& c) {
  Report r;
  r.command = command;
  const ModelParams p = c.params();
  r.params = {{"N", p.sites()}, {"m", p.m()}, {"b1", p.b1()}, {"d1", p.d1()}, {"bN", p.bN()}, {"dN", p.dN()}};
  if (!c.explicit_rates()) {
    r.params["b"] = c.b_value();
    r.params["d"] = c.d_value();
    r.params["eps"] = c.eps_value();
  }
  r.notes["version"] = kVersion;
  for (int i = 1; i <= p.sites(); ++i) r.rows.push_back(ReportRow{i});
  return r;
}

inline void add_bond_rows(Report& r, int sites) {
  if (!r.bonds.empty()) return;
  for (int i = 1; i < sites; ++i) r.bonds.push_back(BondRow{i});
}

inline std::optional<DensityProfile> try_general_profile(const ModelParams& p) {
  if (!p.has_finite_density()) return std::nullopt;
  try {
    return density_profile_general(p);
  } catch (const DegenerateDenominator&) {
    return std::nullopt;
  }
}

inline void add_profile_scalars(Report& r, const DensityProfile& prof, double m, const std::string& prefix = "") {
  r.scalars[prefix + "alpha"] = prof.alpha;
  r.scalars[prefix + "beta"] = prof.beta;
  r.scalars[prefix + "current_left_to_right"] = 0.0 - m * prof.beta;
}

inline void fill_analytic(Report& r, const DensityProfile& prof) {
  for (auto& row : r.rows) row.analytic = prof.density(row.site);
}

/// Exact stationary solve on the configured box; fills the exact column.
inline StationaryResult add_exact(Report& r, const GeneratorMatrix& g) {
  StationaryResult st = stationary_distribution(g);
  const auto means = site_means(g.space, st.distribution);
  for (auto& row : r.rows) row.exact = means[static_cast<std::size_t>(row.site - 1)];
  r.scalars["n_max"] = g.space.n_max();
  r.scalars["states"] = static_cast<double>(g.size());
  r.scalars["stationary_residual"] = st.residual;
  r.scalars["dropped_rate"] = weighted_dropped_rate(g, st.distribution);
  return st;
}

inline GeneratorMatrix build_box(const RunConfig& c) {
  const ModelParams p = c.params();
  return build_generator(build_space(p.sites(), choose_nmax(c)), p);
}

inline SimEstimates add_kmc(Report& r, const RunConfig& c) {
  const ModelParams p = c.params();
  SimOptions options;
  options.threads = c.threads;
  const SimEstimates sim =
      run_simulation(p, c.total_time, c.burn_in_value(), c.replicas, RngStream{c.seed, c.stream}, options);
  for (auto& row : r.rows) {
    const Estimate& e = sim.density[static_cast<std::size_t>(row.site - 1)];
    row.kmc = e.mean;
    row.kmc_stderr = e.std_error;
  }
  add_bond_rows(r, p.sites());
  for (auto& bond : r.bonds) {
    const Estimate& e = sim.bond_current[static_cast<std::size_t>(bond.bond - 1)];
    bond.kmc = e.mean;
    bond.kmc_stderr = e.std_error;
  }
  r.scalars["kmc_w1"] = sim.w1.mean;
  r.scalars["kmc_w1_stderr"] = sim.w1.std_error;
  r.scalars["kmc_events"] = static_cast<double>(sim.events);
  r.scalars["kmc_total_time"] = sim.total_time;
  r.scalars["kmc_burn_in"] = sim.burn_in;
  r.scalars["kmc_replicas"] = sim.replicas;
  r.scalars["kmc_batches"] = static_cast<double>(sim.w1.batches);
  r.params["seed"] = static_cast<double>(c.seed);
  r.params["stream"] = static_cast<double>(c.stream);
  return sim;
}

/// Largest pairwise |J_a - J_b| / sqrt(se_a^2 + se_b^2) over bonds.
inline double current_spread_z(const std::vector<Estimate>& currents) {
  double worst = 0.0;
  for (std::size_t a = 0; a < currents.size(); ++a) {
    for (std::size_t b = a + 1; b < currents.size(); ++b) {
      const double se = std::hypot(currents[a].std_error, currents[b].std_error);
      const double diff = std::abs(currents[a].mean - currents[b].mean);
      worst = std::max(worst, se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : INFINITY));
    }
  }
  return worst;
}

inline LinearCorrection corrupted(LinearCorrection c, double delta) {
  if (delta != 0.0) c.coefficients.at(0) += delta;
  return c;
}

/// Expansion diagnostics on the equilibrium box; appends scalars and checks.
inline void add_dyson(Report& r, const RunConfig& c, const CommandOptions& o, int n_max) {
  const ModelParams p0 = c.reference_params();
  const double b = c.b_value(), d = c.d_value(), m = p0.m();
  const GeneratorMatrix g0 = build_generator(build_space(p0.sites(), n_max), p0);
  const DysonExpansion expansion(g0);
  const int order = std::max(1, o.dyson_order);
  const std::vector<DysonTerm> terms = expansion.terms(order);

  r.scalars["dyson_n_max"] = n_max;
  r.scalars["dyson_states"] = static_cast<double>(g0.size());
  r.scalars["gamma_identity_residual"] = expansion.gamma_identity_residual();
  r.checks.push_back(make_check("gamma_identity", expansion.gamma_identity_residual(), 1e-10,
                                "rho0^-1 Gamma* rho0 = (b-d)(eta_N - eta_1) off the faces"));
  for (const auto& t : terms) {
    const std::string k = std::to_string(t.order);
    r.scalars["h" + k + "_projection"] = t.projection;
    r.scalars["h" + k + "_residual"] = t.residual;
    r.scalars["h" + k + "_mean"] = expectation(t.h, expansion.reference());
    r.checks.push_back(make_check("h" + k + "_gauge", std::abs(expectation(t.h, expansion.reference())), 1e-10,
                                  "<h_k>_rho0 = 0"));
  }

  const Eigen::VectorXd w1 = entropy_production_on_box(g0);
  const PoissonSolution poisson = expansion.solver().solve(w1);
  const double h1_vs_poisson = (terms[0].h - poisson.phi).cwiseAbs().maxCoeff();
  r.scalars["h1_vs_poisson"] = h1_vs_poisson;
  r.checks.push_back(make_check("dyson_equals_poisson", h1_vs_poisson, 1e-10, "h1 against L0^-1 w1 on the box"));

  const LinearCorrection coeff = mclennan_coefficients(b, d, m, p0.sites()).correction;
  const auto quarter = static_cast<Occupation>(n_max / 4);
  r.scalars["h1_vs_linear_interior"] = interior_deviation(g0.space, terms[0].h, coeff, quarter);
  r.notes["h1_vs_linear_interior"] = "max |h1 - sum c_i eta_i| over states with max eta_i <= n_max/4";

  if (o.finite_difference && o.fd_eps.size() == 2) {
    std::vector<std::vector<double>> errors(static_cast<std::size_t>(order));
    for (double eps : o.fd_eps) {
      const ModelParams pe = perturbed_params(b, d, eps, p0.sites(), m);
      const GeneratorMatrix ge = build_generator(g0.space, pe);
      const StationaryResult st = stationary_distribution(ge);
      for (int k = 1; k <= order; ++k) {
        errors[static_cast<std::size_t>(k - 1)].push_back(
            expansion.truncation_error(st.distribution, terms, eps, k));
      }
    }
    r.series["fd_eps"] = o.fd_eps;
    for (int k = 1; k <= order; ++k) {
      const auto& e = errors[static_cast<std::size_t>(k - 1)];
      const std::string key = "fd_error_order" + std::to_string(k);
      r.series[key] = e;
      const double ratio = e[1] / e[0];
      const double expected = std::pow(o.fd_eps[1] / o.fd_eps[0], k);
      r.scalars["fd_ratio_order" + std::to_string(k)] = ratio;
      r.checks.push_back(make_check("fd_ratio_order" + std::to_string(k), std::abs(ratio - expected),
                                    0.1 * expected, "error ratio against " + format_double(expected)));
    }
  }
}

}  // namespace detail

inline Report cmd_profile(const RunConfig& c, const CommandOptions& o = {}) {
  c.validate();
  Report r = detail::start_report("profile", c);
  const ModelParams p = c.params();
  if (!c.explicit_rates() && c.b_value() < c.d_value()) {
    const DensityProfile weak = density_profile_weak(c.b_value(), c.d_value(), p.m(), p.sites(), c.eps_value());
    detail::fill_analytic(r, weak);
    detail::add_profile_scalars(r, weak, p.m());
    const LinearCorrection coeff = leq_first_order_coefficients(c.b_value(), c.d_value(), p.m(), p.sites());
    for (auto& row : r.rows) row.coefficient = coeff[static_cast<std::size_t>(row.site - 1)];
    r.notes["analytic_density"] = "first order in eps";
    if (auto general = detail::try_general_profile(p)) detail::add_profile_scalars(r, *general, p.m(), "exact_in_eps_");
  } else {
    const DensityProfile general = density_profile_general(p);
    detail::fill_analytic(r, general);
    detail::add_profile_scalars(r, general, p.m());
    r.notes["analytic_density"] = "exact linear profile";
  }
  r.notes["sign_convention"] =
      "beta is the slope of rho_i = alpha + beta i, i.e. <eta_{i+1} - eta_i>; "
      "current_left_to_right = -m beta counts particles per unit time toward increasing i";
  detail::add_bond_rows(r, p.sites());
  for (auto& bond : r.bonds) bond.analytic = r.scalars.at("current_left_to_right");
  if (o.exact) detail::add_exact(r, detail::build_box(c));
  if (o.kmc) detail::add_kmc(r, c);
  return r;
}

inline Report cmd_equilibrium(const RunConfig& c, const CommandOptions& o = {}) {
  c.validate();
  Report r = detail::start_report("equilibrium", c);
  const ModelParams p = c.params();
  if (!p.is_equilibrium()) throw InvalidArgument("equilibrium needs b1/d1 == bN/dN");
  if (!p.has_finite_density()) throw InvalidArgument("equilibrium marginals need b < d");
  const double theta = p.b1() / p.d1(), m = p.m();
  const double rho = mean_occupancy(theta, m);
  r.scalars["theta0"] = theta;
  r.scalars["mean_occupancy"] = rho;
  r.scalars["partition_function"] = partition_function(theta, m);
  const auto quantile = marginal_quantile(theta, m, 1e-12);
  r.scalars["tail_quantile_1e-12"] = static_cast<double>(quantile);
  auto& pmf = r.series["marginal_pmf"];
  auto& potential = r.series["single_site_potential"];
  for (unsigned long n = 0; n <= quantile; ++n) {
    pmf.push_back(marginal_pmf(theta, m, n));
    potential.push_back(single_site_potential(theta, m, n));
  }
  for (auto& row : r.rows) row.analytic = rho;
  if (o.exact) {
    const GeneratorMatrix g = detail::build_box(c);
    const StationaryResult st = detail::add_exact(r, g);
    const Distribution product = product_measure(g.space, theta, m);
    const double diff = (st.distribution.probabilities - product.probabilities).cwiseAbs().maxCoeff();
    r.scalars["max_state_deviation_from_product"] = diff;
    r.checks.push_back(make_check("product_measure", diff, 1e-10, "per-state |nu - prod gamma|"));
    r.checks.push_back(make_check("detailed_balance", detailed_balance_violation(g, st.distribution), 1e-10));
  }
  if (o.kmc) detail::add_kmc(r, c);
  return r;
}

inline Report cmd_mclennan(const RunConfig& c, const CommandOptions& o = {}) {
  c.validate();
  Report r = detail::start_report("mclennan", c);
  const ModelParams p0 = c.reference_params();
  const double b = c.b_value(), d = c.d_value(), m = p0.m();
  const int n = p0.sites();
  const McLennanCoefficients mc = mclennan_coefficients(b, d, m, n);
  r.scalars["A"] = mc.A;
  r.scalars["B"] = mc.B;
  for (auto& row : r.rows) row.coefficient = mc.correction[static_cast<std::size_t>(row.site - 1)];

  const auto configs = random_configurations(c.seed, o.random_configs, n, static_cast<Occupation>(o.max_occupation));
  r.checks.push_back(check_generator_identity(detail::corrupted(mc.correction, o.corrupt_c1), b, d, m, configs));
  if (b < d) {
    r.checks.push_back(check_mclennan_equals_leq(b, d, m, n));
    r.checks.push_back(make_check(
        "leq_closed_form",
        max_abs_difference(leq_first_order_coefficients(b, d, m, n), leq_closed_form_coefficients(b, d, m, n)),
        1e-12, "theta1/theta0 against (N+1-2i)/(N-1+2m/(d-b))"));
  }
  double sum = 0.0;
  for (double x : mc.correction.coefficients) sum += x;
  r.checks.push_back(make_check("coefficient_sum", std::abs(sum), 1e-12));
  if (std::abs(d - (b + m)) <= 1e-12 * std::max(1.0, d)) {
    const LinearCorrection simple = extra_boundary_site_coefficients(n);
    r.series["extra_boundary_site_coefficients"] = simple.coefficients;
    r.notes["special_case"] = "d = b + m: c_i = 1 - 2i/(N+1)";
    r.checks.push_back(make_check("extra_boundary_site", max_abs_difference(mc.correction, simple), 1e-12));
  }
  return r;
}

inline Report cmd_dyson(const RunConfig& c, const CommandOptions& o = {}) {
  c.validate();
  Report r = detail::start_report("dyson", c);
  const ModelParams p0 = c.reference_params();
  RunConfig eq = c;
  eq.eps = 0.0;
  const int n_max = choose_nmax(eq);
  const LinearCorrection coeff = mclennan_coefficients(c.b_value(), c.d_value(), p0.m(), p0.sites()).correction;
  for (auto& row : r.rows) row.coefficient = coeff[static_cast<std::size_t>(row.site - 1)];
  detail::add_dyson(r, eq, o, n_max);
  return r;
}

inline Report cmd_solve(const RunConfig& c, const CommandOptions& o = {}) {
  c.validate();
  Report r = detail::start_report("solve", c);
  const ModelParams p = c.params();
  const GeneratorMatrix g = detail::build_box(c);
  const StationaryResult st = detail::add_exact(r, g);
  r.checks.push_back(make_check("stationary_residual", st.residual, 1e-10));
  if (auto prof = detail::try_general_profile(p)) {
    detail::fill_analytic(r, *prof);
    detail::add_profile_scalars(r, *prof, p.m());
    double worst = 0.0;
    for (const auto& row : r.rows) worst = std::max(worst, std::abs(*row.exact - *row.analytic));
    r.scalars["max_profile_deviation"] = worst;
    r.checks.push_back(make_check("profile", worst, 1e-6, "exact means against the linear profile"));
  }
  if (p.is_equilibrium()) {
    const Distribution product = product_measure(g.space, p.b1() / p.d1(), p.m());
    const double diff = (st.distribution.probabilities - product.probabilities).cwiseAbs().maxCoeff();
    r.scalars["max_state_deviation_from_product"] = diff;
    r.checks.push_back(make_check("product_measure", diff, 1e-10));
    const double w1 = expectation(entropy_production_on_box(g), st.distribution);
    r.scalars["mean_w1"] = w1;
    r.checks.push_back(make_check("zero_entropy_production", std::abs(w1), 1e-10));
  }
  if (o.dyson && !c.explicit_rates()) {
    RunConfig eq = c;
    eq.eps = 0.0;
    detail::add_dyson(r, eq, o, g.space.n_max());
  }
  if (o.kmc) detail::add_kmc(r, c);
  return r;
}

inline Report cmd_simulate(const RunConfig& c, const CommandOptions& o = {}) {
  c.validate();
  Report r = detail::start_report("simulate", c);
  const ModelParams p = c.params();
  const SimEstimates sim = detail::add_kmc(r, c);
  const auto prof = detail::try_general_profile(p);
  if (prof) {
    detail::fill_analytic(r, *prof);
    detail::add_profile_scalars(r, *prof, p.m());
    for (auto& bond : r.bonds) bond.analytic = 0.0 - p.m() * prof->beta;
    const double b_ref = 0.5 * (p.b1() + p.bN()), d_ref = 0.5 * (p.d1() + p.dN());
    r.scalars["analytic_w1"] = (b_ref - d_ref) * (prof->density(1) - prof->density(p.sites()));
  }
  if (o.exact) detail::add_exact(r, detail::build_box(c));
  if (o.statistical_checks) {
    if (prof) {
      double dz = 0.0, jz = 0.0;
      for (int i = 0; i < p.sites(); ++i) dz = std::max(dz, sim.density[static_cast<std::size_t>(i)].z(prof->density(i + 1)));
      for (const auto& e : sim.bond_current) jz = std::max(jz, e.z(-p.m() * prof->beta));
      r.checks.push_back(make_check("density_vs_analytic_z", dz, 3.0));
      r.checks.push_back(make_check("current_vs_analytic_z", jz, 3.0));
      r.checks.push_back(make_check("w1_vs_analytic_z", sim.w1.z(r.scalars.at("analytic_w1")), 3.0));
    }
    r.checks.push_back(make_check("current_conservation_z", detail::current_spread_z(sim.bond_current), 3.0));
  }
  return r;
}

/// The full battery; exits nonzero from the front end when any check fails.
inline Report cmd_verify(const RunConfig& c, const CommandOptions& o = {}) {
  c.validate();
  Report r = detail::start_report("verify", c);
  const ModelParams p = c.params();
  const int n = p.sites();
  const auto configs = random_configurations(c.seed, o.random_configs, n, static_cast<Occupation>(o.max_occupation));

  r.checks.push_back(check_rate_ratio(p, configs));
  if (!c.explicit_rates()) {
    const double b = c.b_value(), d = c.d_value(), m = p.m();
    r.checks.push_back(check_local_detailed_balance(b, d, c.eps_value(), n, m, configs));
    const LinearCorrection coeff = mclennan_coefficients(b, d, m, n).correction;
    for (auto& row : r.rows) row.coefficient = coeff[static_cast<std::size_t>(row.site - 1)];
    r.checks.push_back(check_generator_identity(detail::corrupted(coeff, o.corrupt_c1), b, d, m, configs));
    if (b < d) {
      r.checks.push_back(check_mclennan_equals_leq(b, d, m, n));
      r.checks.push_back(check_truncated_detailed_balance(c.reference_params(), 6));
    }
  } else {
    r.notes["skipped"] = "expansion checks need the --b/--d/--eps parameter form";
  }

  if (p.has_finite_density()) {
    RunConfig boxed = c;
    if (!boxed.n_max) boxed.n_max = std::min(choose_nmax(c), 30);
    const GeneratorMatrix g = detail::build_box(boxed);
    const StationaryResult st = detail::add_exact(r, g);
    r.checks.push_back(make_check("stationary_residual", st.residual, 1e-10));
    if (auto prof = detail::try_general_profile(p)) {
      detail::fill_analytic(r, *prof);
      detail::add_profile_scalars(r, *prof, p.m());
      double worst = 0.0;
      for (const auto& row : r.rows) worst = std::max(worst, std::abs(*row.exact - *row.analytic));
      r.checks.push_back(make_check("profile", worst, 1e-6, "exact means against the linear profile"));
    }
    if (!c.explicit_rates() && c.b_value() < c.d_value()) {
      CommandOptions dyson = o;
      dyson.dyson_order = 1;
      dyson.finite_difference = false;
      RunConfig eq = boxed;
      eq.eps = 0.0;
      detail::add_dyson(r, eq, dyson, *boxed.n_max);

      const ModelParams p0 = c.reference_params();
      const GeneratorMatrix g0 = build_generator(g.space, p0);
      const StationaryResult st0 = stationary_distribution(g0);
      const double w1 = expectation(entropy_production_on_box(g0), st0.distribution);
      r.scalars["equilibrium_mean_w1"] = w1;
      r.checks.push_back(make_check("zero_current_at_eps0", std::abs(stationary_current(p0)), 1e-15));
      r.checks.push_back(make_check("zero_entropy_production_at_eps0", std::abs(w1), 1e-10));
    }
    if (o.kmc) {
      const SimEstimates sim = detail::add_kmc(r, c);
      double z = 0.0;
      for (int i = 0; i < n; ++i) {
        z = std::max(z, sim.density[static_cast<std::size_t>(i)].z(*r.rows[static_cast<std::size_t>(i)].exact));
      }
      r.checks.push_back(make_check("kmc_vs_exact_z", z, 3.0, "max over sites"));
      r.checks.push_back(make_check("current_conservation_z", detail::current_spread_z(sim.bond_current), 3.0));
    }
  }
  return r;
}

}  // namespace sip::cli
