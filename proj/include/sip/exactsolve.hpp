#pragma once

// Master equation on the truncated box {0..n_max}^N.
//
// Transitions that would leave the box are dropped (and their rate recorded),
// so the truncated generator is still a conservative rate matrix whose edges
// all come in reversible pairs.  At equilibrium reservoir rates the product
// measure restricted to the box is therefore exactly stationary.

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#ifdef SIP_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sip/analytic.hpp"
#include "sip/error.hpp"
#include "sip/model.hpp"

namespace sip {

using StateIndex = std::int64_t;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

#ifdef SIP_HAVE_UMFPACK
using DirectSolver = Eigen::UmfPackLU<SparseColMatrix>;
#else
using DirectSolver = Eigen::SparseLU<SparseColMatrix, Eigen::COLAMDOrdering<int>>;
#endif

/// Mixed-radix enumeration of {0..n_max}^N; site 0 is the fastest digit.
class TruncatedSpace {
 public:
  TruncatedSpace(int sites, int n_max) : sites_(sites), n_max_(n_max) {
    if (sites < 2) throw InvalidArgument("N must be at least 2");
    if (n_max < 1) throw InvalidArgument("n_max must be at least 1");
    // Every state carries at most 2N+3 stored entries; keep those addressable by int.
    const auto limit = static_cast<double>(std::numeric_limits<int>::max()) / (2.0 * sites + 3.0);
    double size = 1.0;
    strides_.reserve(static_cast<std::size_t>(sites));
    for (int i = 0; i < sites; ++i) {
      strides_.push_back(static_cast<StateIndex>(size));
      size *= n_max + 1.0;
      if (size > limit) {
        throw SizeOverflow("truncated space (n_max+1)^N = " + std::to_string(n_max + 1) + "^" +
                           std::to_string(sites) + " exceeds the index range");
      }
    }
    size_ = static_cast<StateIndex>(size);
  }

  int sites() const noexcept { return sites_; }
  int n_max() const noexcept { return n_max_; }
  StateIndex size() const noexcept { return size_; }

  bool contains(const Configuration& cfg) const {
    if (cfg.size() != static_cast<std::size_t>(sites_)) return false;
    return std::all_of(cfg.occupations().begin(), cfg.occupations().end(),
                       [&](Occupation n) { return n <= static_cast<Occupation>(n_max_); });
  }

  StateIndex index(const Configuration& cfg) const {
    if (!contains(cfg)) throw InvalidArgument("configuration " + to_string(cfg) + " outside box");
    StateIndex k = 0;
    for (std::size_t i = 0; i < cfg.size(); ++i) k += strides_[i] * cfg[i];
    return k;
  }

  Occupation occupation(StateIndex k, int site) const {
    return static_cast<Occupation>((k / strides_[static_cast<std::size_t>(site)]) % (n_max_ + 1));
  }

  void decode(StateIndex k, Configuration& out) const {
    if (out.size() != static_cast<std::size_t>(sites_)) out = Configuration(sites_);
    for (int i = 0; i < sites_; ++i) out.set(static_cast<std::size_t>(i), occupation(k, i));
  }

  Configuration state(StateIndex k) const {
    if (k < 0 || k >= size_) throw InvalidArgument("state index out of range");
    Configuration cfg(static_cast<std::size_t>(sites_));
    decode(k, cfg);
    return cfg;
  }

  /// Index of the state reached by `move`, or -1 if it leaves the box.
  StateIndex neighbour(StateIndex k, const Configuration& cfg, Move move) const {
    const auto cap = static_cast<Occupation>(n_max_);
    const std::size_t last = cfg.size() - 1;
    switch (move.kind) {
      case TransitionKind::BulkRight: {
        const auto i = static_cast<std::size_t>(move.bond);
        return cfg[i + 1] >= cap ? -1 : k - strides_[i] + strides_[i + 1];
      }
      case TransitionKind::BulkLeft: {
        const auto i = static_cast<std::size_t>(move.bond);
        return cfg[i] >= cap ? -1 : k + strides_[i] - strides_[i + 1];
      }
      case TransitionKind::BirthLeft: return cfg[0] >= cap ? -1 : k + strides_[0];
      case TransitionKind::DeathLeft: return k - strides_[0];
      case TransitionKind::BirthRight: return cfg[last] >= cap ? -1 : k + strides_[last];
      case TransitionKind::DeathRight: return k - strides_[last];
    }
    return -1;
  }

 private:
  int sites_;
  int n_max_;
  StateIndex size_ = 0;
  std::vector<StateIndex> strides_;
};

inline TruncatedSpace build_space(int sites, int n_max) { return TruncatedSpace(sites, n_max); }

/// Smallest n_max with single-site tail mass below `tail` at theta_0, doubled
/// for perturbed runs.
inline int default_nmax(double theta0, double m, bool perturbed, double tail = 1e-12) {
  const auto n = static_cast<int>(std::max<unsigned long>(marginal_quantile(theta0, m, tail), 1));
  return perturbed ? 2 * n : n;
}

/// Truncated rate matrix Q with Q(x,y) = rate(x -> y) and Q(x,x) = -escape(x).
struct GeneratorMatrix {
  TruncatedSpace space;
  ModelParams params;
  SparseRowMatrix matrix;
  std::vector<double> dropped_rate;  // per state: rate of transitions leaving the box
  bool truncated = false;            // some transition was dropped

  StateIndex size() const noexcept { return space.size(); }

  double diagonal(StateIndex k) const { return matrix.coeff(k, k); }

  /// Off-diagonal entries summed in storage order, plus the diagonal.
  double row_sum(StateIndex k) const {
    double off = 0.0, diag = 0.0;
    for (SparseRowMatrix::InnerIterator it(matrix, k); it; ++it) {
      if (it.col() == k) diag = it.value();
      else off += it.value();
    }
    return off + diag;
  }
};

namespace detail {

/// Assembles a conservative row matrix from per-state off-diagonal entries.
/// visit(k, cfg, emit(col, value), drop(value)) is called for every state.
template <class Visit>
std::pair<SparseRowMatrix, std::vector<double>> assemble_conservative(const TruncatedSpace& space,
                                                                      Visit&& visit) {
  const StateIndex n = space.size();
  std::vector<Eigen::Triplet<double, int>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * (2 * static_cast<std::size_t>(space.sites()) + 2));
  std::vector<double> dropped(static_cast<std::size_t>(n), 0.0);
  Configuration cfg(static_cast<std::size_t>(space.sites()));
  for (StateIndex k = 0; k < n; ++k) {
    space.decode(k, cfg);
    visit(
        k, cfg,
        [&](StateIndex col, double value) {
          triplets.emplace_back(static_cast<int>(k), static_cast<int>(col), value);
        },
        [&](double value) { dropped[static_cast<std::size_t>(k)] += value; });
  }
  SparseRowMatrix off(n, n);
  off.setFromTriplets(triplets.begin(), triplets.end());
  // Diagonal = minus the storage-order sum of the row, so rows sum to zero exactly.
  triplets.clear();
  triplets.reserve(static_cast<std::size_t>(off.nonZeros() + n));
  for (StateIndex k = 0; k < n; ++k) {
    double s = 0.0;
    for (SparseRowMatrix::InnerIterator it(off, k); it; ++it) {
      s += it.value();
      triplets.emplace_back(static_cast<int>(k), static_cast<int>(it.col()), it.value());
    }
    triplets.emplace_back(static_cast<int>(k), static_cast<int>(k), -s);
  }
  SparseRowMatrix full(n, n);
  full.setFromTriplets(triplets.begin(), triplets.end());
  full.makeCompressed();
  return {std::move(full), std::move(dropped)};
}

}  // namespace detail

inline GeneratorMatrix build_generator(const TruncatedSpace& space, const ModelParams& p) {
  if (space.sites() != p.sites()) throw InvalidArgument("space and parameters disagree on N");
  auto [matrix, dropped] = detail::assemble_conservative(
      space, [&](StateIndex k, const Configuration& cfg, auto&& emit, auto&& drop) {
        for_each_transition(cfg, p, [&](Move move, double r) {
          const StateIndex target = space.neighbour(k, cfg, move);
          if (target < 0) drop(r);
          else emit(target, r);
        });
      });
  const bool truncated = std::any_of(dropped.begin(), dropped.end(), [](double x) { return x > 0; });
  return GeneratorMatrix{space, p, std::move(matrix), std::move(dropped), truncated};
}

/// Probability vector over a truncated space.
struct Distribution {
  Eigen::VectorXd probabilities;

  StateIndex size() const noexcept { return probabilities.size(); }
  double operator[](StateIndex k) const { return probabilities[k]; }
};

inline double expectation(const Eigen::VectorXd& f, const Distribution& nu) {
  if (f.size() != nu.size()) throw InvalidArgument("function and distribution sizes differ");
  return f.dot(nu.probabilities);
}

/// Evaluates `f(cfg)` on every state of the box.
template <class F>
Eigen::VectorXd tabulate(const TruncatedSpace& space, F&& f) {
  Eigen::VectorXd out(space.size());
  Configuration cfg(static_cast<std::size_t>(space.sites()));
  for (StateIndex k = 0; k < space.size(); ++k) {
    space.decode(k, cfg);
    out[k] = f(cfg);
  }
  return out;
}

template <class F>
double expectation(const TruncatedSpace& space, F&& f, const Distribution& nu) {
  return expectation(tabulate(space, std::forward<F>(f)), nu);
}

inline std::vector<double> site_means(const TruncatedSpace& space, const Distribution& nu) {
  std::vector<double> means(static_cast<std::size_t>(space.sites()), 0.0);
  for (StateIndex k = 0; k < space.size(); ++k) {
    for (int i = 0; i < space.sites(); ++i) {
      means[static_cast<std::size_t>(i)] += nu[k] * space.occupation(k, i);
    }
  }
  return means;
}

/// sum_x nu(x) * dropped(x): expected rate of leaving the box.
inline double weighted_dropped_rate(const GeneratorMatrix& g, const Distribution& nu) {
  double s = 0.0;
  for (StateIndex k = 0; k < g.size(); ++k) s += nu[k] * g.dropped_rate[static_cast<std::size_t>(k)];
  return s;
}

/// Product of equilibrium marginals gamma_theta restricted to the box and renormalised.
inline Distribution product_measure(const TruncatedSpace& space, double theta, double m) {
  std::vector<double> marginal(static_cast<std::size_t>(space.n_max()) + 1);
  double mass = 0.0;
  for (int n = 0; n <= space.n_max(); ++n) {
    marginal[static_cast<std::size_t>(n)] = marginal_pmf(theta, m, static_cast<unsigned long>(n));
    mass += marginal[static_cast<std::size_t>(n)];
  }
  for (double& g : marginal) g /= mass;
  Distribution out{Eigen::VectorXd(space.size())};
  for (StateIndex k = 0; k < space.size(); ++k) {
    double p = 1.0;
    for (int i = 0; i < space.sites(); ++i) p *= marginal[space.occupation(k, i)];
    out.probabilities[k] = p;
  }
  return out;
}

/// Solver options shared by the stationary and Poisson solves.
struct SolverOptions {
  StateIndex direct_limit = 100'000;  // above this, BiCGSTAB with ILUT
  double iterative_tolerance = 1e-14;
  int max_iterations = 20000;
};

/// Factorisation of a square system in which row `pin` is replaced by the unit row e_pin.
class PinnedSystem {
 public:
  PinnedSystem(SparseColMatrix a, StateIndex pin, const SolverOptions& options = {})
      : pin_(pin), matrix_(std::move(a)) {
    matrix_.prune(
        [pin](const Eigen::Index& row, const Eigen::Index&, const double&) { return row != pin; });
    matrix_.coeffRef(pin, pin) = 1.0;
    matrix_.makeCompressed();
    // The factorisations keep referring to matrix_, which therefore lives in this object.
    if (matrix_.rows() <= options.direct_limit) {
      direct_ = std::make_unique<DirectSolver>();
      direct_->compute(matrix_);
      if (direct_->info() != Eigen::Success) throw SolverError("sparse LU factorisation failed");
    } else {
      iterative_ = std::make_unique<Eigen::BiCGSTAB<SparseColMatrix, Eigen::IncompleteLUT<double>>>();
      iterative_->setTolerance(options.iterative_tolerance);
      iterative_->setMaxIterations(options.max_iterations);
      iterative_->compute(matrix_);
      if (iterative_->info() != Eigen::Success) throw SolverError("ILUT preconditioner failed");
    }
  }

  PinnedSystem(const PinnedSystem&) = delete;
  PinnedSystem& operator=(const PinnedSystem&) = delete;

  /// Solves with rhs[pin] overwritten by `pin_value`.
  Eigen::VectorXd solve(Eigen::VectorXd rhs, double pin_value) const {
    rhs[pin_] = pin_value;
    Eigen::VectorXd x;
    if (direct_) {
      x = direct_->solve(rhs);
      if (direct_->info() != Eigen::Success) throw SolverError("sparse LU solve failed");
    } else {
      x = iterative_->solve(rhs);
      if (iterative_->info() != Eigen::Success) throw SolverError("BiCGSTAB did not converge");
    }
    return x;
  }

  StateIndex pin() const noexcept { return pin_; }

 private:
  StateIndex pin_;
  SparseColMatrix matrix_;
  std::unique_ptr<DirectSolver> direct_;
  std::unique_ptr<Eigen::BiCGSTAB<SparseColMatrix, Eigen::IncompleteLUT<double>>> iterative_;
};

struct StationaryResult {
  Distribution distribution;
  double residual;  // || Q^T nu ||_inf
};

/// Log-weights of the product measure whose site fugacities reproduce the
/// analytic density profile; all zero when the profile has no such measure.
inline Eigen::VectorXd reference_log_weights(const TruncatedSpace& space, const ModelParams& p) {
  std::vector<double> theta;
  if (p.has_finite_density()) {
    const auto rho = density_profile_general(p).densities(p.sites());
    for (double r : rho) {
      if (!(r > 0.0)) return Eigen::VectorXd::Zero(space.size());
      theta.push_back(theta_from_density(r, p.m()));
    }
  } else {
    return Eigen::VectorXd::Zero(space.size());
  }
  return tabulate(space, [&](const Configuration& cfg) { return leq_log_weight(theta, p.m(), cfg); });
}

/// Unique nu with Q^T nu = 0, sum nu = 1.
///
/// The balance equations are solved for u = nu / rho_ref, rho_ref being the
/// local-equilibrium product measure, so that tail states many orders of
/// magnitude below the bulk keep full relative precision. The equation of
/// the empty state is replaced by u(0) = 1 before normalising.
inline StationaryResult stationary_distribution(const GeneratorMatrix& g,
                                                const SolverOptions& options = {});

struct PoissonSolution {
  Eigen::VectorXd phi;
  double residual;  // || Q phi - f ||_inf after any projection
  double mean_rhs;  // <f>_nu before projection
};

/// Solves Q phi = f with gauge <phi>_nu = 0. The factorisation is reused
/// across right-hand sides.
class PoissonSolver {
 public:
  PoissonSolver(const SparseRowMatrix& q, Distribution nu, double solvability_tolerance = 1e-8,
                const SolverOptions& options = {})
      : q_(q),
        nu_(std::move(nu)),
        tolerance_(solvability_tolerance),
        system_(SparseColMatrix(q), pin_state(nu_), options) {
    if (q.rows() != nu_.size()) throw InvalidArgument("generator and distribution sizes differ");
  }

  PoissonSolver(const GeneratorMatrix& g, Distribution nu, double solvability_tolerance = 1e-8,
                const SolverOptions& options = {})
      : PoissonSolver(g.matrix, std::move(nu), solvability_tolerance, options) {}

  const Distribution& measure() const noexcept { return nu_; }
  double tolerance() const noexcept { return tolerance_; }

  /// Requires |<f>_nu| below the solvability tolerance.
  PoissonSolution solve(const Eigen::VectorXd& f) const {
    const double mean = expectation(f, nu_);
    if (std::abs(mean) > tolerance_) {
      throw SolvabilityError("Poisson right-hand side has nonzero mean " + std::to_string(mean));
    }
    return solve_centered(f, mean);
  }

  /// Subtracts <f>_nu first and reports it in mean_rhs.
  PoissonSolution solve_projected(const Eigen::VectorXd& f) const {
    return solve_centered(f, expectation(f, nu_));
  }

 private:
  static StateIndex pin_state(const Distribution& nu) {
    Eigen::Index best = 0;
    nu.probabilities.maxCoeff(&best);
    return best;
  }

  PoissonSolution solve_centered(const Eigen::VectorXd& f, double mean) const {
    Eigen::VectorXd rhs = f.array() - mean;
    Eigen::VectorXd phi = system_.solve(rhs, 0.0);
    phi.array() -= expectation(phi, nu_);
    const double residual = (q_ * phi - rhs).cwiseAbs().maxCoeff();
    return {std::move(phi), residual, mean};
  }

  SparseRowMatrix q_;
  Distribution nu_;
  double tolerance_;
  PinnedSystem system_;
};

inline Eigen::VectorXd solve_poisson(const GeneratorMatrix& g, const Eigen::VectorXd& f,
                                     const Distribution& nu) {
  return PoissonSolver(g, nu).solve(f).phi;
}

/// w_1(x) = sum_y lambda(x,y) F_1(x,y) over the transitions retained in the box.
/// Equals (b - d)(eta_1 - eta_N) away from the faces eta_1 = n_max, eta_N = n_max.
inline Eigen::VectorXd entropy_production_on_box(const GeneratorMatrix& g) {
  const TruncatedSpace& space = g.space;
  Eigen::VectorXd w(space.size());
  Configuration cfg(static_cast<std::size_t>(space.sites()));
  for (StateIndex k = 0; k < space.size(); ++k) {
    space.decode(k, cfg);
    double s = 0.0;
    for_each_transition(cfg, g.params, [&](Move move, double r) {
      const int force = local_force_F1(move);
      if (force != 0 && space.neighbour(k, cfg, move) >= 0) s += r * force;
    });
    w[k] = s;
  }
  return w;
}

/// Gamma f = b(m + eta_1)(f(eta^{1+}) - f) - b(m + eta_N)(f(eta^{N+}) - f), so that
/// the generator of perturbed_params(b, d, eps) is L_0 + eps Gamma on the box.
inline SparseRowMatrix build_perturbation(const TruncatedSpace& space, double b, double m) {
  auto [matrix, dropped] = detail::assemble_conservative(
      space, [&](StateIndex k, const Configuration& cfg, auto&& emit, auto&&) {
        const std::size_t last = cfg.size() - 1;
        if (const StateIndex t = space.neighbour(k, cfg, {TransitionKind::BirthLeft}); t >= 0) {
          emit(t, b * (m + cfg[0]));
        }
        if (const StateIndex t = space.neighbour(k, cfg, {TransitionKind::BirthRight}); t >= 0) {
          emit(t, -b * (m + cfg[last]));
        }
      });
  return std::move(matrix);
}

/// rho^{-1} A^* rho as a row matrix: entry (x, y) = A(y, x) rho(y) / rho(x).
/// Built from log-weight differences so deep tail states stay well scaled.
inline SparseRowMatrix conjugated_adjoint(const SparseRowMatrix& a, const Eigen::VectorXd& log_rho) {
  SparseRowMatrix t = a.transpose();
  for (Eigen::Index x = 0; x < t.outerSize(); ++x) {
    for (SparseRowMatrix::InnerIterator it(t, x); it; ++it) {
      it.valueRef() *= std::exp(log_rho[it.col()] - log_rho[x]);
    }
  }
  return t;
}

inline StationaryResult stationary_distribution(const GeneratorMatrix& g,
                                                const SolverOptions& options) {
  const StateIndex n = g.size();
  const Eigen::VectorXd log_ref = reference_log_weights(g.space, g.params);
  const PinnedSystem system(SparseColMatrix(conjugated_adjoint(g.matrix, log_ref)), 0, options);
  Eigen::VectorXd u = system.solve(Eigen::VectorXd::Zero(n), 1.0);
  const double scale = u.cwiseAbs().maxCoeff();
  for (StateIndex k = 0; k < n; ++k) {
    if (u[k] < 0.0) {
      if (u[k] < -1e-9 * scale) throw SolverError("stationary solve produced a negative probability");
      u[k] = 0.0;
    }
  }
  Eigen::VectorXd nu = u.array() * (log_ref.array() - log_ref.maxCoeff()).exp();
  nu /= nu.sum();
  const double residual = (g.matrix.transpose() * nu).cwiseAbs().maxCoeff();
  return {Distribution{std::move(nu)}, residual};
}

/// Stage of the expansion rho = rho_0 (1 + sum_k eps^k h_k).
struct DysonTerm {
  int order;
  Eigen::VectorXd h;
  double projection;  // <rhs>_rho0 removed before solving
  double residual;    // || L_0 h - rhs ||_inf
};

/// Order-by-order stationary expansion around the equilibrium box measure for
/// the perturbation of perturbed_params. Each stage solves
///   L_0 h_k = -rho_0^{-1} Gamma^*(rho_0 h_{k-1}),   h_0 = 1,
/// which is L_0^*(rho_0 h_k) = -Gamma^*(rho_0 h_{k-1}) by reversibility of L_0.
class DysonExpansion {
 public:
  DysonExpansion(const GeneratorMatrix& g0, double projection_tolerance = 1e-8,
                 const SolverOptions& options = {})
      : g0_(g0),
        b_(g0.params.b1()),
        d_(g0.params.d1()),
        projection_tolerance_(projection_tolerance) {
    const ModelParams& p = g0.params;
    if (p.b1() != p.bN() || p.d1() != p.dN()) {
      throw InvalidArgument("Dyson expansion needs identical equilibrium reservoirs");
    }
    if (!p.has_finite_density()) throw InvalidArgument("Dyson expansion needs b < d");
    const double theta = b_ / d_;
    rho0_ = product_measure(g0.space, theta, p.m());
    log_rho0_ = tabulate(g0.space, [&](const Configuration& cfg) {
      double s = 0.0;
      for (auto n : cfg.occupations()) s += log_marginal_pmf(theta, p.m(), n);
      return s;
    });
    gamma_ = build_perturbation(g0.space, b_, p.m());
    gamma_dagger_ = conjugated_adjoint(gamma_, log_rho0_);
    solver_ = std::make_unique<PoissonSolver>(g0, rho0_, projection_tolerance, options);
  }

  const GeneratorMatrix& generator() const noexcept { return g0_; }
  const Distribution& reference() const noexcept { return rho0_; }
  const SparseRowMatrix& perturbation() const noexcept { return gamma_; }
  /// rho_0^{-1} Gamma^* rho_0.
  const SparseRowMatrix& conjugated_perturbation() const noexcept { return gamma_dagger_; }
  const PoissonSolver& solver() const noexcept { return *solver_; }

  /// max over states with eta_1, eta_N < n_max of the relative deviation of
  /// rho_0^{-1} Gamma^* rho_0 from (b - d)(eta_N - eta_1).
  double gamma_identity_residual() const {
    const TruncatedSpace& space = g0_.space;
    const Eigen::VectorXd lhs = gamma_dagger_ * Eigen::VectorXd::Ones(space.size());
    const auto cap = static_cast<Occupation>(space.n_max());
    const int last = space.sites() - 1;
    double worst = 0.0;
    for (StateIndex k = 0; k < space.size(); ++k) {
      const Occupation first = space.occupation(k, 0), end = space.occupation(k, last);
      if (first >= cap || end >= cap) continue;
      const double expected = (b_ - d_) * (static_cast<double>(end) - static_cast<double>(first));
      worst = std::max(worst, std::abs(lhs[k] - expected) / std::max(1.0, std::abs(expected)));
    }
    return worst;
  }

  DysonTerm first_order() const {
    return next_order(DysonTerm{0, Eigen::VectorXd::Ones(g0_.size()), 0.0, 0.0});
  }

  /// Next stage from `previous`; the right-hand side is projected to zero rho_0-mean
  /// and the projection is reported. Projections beyond tolerance are an error.
  DysonTerm next_order(const DysonTerm& previous) const {
    const Eigen::VectorXd rhs = -(gamma_dagger_ * previous.h);
    const double scale = std::max(1.0, rho0_.probabilities.dot(rhs.cwiseAbs()));
    PoissonSolution sol = solver_->solve_projected(rhs);
    if (std::abs(sol.mean_rhs) > projection_tolerance_ * scale) {
      throw SolvabilityError("Dyson stage " + std::to_string(previous.order + 1) +
                             " projection " + std::to_string(sol.mean_rhs) + " exceeds tolerance");
    }
    return {previous.order + 1, std::move(sol.phi), sol.mean_rhs, sol.residual};
  }

  /// h_1 .. h_order.
  std::vector<DysonTerm> terms(int order) const {
    std::vector<DysonTerm> out;
    if (order < 1) return out;
    out.push_back(first_order());
    while (static_cast<int>(out.size()) < order) out.push_back(next_order(out.back()));
    return out;
  }

  /// sum_x |nu_eps(x) - rho_0(x)(1 + sum_{k<=order} eps^k h_k(x))| / eps,
  /// i.e. the L1(rho_0) distance between (nu_eps - rho_0)/(eps rho_0) and
  /// sum_k eps^{k-1} h_k.
  double truncation_error(const Distribution& nu_eps, const std::vector<DysonTerm>& terms, double eps,
                          int order) const {
    Eigen::VectorXd series = Eigen::VectorXd::Ones(g0_.size());
    double power = 1.0;
    for (int k = 0; k < order; ++k) {
      power *= eps;
      series += power * terms.at(static_cast<std::size_t>(k)).h;
    }
    return (nu_eps.probabilities - rho0_.probabilities.cwiseProduct(series)).cwiseAbs().sum() / eps;
  }

 private:
  GeneratorMatrix g0_;
  double b_;
  double d_;
  double projection_tolerance_;
  Distribution rho0_;
  Eigen::VectorXd log_rho0_;
  SparseRowMatrix gamma_;
  SparseRowMatrix gamma_dagger_;
  std::unique_ptr<PoissonSolver> solver_;
};

inline Eigen::VectorXd dyson_first_order(const GeneratorMatrix& g0) {
  return DysonExpansion(g0).first_order().h;
}

inline DysonTerm dyson_higher_order(const DysonExpansion& expansion, const DysonTerm& previous) {
  return expansion.next_order(previous);
}

}  // namespace sip
