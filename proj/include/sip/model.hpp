#pragma once

// Boundary-driven symmetric inclusion process on sites 0..N-1.
//
// A particle on site i hops to a neighbour j at rate eta_i (m + eta_j).
// Site 0 is coupled to a reservoir with birth rate b1 (m + eta_0) and death
// rate d1 eta_0; site N-1 likewise with bN, dN.  Site indices are zero-based
// throughout the library; the CLI prints them one-based.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sip/error.hpp"

namespace sip {

using Occupation = std::uint32_t;

/// Occupation numbers eta_0..eta_{N-1}.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::size_t sites) : occupations_(sites, 0) {}
  Configuration(std::initializer_list<Occupation> values) : occupations_(values) {}
  explicit Configuration(std::vector<Occupation> values) : occupations_(std::move(values)) {}

  std::size_t size() const noexcept { return occupations_.size(); }
  Occupation operator[](std::size_t i) const { return occupations_[i]; }
  std::span<const Occupation> occupations() const noexcept { return occupations_; }

  void increment(std::size_t i) {
    if (occupations_[i] == std::numeric_limits<Occupation>::max()) {
      throw InvalidArgument("occupation overflow at site " + std::to_string(i));
    }
    ++occupations_[i];
  }

  void decrement(std::size_t i) {
    if (occupations_[i] == 0) {
      throw InvalidArgument("cannot remove a particle from empty site " + std::to_string(i));
    }
    --occupations_[i];
  }

  void set(std::size_t i, Occupation value) { occupations_[i] = value; }

  std::uint64_t total() const {
    return std::accumulate(occupations_.begin(), occupations_.end(), std::uint64_t{0});
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;

 private:
  std::vector<Occupation> occupations_;
};

inline std::string to_string(const Configuration& cfg) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    if (i) os << ',';
    os << cfg[i];
  }
  os << ')';
  return os.str();
}

struct Reservoir {
  double birth;
  double death;
};

/// Site count, inclusion parameter m and the two reservoirs.
class ModelParams {
 public:
  ModelParams(int sites, double m, Reservoir left, Reservoir right)
      : sites_(sites), m_(m), left_(left), right_(right) {
    if (sites < 2) throw InvalidArgument("N must be at least 2");
    auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!positive(m)) throw InvalidArgument("m must be positive and finite");
    if (!positive(left.birth) || !positive(left.death) || !positive(right.birth) ||
        !positive(right.death)) {
      throw InvalidArgument("reservoir rates must be positive and finite");
    }
  }

  /// Identical reservoirs with birth rate b and death rate d.
  static ModelParams equilibrium(int sites, double m, double b, double d) {
    return ModelParams(sites, m, {b, d}, {b, d});
  }

  int sites() const noexcept { return sites_; }
  double m() const noexcept { return m_; }
  const Reservoir& left() const noexcept { return left_; }
  const Reservoir& right() const noexcept { return right_; }
  double b1() const noexcept { return left_.birth; }
  double d1() const noexcept { return left_.death; }
  double bN() const noexcept { return right_.birth; }
  double dN() const noexcept { return right_.death; }

  /// b1/d1 == bN/dN, compared as b1 dN == bN d1.
  /// b1/d1 == bN/dN up to rounding of the products.
  bool is_equilibrium() const noexcept {
    const double lhs = b1() * dN(), rhs = bN() * d1();
    return std::abs(lhs - rhs) <= 1e-14 * std::max(std::abs(lhs), std::abs(rhs));
  }

  /// Both reservoir fugacities below one; required by the equilibrium marginals.
  bool has_finite_density() const noexcept { return b1() < d1() && bN() < dN(); }

  void check(const Configuration& cfg) const {
    if (cfg.size() != static_cast<std::size_t>(sites_)) {
      throw InvalidArgument("configuration has " + std::to_string(cfg.size()) +
                            " sites, parameters expect " + std::to_string(sites_));
    }
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.sites_ == b.sites_ && a.m_ == b.m_ && a.b1() == b.b1() && a.d1() == b.d1() &&
           a.bN() == b.bN() && a.dN() == b.dN();
  }

 private:
  int sites_;
  double m_;
  Reservoir left_;
  Reservoir right_;
};

/// Reservoirs b1 = b(1+eps), bN = b(1-eps), d1 = dN = d.
inline ModelParams perturbed_params(double b, double d, double eps, int sites, double m) {
  if (!(eps > -1.0 && eps < 1.0)) {
    throw InvalidArgument("perturbation eps must lie in (-1, 1)");
  }
  return ModelParams(sites, m, {b * (1.0 + eps), d}, {b * (1.0 - eps), d});
}

enum class TransitionKind : std::uint8_t {
  BulkRight,   // bond i: site i -> site i+1
  BulkLeft,    // bond i: site i+1 -> site i
  BirthLeft,
  DeathLeft,
  BirthRight,
  DeathRight,
};

inline std::string_view to_string(TransitionKind kind) {
  switch (kind) {
    case TransitionKind::BulkRight: return "bulk-right";
    case TransitionKind::BulkLeft: return "bulk-left";
    case TransitionKind::BirthLeft: return "birth-left";
    case TransitionKind::DeathLeft: return "death-left";
    case TransitionKind::BirthRight: return "birth-right";
    case TransitionKind::DeathRight: return "death-right";
  }
  return "unknown";
}

/// A jump type; `bond` is meaningful for bulk moves only.
struct Move {
  TransitionKind kind;
  int bond = 0;

  bool is_bulk() const noexcept {
    return kind == TransitionKind::BulkRight || kind == TransitionKind::BulkLeft;
  }
  friend bool operator==(const Move&, const Move&) = default;
};

inline Move reverse(Move move) {
  switch (move.kind) {
    case TransitionKind::BulkRight: return {TransitionKind::BulkLeft, move.bond};
    case TransitionKind::BulkLeft: return {TransitionKind::BulkRight, move.bond};
    case TransitionKind::BirthLeft: return {TransitionKind::DeathLeft};
    case TransitionKind::DeathLeft: return {TransitionKind::BirthLeft};
    case TransitionKind::BirthRight: return {TransitionKind::DeathRight};
    case TransitionKind::DeathRight: return {TransitionKind::BirthRight};
  }
  return move;
}

/// Rate of `move` out of `cfg`; zero when the move is impossible.
inline double rate(Move move, const Configuration& cfg, const ModelParams& p) {
  const double m = p.m();
  const std::size_t last = cfg.size() - 1;
  switch (move.kind) {
    case TransitionKind::BulkRight: {
      const auto i = static_cast<std::size_t>(move.bond);
      return cfg[i] * (m + cfg[i + 1]);
    }
    case TransitionKind::BulkLeft: {
      const auto i = static_cast<std::size_t>(move.bond);
      return cfg[i + 1] * (m + cfg[i]);
    }
    case TransitionKind::BirthLeft: return p.b1() * (m + cfg[0]);
    case TransitionKind::DeathLeft: return p.d1() * cfg[0];
    case TransitionKind::BirthRight: return p.bN() * (m + cfg[last]);
    case TransitionKind::DeathRight: return p.dN() * cfg[last];
  }
  return 0.0;
}

/// Applies `move` in place. The move must have positive rate.
inline void apply(Move move, Configuration& cfg) {
  const std::size_t last = cfg.size() - 1;
  switch (move.kind) {
    case TransitionKind::BulkRight:
      cfg.decrement(static_cast<std::size_t>(move.bond));
      cfg.increment(static_cast<std::size_t>(move.bond) + 1);
      break;
    case TransitionKind::BulkLeft:
      cfg.decrement(static_cast<std::size_t>(move.bond) + 1);
      cfg.increment(static_cast<std::size_t>(move.bond));
      break;
    case TransitionKind::BirthLeft: cfg.increment(0); break;
    case TransitionKind::DeathLeft: cfg.decrement(0); break;
    case TransitionKind::BirthRight: cfg.increment(last); break;
    case TransitionKind::DeathRight: cfg.decrement(last); break;
  }
}

inline Configuration applied(Move move, Configuration cfg) {
  apply(move, cfg);
  return cfg;
}

/// Calls fn(move, rate) for every move of positive rate, in a fixed order:
/// bulk-right bonds, bulk-left bonds, then birth/death left, birth/death right.
template <class Fn>
void for_each_transition(const Configuration& cfg, const ModelParams& p, Fn&& fn) {
  const int bonds = p.sites() - 1;
  for (int i = 0; i < bonds; ++i) {
    const Move move{TransitionKind::BulkRight, i};
    if (const double r = rate(move, cfg, p); r > 0.0) fn(move, r);
  }
  for (int i = 0; i < bonds; ++i) {
    const Move move{TransitionKind::BulkLeft, i};
    if (const double r = rate(move, cfg, p); r > 0.0) fn(move, r);
  }
  for (auto kind : {TransitionKind::BirthLeft, TransitionKind::DeathLeft,
                    TransitionKind::BirthRight, TransitionKind::DeathRight}) {
    const Move move{kind};
    if (const double r = rate(move, cfg, p); r > 0.0) fn(move, r);
  }
}

struct Transition {
  Move move;
  Configuration target;
  double rate;
};

inline std::vector<Transition> enumerate_transitions(const Configuration& cfg,
                                                     const ModelParams& p) {
  p.check(cfg);
  std::vector<Transition> out;
  out.reserve(2 * static_cast<std::size_t>(p.sites()) + 2);
  for_each_transition(cfg, p, [&](Move move, double r) {
    out.push_back({move, applied(move, cfg), r});
  });
  return out;
}

inline double total_escape_rate(const Configuration& cfg, const ModelParams& p) {
  double total = 0.0;
  for_each_transition(cfg, p, [&](Move, double r) { total += r; });
  return total;
}

/// (Lf)(cfg) for the full generator L = L_bulk + B_1 + B_N.
template <class F>
double generator_apply(F&& f, const Configuration& cfg, const ModelParams& p) {
  p.check(cfg);
  const double base = f(cfg);
  Configuration scratch = cfg;
  double sum = 0.0;
  for_each_transition(cfg, p, [&](Move move, double r) {
    apply(move, scratch);
    sum += r * (f(scratch) - base);
    apply(reverse(move), scratch);
  });
  return sum;
}

/// First-order boundary force: +1 for moves that carry particles left to right
/// through the reservoirs (birth-left, death-right), -1 for their reverses.
inline int local_force_F1(Move move) {
  switch (move.kind) {
    case TransitionKind::BirthLeft:
    case TransitionKind::DeathRight: return 1;
    case TransitionKind::DeathLeft:
    case TransitionKind::BirthRight: return -1;
    default: return 0;
  }
}

/// Exact force F_eps for the rates of perturbed_params(b, d, eps, ...).
inline double local_force(Move move, double eps) {
  switch (move.kind) {
    case TransitionKind::BirthLeft: return std::log1p(eps);
    case TransitionKind::DeathLeft: return -std::log1p(eps);
    case TransitionKind::BirthRight: return std::log1p(-eps);
    case TransitionKind::DeathRight: return -std::log1p(-eps);
    default: return 0.0;
  }
}

/// w_1 = sum_y lambda_0(x,y) F_1(x,y) = (b - d)(eta_1 - eta_N).
inline double entropy_production_w1(const Configuration& cfg, double b, double d) {
  return (b - d) * (static_cast<double>(cfg[0]) - static_cast<double>(cfg[cfg.size() - 1]));
}

}  // namespace sip
