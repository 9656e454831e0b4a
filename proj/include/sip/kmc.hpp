#pragma once

// Event-driven simulation of the jump process and time-averaged estimators.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "sip/error.hpp"
#include "sip/model.hpp"
#include "sip/rng.hpp"
#include "sip/stats.hpp"

namespace sip {

namespace detail {

// Rate slots: bulk-right bonds, bulk-left bonds, birth/death left, birth/death right.
inline std::size_t slot_count(int sites) { return 2 * static_cast<std::size_t>(sites) + 2; }

inline Move slot_move(std::size_t slot, int sites) {
  const auto bonds = static_cast<std::size_t>(sites - 1);
  if (slot < bonds) return {TransitionKind::BulkRight, static_cast<int>(slot)};
  if (slot < 2 * bonds) return {TransitionKind::BulkLeft, static_cast<int>(slot - bonds)};
  switch (slot - 2 * bonds) {
    case 0: return {TransitionKind::BirthLeft};
    case 1: return {TransitionKind::DeathLeft};
    case 2: return {TransitionKind::BirthRight};
    default: return {TransitionKind::DeathRight};
  }
}

inline std::size_t select_slot(const std::vector<double>& rates, double target) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t s = 0; s < rates.size(); ++s) {
    if (rates[s] <= 0.0) continue;
    cumulative += rates[s];
    last_positive = s;
    if (target < cumulative) return s;
  }
  return last_positive;
}

}  // namespace detail

struct KmcStep {
  Configuration next;
  double waiting_time;
  Move move;
};

/// One exact jump from `cfg`: Exp(R) waiting time, then a transition drawn
/// with probability rate/R. Draws the waiting time first, then the event.
inline KmcStep kmc_step(const Configuration& cfg, const ModelParams& p, Xoshiro256& rng) {
  p.check(cfg);
  const std::size_t slots = detail::slot_count(p.sites());
  std::vector<double> rates(slots);
  double total = 0.0;
  for (std::size_t s = 0; s < slots; ++s) {
    rates[s] = rate(detail::slot_move(s, p.sites()), cfg, p);
    total += rates[s];
  }
  const double wait = exponential(rng, total);
  const Move move = detail::slot_move(detail::select_slot(rates, rng.uniform() * total), p.sites());
  return {applied(move, cfg), wait, move};
}

/// Simulator with incremental rate bookkeeping: after a jump only the rates of
/// the bonds touching the changed sites and the boundary slots are refreshed.
class Simulator {
 public:
  struct Event {
    double wait;
    Move move;
  };

  Simulator(const ModelParams& p, Configuration start, Xoshiro256 rng)
      : params_(p), state_(std::move(start)), rng_(rng), rates_(detail::slot_count(p.sites())) {
    p.check(state_);
    for (std::size_t s = 0; s < rates_.size(); ++s) refresh_slot(s);
    resum();
  }

  const Configuration& state() const noexcept { return state_; }
  double time() const noexcept { return time_; }
  double total_rate() const noexcept { return total_; }
  std::uint64_t events() const noexcept { return events_; }

  /// Draws the next event without applying it.
  Event draw() {
    const double wait = exponential(rng_, total_);
    const std::size_t slot = detail::select_slot(rates_, rng_.uniform() * total_);
    return {wait, detail::slot_move(slot, params_.sites())};
  }

  void apply_event(const Event& e) {
    time_ += e.wait;
    apply(e.move, state_);
    ++events_;
    const int sites = params_.sites();
    if (e.move.is_bulk()) {
      touch_site(e.move.bond);
      touch_site(e.move.bond + 1);
    } else if (e.move.kind == TransitionKind::BirthLeft || e.move.kind == TransitionKind::DeathLeft) {
      touch_site(0);
    } else {
      touch_site(sites - 1);
    }
    if (++since_resum_ >= kResumInterval) resum();
  }

  Event step() {
    const Event e = draw();
    apply_event(e);
    return e;
  }

 private:
  static constexpr int kResumInterval = 4096;

  void refresh_slot(std::size_t s) {
    const double r = rate(detail::slot_move(s, params_.sites()), state_, params_);
    total_ += r - rates_[s];
    rates_[s] = r;
  }

  // Slots whose rate depends on eta_site.
  void touch_site(int site) {
    const int sites = params_.sites();
    const auto bonds = static_cast<std::size_t>(sites - 1);
    for (int bond : {site - 1, site}) {
      if (bond < 0 || bond >= sites - 1) continue;
      refresh_slot(static_cast<std::size_t>(bond));
      refresh_slot(bonds + static_cast<std::size_t>(bond));
    }
    if (site == 0) {
      refresh_slot(2 * bonds);
      refresh_slot(2 * bonds + 1);
    }
    if (site == sites - 1) {
      refresh_slot(2 * bonds + 2);
      refresh_slot(2 * bonds + 3);
    }
  }

  void resum() {
    total_ = 0.0;
    for (double r : rates_) total_ += r;
    since_resum_ = 0;
  }

  ModelParams params_;
  Configuration state_;
  Xoshiro256 rng_;
  std::vector<double> rates_;
  double total_ = 0.0;
  double time_ = 0.0;
  std::uint64_t events_ = 0;
  int since_resum_ = 0;
};

/// max(10 N^2 / m, 100) time units.
inline double default_burn_in(const ModelParams& p) {
  return std::max(10.0 * p.sites() * p.sites() / p.m(), 100.0);
}

struct SimOptions {
  std::size_t batches_per_replica = 32;
  std::optional<Configuration> start;    // default: empty lattice
  std::vector<int> histogram_sites;      // zero-based sites with occupancy histograms
  std::size_t histogram_cells = 64;      // occupations 0..cells-1, plus one overflow cell
  unsigned threads = 0;                  // 0: hardware concurrency
};

/// Per-batch time averages of one replica.
struct ReplicaRecord {
  std::vector<std::vector<double>> density;                  // [batch][site]
  std::vector<std::vector<double>> current;                  // [batch][bond]
  std::vector<double> w1;                                    // [batch]
  std::vector<std::vector<std::vector<double>>> histograms;  // [batch][hist][cell]
  std::uint64_t events = 0;
};

struct SimEstimates {
  std::vector<Estimate> density;       // per site
  std::vector<Estimate> bond_current;  // per bond, net left-to-right crossings per unit time
  Estimate w1;                         // (b - d)(eta_1 - eta_N) with b, d the reservoir means
  double total_time = 0.0;
  double burn_in = 0.0;
  int replicas = 0;
  std::uint64_t events = 0;
  std::vector<ReplicaRecord> records;  // raw batch data, replica order
};

/// One replica: integrates the observables over [burn_in, total_time] split
/// into equal-duration batches.
inline ReplicaRecord run_replica(const ModelParams& p, double total_time, double burn_in,
                                 Xoshiro256 rng, const SimOptions& options) {
  const int sites = p.sites();
  const std::size_t batches = options.batches_per_replica;
  const double width = (total_time - burn_in) / static_cast<double>(batches);
  const double b_ref = 0.5 * (p.b1() + p.bN());
  const double d_ref = 0.5 * (p.d1() + p.dN());
  const std::size_t cells = options.histogram_cells + 1;

  ReplicaRecord rec;
  rec.density.assign(batches, std::vector<double>(static_cast<std::size_t>(sites), 0.0));
  rec.current.assign(batches, std::vector<double>(static_cast<std::size_t>(sites - 1), 0.0));
  rec.w1.assign(batches, 0.0);
  rec.histograms.assign(batches, std::vector<std::vector<double>>(options.histogram_sites.size(),
                                                                  std::vector<double>(cells, 0.0)));

  Simulator sim(p, options.start.value_or(Configuration(static_cast<std::size_t>(sites))), rng);

  auto batch_of = [&](double t) {
    const auto k = static_cast<std::size_t>((t - burn_in) / width);
    return std::min(k, batches - 1);
  };

  // Adds the holding interval [t0, t1) of `cfg` to the batch integrals.
  auto integrate = [&](const Configuration& cfg, double t0, double t1) {
    t0 = std::max(t0, burn_in);
    t1 = std::min(t1, total_time);
    const double w = entropy_production_w1(cfg, b_ref, d_ref);
    while (t0 < t1) {
      const std::size_t k = batch_of(t0);
      const double end = (k + 1 == batches) ? t1 : std::min(t1, burn_in + width * static_cast<double>(k + 1));
      const double dt = end - t0;
      auto& dens = rec.density[k];
      for (int i = 0; i < sites; ++i) dens[static_cast<std::size_t>(i)] += cfg[static_cast<std::size_t>(i)] * dt;
      rec.w1[k] += w * dt;
      for (std::size_t h = 0; h < options.histogram_sites.size(); ++h) {
        const Occupation n = cfg[static_cast<std::size_t>(options.histogram_sites[h])];
        rec.histograms[k][h][std::min<std::size_t>(n, cells - 1)] += dt;
      }
      t0 = end;
    }
  };

  while (true) {
    const double now = sim.time();
    const Simulator::Event e = sim.draw();
    const double next = now + e.wait;
    integrate(sim.state(), now, next);
    if (next >= total_time) break;
    sim.apply_event(e);
    if (next >= burn_in && e.move.is_bulk()) {
      const double sign = e.move.kind == TransitionKind::BulkRight ? 1.0 : -1.0;
      rec.current[batch_of(next)][static_cast<std::size_t>(e.move.bond)] += sign;
    }
  }
  rec.events = sim.events();

  for (std::size_t k = 0; k < batches; ++k) {
    for (double& x : rec.density[k]) x /= width;
    for (double& x : rec.current[k]) x /= width;
    rec.w1[k] /= width;
    for (auto& hist : rec.histograms[k]) {
      for (double& x : hist) x /= width;
    }
  }
  return rec;
}

namespace detail {

inline void validate_run(const ModelParams& p, double total_time, double burn_in, int replicas,
                         const SimOptions& options) {
  if (!std::isfinite(total_time) || !std::isfinite(burn_in)) {
    throw InvalidArgument("simulation times must be finite");
  }
  if (!(burn_in >= 0.0)) throw InvalidArgument("burn-in must be non-negative");
  if (!(total_time > burn_in)) throw InvalidArgument("measurement window is empty");
  if (replicas < 1) throw InvalidArgument("need at least one replica");
  if (options.batches_per_replica * static_cast<std::size_t>(replicas) < kMinBatches) {
    throw InvalidArgument("fewer than " + std::to_string(kMinBatches) + " batches in total");
  }
  for (int site : options.histogram_sites) {
    if (site < 0 || site >= p.sites()) throw InvalidArgument("histogram site out of range");
  }
  if (options.start) p.check(*options.start);
}

/// Runs replicas 0..replicas-1 (stream jumps 0..replicas-1) on a worker pool.
inline std::vector<ReplicaRecord> run_replicas(const ModelParams& p, double total_time, double burn_in,
                                               int replicas, const RngStream& stream,
                                               const SimOptions& options) {
  std::vector<ReplicaRecord> records(static_cast<std::size_t>(replicas));
  unsigned workers = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(replicas));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int r = next++; r < replicas; r = next++) {
      try {
        records[static_cast<std::size_t>(r)] =
            run_replica(p, total_time, burn_in, stream.engine(static_cast<std::uint64_t>(r)), options);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

}  // namespace detail

/// Time averages over [burn_in, total_time] of `replicas` independent runs,
/// with standard errors from the pooled batch means.
inline SimEstimates run_simulation(const ModelParams& p, double total_time, double burn_in, int replicas,
                                   const RngStream& stream, const SimOptions& options = {}) {
  detail::validate_run(p, total_time, burn_in, replicas, options);
  SimEstimates out;
  out.total_time = total_time;
  out.burn_in = burn_in;
  out.replicas = replicas;
  out.records = detail::run_replicas(p, total_time, burn_in, replicas, stream, options);

  const std::size_t per = options.batches_per_replica;
  auto pooled = [&](auto&& pick) {
    std::vector<double> values;
    values.reserve(per * out.records.size());
    for (const auto& rec : out.records) {
      for (std::size_t k = 0; k < per; ++k) values.push_back(pick(rec, k));
    }
    return batch_means(values, per);
  };
  for (int i = 0; i < p.sites(); ++i) {
    out.density.push_back(pooled([i](const ReplicaRecord& r, std::size_t k) {
      return r.density[k][static_cast<std::size_t>(i)];
    }));
  }
  for (int i = 0; i + 1 < p.sites(); ++i) {
    out.bond_current.push_back(pooled([i](const ReplicaRecord& r, std::size_t k) {
      return r.current[k][static_cast<std::size_t>(i)];
    }));
  }
  out.w1 = pooled([](const ReplicaRecord& r, std::size_t k) { return r.w1[k]; });
  for (const auto& rec : out.records) out.events += rec.events;
  return out;
}

/// Time-weighted occupation distribution at one site.
struct OccupancyHistogram {
  int site = 0;                               // zero-based
  std::vector<Estimate> cells;                // P(eta_site = n), n < cells.size()
  Estimate overflow;                          // P(eta_site >= cells.size())
  std::vector<std::vector<double>> batches;   // [batch][cell], overflow last
};

inline OccupancyHistogram occupancy_histogram(const ModelParams& p, int site, double total_time, double burn_in,
                                              const RngStream& stream, int replicas = 1,
                                              SimOptions options = {}) {
  if (site < 0 || site >= p.sites()) throw InvalidArgument("site out of range");
  options.histogram_sites = {site};
  const SimEstimates sim = run_simulation(p, total_time, burn_in, replicas, stream, options);
  OccupancyHistogram out;
  out.site = site;
  for (const auto& rec : sim.records) {
    for (const auto& batch : rec.histograms) out.batches.push_back(batch[0]);
  }
  const std::size_t per = options.batches_per_replica;
  auto cell = [&](std::size_t c) {
    std::vector<double> values;
    for (const auto& b : out.batches) values.push_back(b[c]);
    return batch_means(values, per);
  };
  for (std::size_t c = 0; c < options.histogram_cells; ++c) out.cells.push_back(cell(c));
  out.overflow = cell(options.histogram_cells);
  return out;
}

}  // namespace sip
