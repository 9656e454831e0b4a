#pragma once

// Batch-means error estimates for time-averaged observables.

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sip/error.hpp"

namespace sip {

inline constexpr std::size_t kMinBatches = 20;

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;  // standard error of the mean
  std::size_t batches = 0;
  double lag1 = 0.0;       // lag-1 autocorrelation of consecutive batch means

  /// |mean - target| in units of the standard error.
  double z(double target) const {
    const double diff = std::abs(mean - target);
    if (std_error == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / std_error;
  }
  bool within(double target, double sigmas) const { return z(target) <= sigmas; }
};

/// Mean and standard error from equally weighted batch means. Batches from
/// different replicas may be concatenated; `segment` is the number of
/// batches per replica, used so the lag-1 correlation never pairs batches
/// from different replicas.
inline Estimate batch_means(std::span<const double> values, std::size_t segment = 0) {
  const std::size_t n = values.size();
  if (n < kMinBatches) {
    throw InvalidArgument("batch means need at least " + std::to_string(kMinBatches) + " batches");
  }
  Estimate e;
  e.batches = n;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - e.mean) * (v - e.mean);
  const double var = ss / static_cast<double>(n - 1);
  e.std_error = std::sqrt(var / static_cast<double>(n));
  if (segment == 0) segment = n;
  double cov = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (i % segment == 0) continue;
    cov += (values[i] - e.mean) * (values[i - 1] - e.mean);
    ++pairs;
  }
  e.lag1 = (pairs > 0 && ss > 0.0) ? (cov / static_cast<double>(pairs)) / (ss / static_cast<double>(n)) : 0.0;
  return e;
}

struct ChiSquareResult {
  double statistic;  // Hotelling T^2 of the batch-mean vector against the reference
  double p_value;    // from the exact F transform of T^2 under Gaussian batches
  std::size_t dof;   // number of compared cells
  std::size_t batches;
  bool passes(double level) const { return p_value >= level; }
};

/// Goodness-of-fit of a time-weighted histogram against reference cell
/// probabilities. Each row of `batches` holds one batch's cell fractions; the
/// cell covariance is estimated from the batches, so serial correlation
/// within a batch is accounted for. T^2 (n-p)/(p(n-1)) ~ F(p, n-p).
inline ChiSquareResult histogram_chi_square(const std::vector<std::vector<double>>& batches,
                                            std::span<const double> reference) {
  const std::size_t n = batches.size();
  const std::size_t p = reference.size();
  if (p == 0) throw InvalidArgument("no histogram cells to compare");
  if (n <= p + 1) throw InvalidArgument("need more batches than histogram cells");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t b = 0; b < n; ++b) {
    if (batches[b].size() < p) throw InvalidArgument("batch histogram shorter than reference");
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = batches[b][j];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::VectorXd diff(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) diff[static_cast<Eigen::Index>(j)] = mean[static_cast<Eigen::Index>(j)] - reference[j];
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov / static_cast<double>(n));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SolverError("batch covariance of histogram is not positive definite");
  }
  const double t2 = diff.dot(ldlt.solve(diff));
  const double np = static_cast<double>(n), pp = static_cast<double>(p);
  const double f = t2 * (np - pp) / (pp * (np - 1.0));
  const boost::math::fisher_f dist(pp, np - pp);
  return {t2, boost::math::cdf(boost::math::complement(dist, f)), p, n};
}

}  // namespace sip
