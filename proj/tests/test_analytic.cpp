#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sip/analytic.hpp"
#include "sip/exactsolve.hpp"
#include "sip/verify.hpp"

using namespace sip;

namespace {

// Oracle: sum of the recursion gamma(n+1) = gamma(n) theta (m+n)/(n+1), started at 1.
double series_normaliser(double theta, double m) {
  double term = 1.0, sum = 1.0;
  for (int n = 0; n < 100000; ++n) {
    term *= theta * (m + n) / (n + 1.0);
    sum += term;
    if (n > m && term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace

TEST(MarginalPmf, GeometricAtUnitM) {
  EXPECT_NEAR(marginal_pmf(0.5, 1.0, 0), 0.5, 1e-15);
  EXPECT_NEAR(marginal_pmf(0.5, 1.0, 2), 0.125, 1e-15);
  for (unsigned long n = 0; n < 30; ++n) EXPECT_NEAR(marginal_pmf(0.5, 1.0, n), std::pow(0.5, n + 1.0), 1e-15);
}

TEST(MarginalPmf, PartitionFunction) {
  EXPECT_DOUBLE_EQ(partition_function(0.5, 2.0), 4.0);
  EXPECT_NEAR(marginal_pmf(0.5, 2.0, 0), 0.25, 1e-15);
  for (double theta : {0.1, 0.5, 0.9}) {
    for (double m : {0.5, 1.0, 2.0, 5.0}) {
      EXPECT_NEAR(partition_function(theta, m), series_normaliser(theta, m),
                  1e-10 * partition_function(theta, m));
    }
  }
}

TEST(MarginalPmf, Normalisation) {
  for (double theta : {0.1, 0.5, 0.9}) {
    for (double m : {0.5, 1.0, 2.0, 5.0}) {
      const auto cap = marginal_quantile(theta, m, 1e-14);
      double s = 0.0;
      for (unsigned long n = 0; n <= cap; ++n) s += marginal_pmf(theta, m, n);
      EXPECT_NEAR(s, 1.0, 1e-10) << theta << " " << m;
    }
  }
}

TEST(MarginalPmf, Recursion) {
  for (double theta : {0.2, 0.7}) {
    for (double m : {0.5, 3.0}) {
      for (unsigned long n = 0; n <= 100; ++n) {
        const double ratio = marginal_pmf(theta, m, n + 1) / marginal_pmf(theta, m, n);
        EXPECT_NEAR(ratio, theta * (m + n) / (n + 1.0), 1e-12 * ratio);
      }
    }
  }
}

TEST(MarginalPmf, DetailedBalanceFactorisation) {
  const double theta = 0.6, m = 1.7;
  for (unsigned long a = 1; a <= 30; ++a) {
    for (unsigned long b = 0; b <= 30; ++b) {
      const double lhs = marginal_pmf(theta, m, a) * marginal_pmf(theta, m, b) * a * (m + b);
      const double rhs = marginal_pmf(theta, m, a - 1) * marginal_pmf(theta, m, b + 1) * (b + 1.0) * (m + a - 1.0);
      EXPECT_NEAR(lhs, rhs, 1e-12 * lhs);
    }
  }
}

TEST(MarginalPmf, LargeOccupationStaysFinite) {
  EXPECT_GT(marginal_pmf(0.99, 2.0, 500), 0.0);
  EXPECT_TRUE(std::isfinite(log_marginal_pmf(0.5, 1.0, 5000)));
}

TEST(MarginalPmf, RejectsBadTheta) {
  EXPECT_THROW(marginal_pmf(0.0, 1.0, 1), InvalidArgument);
  EXPECT_THROW(marginal_pmf(1.0, 1.0, 1), InvalidArgument);
  EXPECT_THROW(marginal_pmf(-0.2, 1.0, 1), InvalidArgument);
  EXPECT_THROW(partition_function(1.5, 1.0), InvalidArgument);
}

TEST(SingleSitePotential, IsMinusLogPmf) {
  for (unsigned long n = 0; n <= 50; ++n) {
    EXPECT_NEAR(single_site_potential(0.3, 2.5, n), -std::log(marginal_pmf(0.3, 2.5, n)), 1e-10);
  }
  EXPECT_NEAR(single_site_potential(0.5, 1.0, 0), std::log(2.0), 1e-15);
}

TEST(SingleSitePotential, DiscreteGradient) {
  const double theta = 0.4, m = 1.5;
  for (unsigned long n = 1; n <= 60; ++n) {
    const double grad = single_site_potential(theta, m, n) - single_site_potential(theta, m, n - 1);
    EXPECT_NEAR(grad, std::log(n / (m + n - 1.0)) - std::log(theta), 1e-11);
  }
}

TEST(MeanOccupancy, Values) {
  EXPECT_DOUBLE_EQ(mean_occupancy(0.5, 1.0), 1.0);
  EXPECT_EQ(mean_occupancy(0.0, 1.0), 0.0);
  EXPECT_THROW(mean_occupancy(1.0, 1.0), InvalidArgument);
  for (double theta : {0.1, 0.5, 0.8}) {
    for (double m : {0.5, 2.0}) {
      double s = 0.0;
      const auto cap = marginal_quantile(theta, m, 1e-16);
      for (unsigned long n = 0; n <= cap; ++n) s += n * marginal_pmf(theta, m, n);
      EXPECT_NEAR(s, mean_occupancy(theta, m), 1e-10);
    }
  }
}

TEST(ThetaFromDensity, Values) {
  EXPECT_DOUBLE_EQ(theta_from_density(1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(theta_from_density(1.0 * 1.0 / (2.0 - 1.0), 1.0), 0.5);
  EXPECT_THROW(theta_from_density(0.0, 1.0), InvalidArgument);
  EXPECT_THROW(theta_from_density(-1.0, 1.0), InvalidArgument);
  for (int k = 1; k <= 9; ++k) {
    const double theta = 0.1 * k;
    for (double m : {0.5, 1.0, 3.0}) EXPECT_NEAR(theta_from_density(mean_occupancy(theta, m), m), theta, 1e-12);
  }
}

TEST(DensityProfile, GeneralAtEquilibrium) {
  const auto prof = density_profile_general(ModelParams::equilibrium(3, 1, 1, 2));
  EXPECT_DOUBLE_EQ(prof.alpha, 1.0);
  EXPECT_EQ(prof.beta, 0.0);
  for (int n : {2, 5, 9}) {
    for (double m : {0.5, 2.0}) {
      const auto p = density_profile_general(ModelParams::equilibrium(n, m, 0.7, 1.9));
      EXPECT_EQ(p.beta, 0.0);
      EXPECT_NEAR(p.alpha, 0.7 * m / (1.9 - 0.7), 1e-13);
    }
  }
}

TEST(DensityProfile, GeneralAgreesWithWeakToSecondOrder) {
  // The first-order slope is -0.01 at eps = 0.01; the exact slope differs at O(eps^2).
  const auto general = density_profile_general(perturbed_params(1, 2, 0.01, 3, 1));
  EXPECT_NEAR(general.beta, -0.01, 1e-6);
  double previous = 0.0;
  for (double eps : {0.04, 0.02, 0.01}) {
    const auto g = density_profile_general(perturbed_params(1, 2, eps, 3, 1));
    const auto w = density_profile_weak(1, 2, 1, 3, eps);
    const double gap = std::abs(g.beta - w.beta) + std::abs(g.alpha - w.alpha);
    if (previous > 0.0) EXPECT_NEAR(previous / gap, 4.0, 0.2);
    previous = gap;
  }
}

TEST(DensityProfile, StationarityEquations) {
  for (const auto& p : {ModelParams(4, 1.0, {0.5, 1.2}, {0.3, 0.8}), ModelParams(7, 2.5, {1.0, 3.0}, {0.1, 4.0}),
                        ModelParams(2, 0.3, {0.2, 0.5}, {0.4, 0.6})}) {
    const auto prof = density_profile_general(p);
    const int n = p.sites();
    const double m = p.m();
    auto rho = [&](int i) { return prof.density(i); };
    for (int i = 2; i < n; ++i) EXPECT_NEAR(rho(i - 1) + rho(i + 1) - 2.0 * rho(i), 0.0, 1e-12);
    EXPECT_NEAR(p.b1() * m + (p.b1() - p.d1() - m) * rho(1) + m * rho(2), 0.0, 1e-12);
    EXPECT_NEAR(p.bN() * m + (p.bN() - p.dN() - m) * rho(n) + m * rho(n - 1), 0.0, 1e-12);
  }
}

TEST(DensityProfile, DegenerateDenominator) {
  // den = (bN-dN)(b1-d1)N + (dN+d1-bN-b1)m + (b1-d1)(dN-bN) vanishes at b1 = d1, bN = dN.
  EXPECT_THROW(density_profile_general(ModelParams::equilibrium(3, 1, 2, 2)), DegenerateDenominator);
}

TEST(DensityProfile, WeakExamples) {
  const auto zero = density_profile_weak(1, 2, 1, 3, 0.0);
  EXPECT_DOUBLE_EQ(zero.alpha, 1.0);
  EXPECT_EQ(zero.beta, 0.0);
  EXPECT_DOUBLE_EQ(weak_profile_denominator(1, 2, 1, 3), 4.0);
  const auto w = density_profile_weak(1, 2, 1, 3, 0.01);
  EXPECT_NEAR(w.alpha, 1.02, 1e-15);
  EXPECT_NEAR(w.beta, -0.01, 1e-15);
  const auto rho = w.densities(3);
  EXPECT_NEAR(rho[0], 1.01, 1e-15);
  EXPECT_NEAR(rho[1], 1.00, 1e-15);
  EXPECT_NEAR(rho[2], 0.99, 1e-15);
  EXPECT_THROW(density_profile_weak(2, 2, 1, 3, 0.1), InvalidArgument);
  EXPECT_THROW(density_profile_weak(3, 2, 1, 3, 0.1), InvalidArgument);
}

TEST(DensityProfile, WeakMidpointIsEpsIndependent) {
  for (int n : {3, 5, 11}) {
    for (double eps : {-0.2, 0.05, 0.3}) {
      EXPECT_NEAR(density_profile_weak(0.5, 2, 1.5, n, eps).density((n + 1) / 2), 0.5 * 1.5 / 1.5, 1e-13);
    }
  }
}

TEST(DensityProfile, WeakIsDerivativeOfGeneral) {
  // Central difference of the exact profile in eps is an independent oracle for the linear term.
  const double b = 0.7, d = 1.6, m = 1.3, h = 1e-5;
  const int n = 6;
  const auto plus = density_profile_general(perturbed_params(b, d, h, n, m));
  const auto minus = density_profile_general(perturbed_params(b, d, -h, n, m));
  const auto unit = density_profile_weak(b, d, m, n, 1.0);
  const auto base = density_profile_weak(b, d, m, n, 0.0);
  EXPECT_NEAR((plus.alpha - minus.alpha) / (2 * h), unit.alpha - base.alpha, 1e-7);
  EXPECT_NEAR((plus.beta - minus.beta) / (2 * h), unit.beta, 1e-7);
}

TEST(StationaryCurrent, Values) {
  EXPECT_EQ(stationary_current(ModelParams::equilibrium(4, 1, 1, 2)), 0.0);
  EXPECT_NEAR(stationary_current(perturbed_params(1, 2, 0.01, 3, 1)), -0.01, 1e-6);
  // beta < 0 when the left reservoir is richer
  EXPECT_LT(stationary_current(perturbed_params(1, 2, 0.1, 5, 1)), 0.0);
  EXPECT_GT(stationary_current(perturbed_params(1, 2, -0.1, 5, 1)), 0.0);
}

TEST(StationaryCurrent, ScalesWithEpsAndInverseN) {
  const auto beta = [](int n, double eps) { return density_profile_weak(1, 2, 1, n, eps).beta; };
  EXPECT_NEAR(beta(10, 0.02) / beta(10, 0.01), 2.0, 1e-12);
  EXPECT_NEAR(beta(10, 0.01) / beta(20, 0.01), weak_profile_denominator(1, 2, 1, 20) /
                                                   weak_profile_denominator(1, 2, 1, 10), 1e-12);
  EXPECT_NEAR(beta(1000, 0.01) / beta(2000, 0.01), 2.0, 2e-3);
}

TEST(LeqLogWeight, Values) {
  const std::vector<double> flat(3, 0.5);
  const Configuration x{2, 0, 5};
  double eq = 0.0;
  for (auto n : x.occupations()) eq += std::log(marginal_pmf(0.5, 1.0, n));
  EXPECT_NEAR(leq_log_weight(flat, 1.0, x), eq, 1e-13);
  EXPECT_NEAR(leq_log_weight(std::vector<double>{0.5, 0.5}, 1.0, Configuration{0, 0}), std::log(0.25), 1e-15);
  EXPECT_THROW(leq_log_weight(std::vector<double>{0.5, 1.2}, 1.0, Configuration{0, 0}), InvalidArgument);
  EXPECT_THROW(leq_log_weight(flat, 1.0, Configuration{0, 0}), InvalidArgument);
}

TEST(LeqLogWeight, SumsToOneOnBox) {
  const std::vector<double> theta{0.3, 0.45};
  const int cap = static_cast<int>(marginal_quantile(0.45, 1.5, 1e-12));
  const auto space = build_space(2, cap);
  double s = 0.0;
  for (StateIndex k = 0; k < space.size(); ++k) s += std::exp(leq_log_weight(theta, 1.5, space.state(k)));
  EXPECT_NEAR(s, 1.0, 1e-10);
}

TEST(LeqCoefficients, Examples) {
  const auto c = leq_first_order_coefficients(1, 2, 1, 3);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_NEAR(c[0], 0.5, 1e-15);
  EXPECT_NEAR(c[1], 0.0, 1e-15);
  EXPECT_NEAR(c[2], -0.5, 1e-15);
  EXPECT_THROW(leq_first_order_coefficients(2, 2, 1, 3), InvalidArgument);
}

TEST(LeqCoefficients, ExtraBoundarySiteCase) {
  for (int n : {2, 3, 6}) {
    for (double b : {0.5, 2.0}) {
      for (double m : {1.0, 3.0}) {
        EXPECT_LT(max_abs_difference(leq_first_order_coefficients(b, b + m, m, n), extra_boundary_site_coefficients(n)),
                  1e-12);
      }
    }
  }
}

TEST(LeqCoefficients, SumZeroAndAntisymmetric) {
  for (int n : {2, 3, 4, 7}) {
    const auto c = leq_first_order_coefficients(0.4, 1.1, 2.2, n);
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      s += c[i];
      EXPECT_NEAR(c[i], -c[c.size() - 1 - i], 1e-14);
    }
    EXPECT_NEAR(s, 0.0, 1e-14);
  }
}

TEST(LeqCoefficients, ClosedFormAndIntermediates) {
  const double b = 0.6, d = 1.4, m = 0.8;
  const int n = 5;
  EXPECT_LT(max_abs_difference(leq_first_order_coefficients(b, d, m, n), leq_closed_form_coefficients(b, d, m, n)), 1e-12);
  const auto leq = leq_expansion(b, d, m, n);
  EXPECT_NEAR(leq.theta0, b / d, 1e-15);
  EXPECT_NEAR(leq.rho0, b * m / (d - b), 1e-15);
  // theta_i(eps) from the exact profile, differentiated numerically
  const double h = 1e-5;
  const auto plus = density_profile_general(perturbed_params(b, d, h, n, m)).densities(n);
  const auto minus = density_profile_general(perturbed_params(b, d, -h, n, m)).densities(n);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    EXPECT_NEAR((plus[k] - minus[k]) / (2 * h), leq.rho1[k], 1e-7);
    const double dtheta = (theta_from_density(plus[k], m) - theta_from_density(minus[k], m)) / (2 * h);
    EXPECT_NEAR(dtheta, leq.theta1[k], 1e-7);
  }
}

TEST(LeqCoefficients, NormaliserContributionVanishes) {
  for (int n : {2, 3, 8}) {
    const auto leq = leq_expansion(1.0, 2.5, 1.7, n);
    EXPECT_NEAR(leq_log_normalizer_derivative(leq, 1.7), 0.0, 1e-13);
  }
  // Independent check: d/deps sum_i log Z_{theta_i(eps)} by central differences.
  const double b = 1.0, d = 2.5, m = 1.7, h = 1e-5;
  const int n = 4;
  auto log_z = [&](double eps) {
    double s = 0.0;
    for (double r : density_profile_general(perturbed_params(b, d, eps, n, m)).densities(n)) {
      s += std::log(partition_function(theta_from_density(r, m), m));
    }
    return s;
  };
  EXPECT_NEAR((log_z(h) - log_z(-h)) / (2 * h), 0.0, 1e-7);
}

TEST(McLennan, Example) {
  const auto mc = mclennan_coefficients(1, 2, 1, 3);
  EXPECT_DOUBLE_EQ(mc.A, 1.0);
  EXPECT_DOUBLE_EQ(mc.B, -0.5);
  EXPECT_NEAR(mc.correction[0], 0.5, 1e-15);
  EXPECT_NEAR(mc.correction[1], 0.0, 1e-15);
  EXPECT_NEAR(mc.correction[2], -0.5, 1e-15);
}

TEST(McLennan, EqualsLeqOnGrid) {
  for (int n = 2; n <= 10; ++n) {
    for (double m : {0.5, 1.0, 2.0}) {
      for (auto [b, d] : {std::pair{1.0, 2.0}, {1.0, 3.0}, {2.0, 5.0}, {0.3, 0.35}}) {
        EXPECT_TRUE(check_mclennan_equals_leq(b, d, m, n).passed) << n << " " << m << " " << b << " " << d;
      }
    }
  }
}

TEST(McLennan, SumOfCoefficients) {
  for (int n = 2; n <= 9; ++n) {
    const auto mc = mclennan_coefficients(1.5, 0.5, 0.8, n);  // b > d is allowed here
    EXPECT_NEAR(n * mc.A + mc.B * n * (n + 1) / 2.0, 0.0, 1e-13);
  }
}

TEST(McLennan, Errors) {
  EXPECT_THROW(mclennan_coefficients(1, 1, 1, 3), DegenerateDenominator);
  EXPECT_THROW(mclennan_coefficients(1, 2, 0, 3), InvalidArgument);
  // N - 1 - 2m/(b-d) = 0 at b - d = 1, m = 1, N = 3
  EXPECT_THROW(mclennan_coefficients(2, 1, 1, 3), DegenerateDenominator);
}
