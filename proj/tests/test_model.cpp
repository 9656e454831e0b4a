#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "sip/analytic.hpp"
#include "sip/model.hpp"
#include "sip/verify.hpp"

using namespace sip;

namespace {

const Transition* find(const std::vector<Transition>& ts, TransitionKind kind, int bond = 0) {
  for (const auto& t : ts) {
    if (t.move.kind == kind && (!t.move.is_bulk() || t.move.bond == bond)) return &t;
  }
  return nullptr;
}

double f_site(const Configuration& c, std::size_t i) { return c[i]; }

}  // namespace

TEST(Configuration, IncrementDecrement) {
  Configuration c{1, 0};
  c.increment(1);
  EXPECT_EQ(c, (Configuration{1, 1}));
  c.decrement(0);
  EXPECT_THROW(c.decrement(0), InvalidArgument);
  c.set(0, std::numeric_limits<Occupation>::max());
  EXPECT_THROW(c.increment(0), InvalidArgument);
  EXPECT_EQ(Configuration({3, 0, 2}).total(), 5u);
}

TEST(ModelParams, Validation) {
  EXPECT_THROW(ModelParams::equilibrium(1, 1, 1, 2), InvalidArgument);
  EXPECT_THROW(ModelParams::equilibrium(3, 0, 1, 2), InvalidArgument);
  EXPECT_THROW(ModelParams(3, 1, {1, 0}, {1, 2}), InvalidArgument);
  EXPECT_THROW(ModelParams(3, 1, {1, 2}, {NAN, 2}), InvalidArgument);
  const auto p = ModelParams(3, 1, {1, 2}, {2, 4});
  EXPECT_TRUE(p.is_equilibrium());
  EXPECT_TRUE(p.has_finite_density());
  EXPECT_FALSE(ModelParams(3, 1, {3, 2}, {3, 2}).has_finite_density());
  EXPECT_THROW(p.check(Configuration{1, 2}), InvalidArgument);
}

TEST(EnumerateTransitions, EmptyLatticeHasOnlyBirths) {
  const auto p = ModelParams::equilibrium(2, 1, 1, 1);
  const auto ts = enumerate_transitions(Configuration{0, 0}, p);
  ASSERT_EQ(ts.size(), 2u);
  EXPECT_EQ(ts[0].move.kind, TransitionKind::BirthLeft);
  EXPECT_DOUBLE_EQ(ts[0].rate, 1.0);
  EXPECT_EQ(ts[0].target, (Configuration{1, 0}));
  EXPECT_EQ(ts[1].move.kind, TransitionKind::BirthRight);
  EXPECT_DOUBLE_EQ(ts[1].rate, 1.0);
}

TEST(EnumerateTransitions, ThreeSiteExample) {
  const auto p = ModelParams::equilibrium(3, 1, 1, 2);
  const auto ts = enumerate_transitions(Configuration{3, 0, 2}, p);
  EXPECT_EQ(ts.size(), 6u);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::BulkRight, 0)->rate, 3.0);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::BulkLeft, 1)->rate, 2.0);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::DeathLeft)->rate, 6.0);
  EXPECT_EQ(find(ts, TransitionKind::BulkLeft, 1)->target, (Configuration{3, 1, 1}));
}

TEST(EnumerateTransitions, TwoSiteExample) {
  const auto p = ModelParams::equilibrium(2, 2, 1, 2);
  const auto ts = enumerate_transitions(Configuration{1, 1}, p);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::BulkRight, 0)->rate, 3.0);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::BulkLeft, 0)->rate, 3.0);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::BirthLeft)->rate, 3.0);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::BirthRight)->rate, 3.0);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::DeathLeft)->rate, 2.0);
  EXPECT_DOUBLE_EQ(find(ts, TransitionKind::DeathRight)->rate, 2.0);
}

TEST(EnumerateTransitions, DimensionMismatch) {
  EXPECT_THROW(enumerate_transitions(Configuration{1, 2}, ModelParams::equilibrium(3, 1, 1, 2)), InvalidArgument);
}

TEST(EnumerateTransitions, StructuralProperties) {
  const auto p = ModelParams(4, 0.7, {0.3, 1.1}, {0.9, 0.4});
  for (const auto& x : random_configurations(11, 200, 4, 6)) {
    const auto ts = enumerate_transitions(x, p);
    double sum = 0.0;
    for (const auto& t : ts) {
      EXPECT_GT(t.rate, 0.0);
      sum += t.rate;
      long diff = 0;
      for (std::size_t i = 0; i < x.size(); ++i) diff += std::labs(long(t.target[i]) - long(x[i]));
      EXPECT_EQ(diff, t.move.is_bulk() ? 2 : 1);
      EXPECT_EQ(std::labs(long(t.target.total()) - long(x.total())), t.move.is_bulk() ? 0 : 1);
      EXPECT_EQ(applied(reverse(t.move), t.target), x);
    }
    EXPECT_NEAR(total_escape_rate(x, p), sum, 1e-12 * sum);
  }
}

TEST(GeneratorApply, ConstantIsAnnihilated) {
  const auto p = ModelParams(5, 1.3, {0.4, 2.0}, {1.7, 0.6});
  for (const auto& x : random_configurations(3, 100, 5, 20)) {
    EXPECT_EQ(generator_apply([](const Configuration&) { return 1.0; }, x, p), 0.0);
  }
}

TEST(GeneratorApply, BoundaryMomentExample) {
  const auto p = ModelParams::equilibrium(3, 1, 1, 2);
  const Configuration x{3, 0, 2};
  EXPECT_DOUBLE_EQ(generator_apply([](const Configuration& c) { return f_site(c, 0); }, x, p), -5.0);
  EXPECT_DOUBLE_EQ(generator_apply([](const Configuration& c) { return f_site(c, 1); }, x, p), 5.0);
}

TEST(GeneratorApply, InteriorMomentClosure) {
  for (int n : {3, 4, 6}) {
    const auto p = ModelParams(n, 1.7, {0.5, 1.0}, {0.2, 0.9});
    for (const auto& x : random_configurations(7 + n, 100, n, 20)) {
      for (int i = 1; i + 1 < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double lhs = generator_apply([k](const Configuration& c) { return f_site(c, k); }, x, p);
        const double rhs = p.m() * (double(x[k - 1]) + double(x[k + 1]) - 2.0 * x[k]);
        EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs)));
      }
    }
  }
}

TEST(GeneratorApply, BoundaryMomentsGeneralRates) {
  const auto p = ModelParams(4, 1.5, {0.5, 1.2}, {0.3, 0.8});
  for (const auto& x : random_configurations(5, 100, 4, 20)) {
    const double l1 = generator_apply([](const Configuration& c) { return f_site(c, 0); }, x, p);
    EXPECT_NEAR(l1, p.b1() * p.m() + (p.b1() - p.d1() - p.m()) * x[0] + p.m() * x[1], 1e-11);
    const double ln = generator_apply([](const Configuration& c) { return f_site(c, 3); }, x, p);
    EXPECT_NEAR(ln, p.bN() * p.m() + (p.bN() - p.dN() - p.m()) * x[3] + p.m() * x[2], 1e-11);
  }
}

TEST(PerturbedParams, Examples) {
  EXPECT_EQ(perturbed_params(1, 2, 0, 3, 1), ModelParams::equilibrium(3, 1, 1, 2));
  const auto p = perturbed_params(1, 2, 0.01, 3, 1);
  EXPECT_DOUBLE_EQ(p.b1(), 1.01);
  EXPECT_DOUBLE_EQ(p.bN(), 0.99);
  EXPECT_EQ(p.d1(), 2.0);
  EXPECT_EQ(p.dN(), 2.0);
  EXPECT_THROW(perturbed_params(1, 2, 1.5, 3, 1), InvalidArgument);
  EXPECT_THROW(perturbed_params(1, 2, -1.0, 3, 1), InvalidArgument);
  EXPECT_THROW(perturbed_params(1, 2, 1.0, 3, 1), InvalidArgument);
}

TEST(LocalForce, Values) {
  EXPECT_EQ(local_force_F1({TransitionKind::BirthLeft}), 1);
  EXPECT_EQ(local_force_F1({TransitionKind::DeathRight}), 1);
  EXPECT_EQ(local_force_F1({TransitionKind::DeathLeft}), -1);
  EXPECT_EQ(local_force_F1({TransitionKind::BirthRight}), -1);
  EXPECT_EQ(local_force_F1({TransitionKind::BulkRight, 0}), 0);
  EXPECT_EQ(local_force_F1({TransitionKind::BulkLeft, 1}), 0);
}

TEST(LocalForce, AntisymmetricUnderReversal) {
  for (auto kind : {TransitionKind::BulkRight, TransitionKind::BulkLeft, TransitionKind::BirthLeft,
                    TransitionKind::DeathLeft, TransitionKind::BirthRight, TransitionKind::DeathRight}) {
    const bool bulk = kind == TransitionKind::BulkRight || kind == TransitionKind::BulkLeft;
    const Move m{kind, bulk ? 1 : 0};
    EXPECT_EQ(local_force_F1(m), -local_force_F1(reverse(m)));
    EXPECT_DOUBLE_EQ(local_force(m, 0.3), -local_force(reverse(m), 0.3));
    EXPECT_EQ(reverse(reverse(m)), m);
  }
}

TEST(LocalForce, FirstOrderMatchesF1) {
  const double eps = 1e-6;
  for (auto kind : {TransitionKind::BirthLeft, TransitionKind::DeathLeft, TransitionKind::BirthRight,
                    TransitionKind::DeathRight}) {
    EXPECT_NEAR(local_force({kind}, eps), eps * local_force_F1({kind}), 1e-12);
  }
}

TEST(RateRatio, BulkIdentity) {
  const auto p = ModelParams(5, 0.6, {0.4, 1.0}, {0.7, 1.5});
  const auto check = check_rate_ratio(p, random_configurations(1, 200, 5, 20));
  EXPECT_TRUE(check.passed) << check.value;
}

TEST(LocalDetailedBalance, LogRatioDecomposition) {
  for (double eps : {-0.3, 0.0, 0.01, 0.5}) {
    const auto check = check_local_detailed_balance(1.0, 2.0, eps, 4, 1.5, random_configurations(2, 200, 4, 20));
    EXPECT_TRUE(check.passed) << eps << " " << check.value;
  }
}

TEST(LocalDetailedBalance, LeftBirthRatioIsScaledEquilibriumRatio) {
  const double b = 1.0, d = 2.0, eps = 0.2;
  const auto pe = perturbed_params(b, d, eps, 3, 1.0);
  const auto p0 = ModelParams::equilibrium(3, 1.0, b, d);
  const Move birth{TransitionKind::BirthLeft};
  for (const auto& x : random_configurations(4, 50, 3, 10)) {
    const Configuration y = applied(birth, x);
    const double ratio_eps = rate(birth, x, pe) / rate(reverse(birth), y, pe);
    const double ratio_0 = rate(birth, x, p0) / rate(reverse(birth), y, p0);
    EXPECT_NEAR(ratio_eps, (1.0 + eps) * ratio_0, 1e-14 * ratio_eps);
  }
}

TEST(EntropyProduction, Examples) {
  EXPECT_EQ(entropy_production_w1(Configuration{4, 4, 4, 4}, 1, 2), 0.0);
  EXPECT_EQ(entropy_production_w1(Configuration{3, 0, 2}, 1, 2), -1.0);
  EXPECT_EQ(entropy_production_w1(Configuration{0, 5, 5, 5, 7}, 1, 2), 7.0);
}

TEST(EntropyProduction, EqualsMeanForceOverTransitions) {
  const auto p = ModelParams::equilibrium(4, 1.3, 0.8, 1.9);
  for (const auto& x : random_configurations(9, 100, 4, 15)) {
    double s = 0.0;
    for_each_transition(x, p, [&](Move m, double r) { s += r * local_force_F1(m); });
    EXPECT_NEAR(s, entropy_production_w1(x, 0.8, 1.9), 1e-12);
  }
}

TEST(Generator, LinearFormMatchesGenericApply) {
  const auto p = ModelParams(4, 1.5, {0.7, 1.9}, {0.4, 1.3});
  const LinearCorrection c{{0.25, -1.5, 3.0, 0.75}};
  for (const auto& x : {Configuration{0, 0, 0, 0}, Configuration{3, 0, 2, 5}, Configuration{1, 7, 0, 2}}) {
    EXPECT_NEAR(generator_apply_linear(c, x, p), generator_apply([&](const Configuration& y) { return c.apply(y); }, x, p),
                1e-12);
  }
  EXPECT_THROW(generator_apply_linear(LinearCorrection{{1.0, 2.0}}, Configuration{0, 0, 0, 0}, p), InvalidArgument);
}
