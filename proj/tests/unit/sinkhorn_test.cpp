#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gwkit/error.hpp"
#include "gwkit/sinkhorn.hpp"
#include "test_support.hpp"

namespace gwkit {
namespace {

Matrix swapCost() {
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  return c;
}

SolverConfig withEpsilon(double eps) {
  SolverConfig cfg;
  cfg.epsilon = eps;
  return cfg;
}

TEST(GibbsKernel, ZeroCostIsAllOnes) {
  EXPECT_EQ(gibbsKernel(Matrix::Zero(3, 4), 1.0), Matrix::Ones(3, 4));
}

TEST(GibbsKernel, HandEvaluation) {
  const Matrix k = gibbsKernel(swapCost(), 1.0);
  EXPECT_EQ(k(0, 0), 1.0);
  EXPECT_NEAR(k(0, 1), 0.36787944117144233, 1e-16);
  EXPECT_NEAR(k(1, 0), 0.3679, 1e-4);
}

TEST(GibbsKernel, ExtremeRatioUnderflows) {
  Matrix c(1, 2);
  c << 0, 100;
  const Matrix k = gibbsKernel(c, 0.01);
  EXPECT_EQ(k(0, 0), 1.0);
  EXPECT_EQ(k(0, 1), 0.0);
  EXPECT_TRUE(needsLogDomain(c, 0.01));
}

TEST(GibbsKernel, RejectsBadArguments) {
  EXPECT_THROW(gibbsKernel(swapCost(), 0.0), InputError);
  EXPECT_THROW(gibbsKernel(swapCost(), -1.0), InputError);
  Matrix c = swapCost();
  c(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(gibbsKernel(c, 1.0), InputError);
}

TEST(GibbsKernel, ScalingEquivarianceIsExactForPowersOfTwo) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix c = testing::randomMatrix(rng, 5, 7, 0.0, 3.0);
    for (double s : {0.25, 2.0, 1024.0}) {
      ASSERT_EQ(gibbsKernel(c * s, 0.7 * s), gibbsKernel(c, 0.7));
    }
  }
}

TEST(GibbsKernel, ScalingEquivarianceForGeneralFactors) {
  // Non-dyadic scales perturb c/eps by a rounding or two.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix c = testing::randomMatrix(rng, 4, 4, 0.0, 3.0);
    const double s = scale(rng);
    ASSERT_TRUE(gibbsKernel(c * s, 0.7 * s).isApprox(gibbsKernel(c, 0.7), 1e-14));
  }
}

TEST(DefaultEpsilon, OnePercentOfMean) {
  EXPECT_DOUBLE_EQ(defaultEpsilon(swapCost()), 0.005);
  EXPECT_EQ(defaultEpsilon(Matrix::Zero(2, 2)), 1.0);
}

TEST(SinkhornSolve, LargeEpsilonMatchesClosedForm) {
  // Symmetric 2x2 plan [[t, 1/2 - t], [1/2 - t, t]] with
  // t / (1/2 - t) = exp(1/eps), i.e. t = 1 / (2 (1 + exp(-1/eps))).
  const auto u = uniformDistribution(2);
  const auto r = sinkhornSolve(swapCost(), u, u, withEpsilon(10.0));
  ASSERT_TRUE(r.converged);
  const double t = 0.5 / (1.0 + std::exp(-0.1));
  EXPECT_NEAR(r.coupling.plan(0, 0), t, 1e-9);
  EXPECT_NEAR(r.coupling.plan(1, 1), t, 1e-9);
  EXPECT_NEAR(r.coupling.plan(0, 1), 0.5 - t, 1e-9);
  EXPECT_NEAR(t, 0.2624896, 1e-7);
  EXPECT_LE(r.coupling.marginalViolation(), 1e-6);
}

TEST(SinkhornSolve, SmallEpsilonApproachesExactTransport) {
  const auto u = uniformDistribution(2);
  const auto r = sinkhornSolve(swapCost(), u, u, withEpsilon(0.01));
  ASSERT_TRUE(r.converged);
  EXPECT_TRUE(r.logDomain);
  EXPECT_NEAR(r.coupling.plan(0, 0), 0.5, 1e-6);
  EXPECT_NEAR(r.coupling.plan(1, 1), 0.5, 1e-6);
  EXPECT_NEAR(r.coupling.plan(0, 1), 0.0, 1e-6);
}

TEST(SinkhornSolve, ZeroCostGivesProductCoupling) {
  const auto u = uniformDistribution(2);
  for (double eps : {1e-3, 1.0, 1e3}) {
    const auto r = sinkhornSolve(Matrix::Zero(2, 2), u, u, withEpsilon(eps));
    ASSERT_TRUE(r.converged);
    EXPECT_EQ(r.coupling.plan, Matrix::Constant(2, 2, 0.25));
  }
}

TEST(SinkhornSolve, DimensionMismatch) {
  EXPECT_THROW(sinkhornSolve(swapCost(), uniformDistribution(3), uniformDistribution(2),
                             withEpsilon(1.0)),
               InputError);
  EXPECT_THROW(sinkhornSolve(swapCost(), uniformDistribution(2), uniformDistribution(2),
                             withEpsilon(-1.0)),
               InputError);
}

TEST(SinkhornSolve, StandardDomainUnderflowIsTyped) {
  Matrix c(2, 2);
  c << 0, 1e4, 1e4, 1e4;
  SolverConfig cfg = withEpsilon(1.0);
  cfg.autoLogDomain = false;
  Vector w(2);
  w << 0.5, 0.5;
  try {
    // Row 1 of the kernel is entirely zero.
    sinkhornSolve(c, DiscreteDistribution(w), DiscreteDistribution(w), cfg);
    FAIL() << "expected KernelUnderflowError";
  } catch (const KernelUnderflowError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
  cfg.logDomain = true;
  const auto r = sinkhornSolve(c, DiscreteDistribution(w), DiscreteDistribution(w), cfg);
  EXPECT_TRUE(std::isfinite(r.coupling.plan.sum()));
}

TEST(SinkhornSolve, ReportsNonConvergence) {
  const auto u = uniformDistribution(2);
  SolverConfig cfg = withEpsilon(0.3);
  cfg.maxSinkhornIters = 1;
  cfg.marginalTol = 1e-15;
  const auto r = sinkhornSolve(swapCost(), DiscreteDistribution(Vector::LinSpaced(2, 0.2, 0.8)),
                               u, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_GT(r.marginalError, 0.0);
}

TEST(SinkhornSolve, PlanHasGibbsForm) {
  std::mt19937_64 rng(5);
  const Matrix c = testing::randomMatrix(rng, 4, 3);
  const auto mu = testing::randomDistribution(rng, 4);
  const auto nu = testing::randomDistribution(rng, 3);
  for (bool logDomain : {false, true}) {
    SolverConfig cfg = withEpsilon(0.2);
    cfg.logDomain = logDomain;
    const auto r = sinkhornSolve(c, mu, nu, cfg);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 3; ++j)
        EXPECT_NEAR(r.coupling.plan(i, j), std::exp((r.f[i] + r.g[j] - c(i, j)) / 0.2), 1e-14);
  }
}

TEST(SinkhornProperties, MarginalFeasibilityOnRandomCosts) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> size(1, 16);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = size(rng), m = size(rng);
    const Matrix c = testing::randomMatrix(rng, n, m, 0.0, 10.0);
    const auto mu = testing::randomDistribution(rng, n);
    const auto nu = testing::randomDistribution(rng, m);
    SolverConfig cfg;
    cfg.maxSinkhornIters = 1000000;
    const auto r = sinkhornSolve(c, mu, nu, cfg);
    ASSERT_TRUE(r.converged) << "trial " << trial;
    ASSERT_LE(r.coupling.marginalViolation(), cfg.marginalTol);
    ASSERT_GE(r.coupling.plan.minCoeff(), 0.0);
  }
}

TEST(SinkhornProperties, MarginalErrorNonIncreasingEveryTenthIterate) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(2, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = size(rng), m = size(rng);
    const Matrix c = testing::randomMatrix(rng, n, m);
    SolverConfig cfg = withEpsilon(0.02 + 0.5 * (trial % 5) / 5.0);
    cfg.logDomain = trial % 2 == 0;
    cfg.autoLogDomain = false;
    const auto r = sinkhornSolve(c, testing::randomDistribution(rng, n),
                                 testing::randomDistribution(rng, m), cfg);
    ASSERT_EQ(r.errorTrace.size(), static_cast<std::size_t>(r.iterations));
    for (std::size_t k = 10; k < r.errorTrace.size(); k += 10)
      ASSERT_LE(r.errorTrace[k], r.errorTrace[k - 10] * (1 + 1e-12) + 1e-15)
          << "trial " << trial << " iterate " << k;
  }
}

TEST(SinkhornProperties, LogAndStandardDomainsAgree) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> size(1, 16);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = size(rng), m = size(rng);
    const Matrix c = testing::randomMatrix(rng, n, m);
    const auto mu = testing::randomDistribution(rng, n);
    const auto nu = testing::randomDistribution(rng, m);
    SolverConfig cfg = withEpsilon(0.05 + 0.1 * (trial % 10));
    cfg.autoLogDomain = false;
    const auto standard = sinkhornSolve(c, mu, nu, cfg);
    cfg.logDomain = true;
    const auto logd = sinkhornSolve(c, mu, nu, cfg);
    ASSERT_TRUE(standard.converged && logd.converged);
    ASSERT_FALSE(standard.logDomain);
    ASSERT_TRUE(logd.logDomain);
    ASSERT_LE((standard.coupling.plan - logd.coupling.plan).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(RoundToMarginals, ProducesExactCouplingNearInput) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 6, m = 2 + trial % 5;
    const auto mu = testing::randomDistribution(rng, n);
    const auto nu = testing::randomDistribution(rng, m);
    Matrix p = testing::randomCoupling(rng, mu, nu);
    Matrix noisy = p + 1e-3 * testing::randomMatrix(rng, n, m);
    const Coupling before{noisy, mu, nu};
    const Matrix r = roundToMarginals(noisy, mu, nu);
    const Coupling after{r, mu, nu};
    ASSERT_LE(after.marginalViolation(), 1e-14);
    ASSERT_GE(r.minCoeff(), 0.0);
    ASSERT_LE((r - noisy).cwiseAbs().sum(), 2 * before.marginalViolation() + 1e-14);
  }
}

TEST(LinearTransportCost, InnerProduct) {
  Matrix p(2, 2);
  p << 0.1, 0.4, 0.3, 0.2;
  EXPECT_DOUBLE_EQ(linearTransportCost(swapCost(), p), 0.7);
}

}  // namespace
}  // namespace gwkit
