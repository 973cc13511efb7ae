#include "mro/kernels.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace mro {
namespace {

const Slice kPair{0, 2};

TEST(Kernel, SquaredExponentialValues) {
  const auto k = Kernel::squared_exponential(1.0, kPair);
  const Eigen::Vector2d z(0.3, -0.2);
  EXPECT_DOUBLE_EQ(k.eval(z, z), 1.0);
  // squared distance 2 with l = 1
  EXPECT_NEAR(k.eval(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1)), std::exp(-1.0), 1e-15);
}

TEST(Kernel, LinearIsDotProduct) {
  const auto k = Kernel::linear(kPair);
  EXPECT_DOUBLE_EQ(k.eval(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)), 11.0);
  EXPECT_DOUBLE_EQ(Kernel::linear(kPair, 2.0).eval(Eigen::Vector2d(1, 2), Eigen::Vector2d(3, 4)),
                   11.0 / 4.0);
}

// mpmath evaluations of the general Bessel form (tests/oracles/frozen_values.py).
struct MaternCase {
  double r, nu, lengthscale, expected;
};

class MaternOracle : public ::testing::TestWithParam<MaternCase> {};

TEST_P(MaternOracle, MatchesSpecialFunctionOracle) {
  const auto c = GetParam();
  EXPECT_NEAR(matern_correlation(c.r, c.nu, c.lengthscale), c.expected, 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Frozen, MaternOracle,
                         ::testing::Values(MaternCase{1.0, 1.5, 1.0, 0.48335772459650765},
                                           MaternCase{0.9, 1.2, 0.7, 0.33514921628961945},
                                           MaternCase{0.3, 3.7, 2.0, 0.98476867670832769},
                                           MaternCase{2.0, 0.8, 0.5, 0.01322557508116492},
                                           MaternCase{1.3, 2.5, 0.6, 0.10756159185659399}));

TEST(Matern, ClosedFormsAgreeWithBesselPath) {
  // Nudging nu off the half-integer forces the Bessel branch.
  for (double nu : {0.5, 1.5, 2.5}) {
    for (double r : {0.05, 0.4, 1.7}) {
      EXPECT_NEAR(matern_correlation(r, nu, 0.8), matern_correlation(r, nu + 1e-9, 0.8), 1e-7);
    }
  }
  EXPECT_DOUBLE_EQ(matern_correlation(0.0, 1.2, 1.0), 1.0);
  EXPECT_EQ(matern_correlation(1e6, 1.2, 1.0), 0.0);
}

TEST(Kernel, SumIsMeanProductMultiplies) {
  const auto a = Kernel::squared_exponential(0.5, {0, 1});
  const auto b = Kernel::matern(2.5, 1.0, {1, 1});
  const Eigen::Vector2d u(0.1, 0.7), v(0.4, -0.3);
  EXPECT_NEAR(Kernel::sum({a, b}).eval(u, v), 0.5 * (a(u, v) + b(u, v)), 1e-15);
  EXPECT_NEAR(Kernel::product({a, b}).eval(u, v), a(u, v) * b(u, v), 1e-15);
}

TEST(Kernel, SliceIsolatesCoordinates) {
  const auto k = Kernel::squared_exponential(1.0, {1, 1});
  EXPECT_DOUBLE_EQ(k.eval(Eigen::Vector2d(5, 0.2), Eigen::Vector2d(-3, 0.2)), 1.0);
  EXPECT_THROW(k.eval(Eigen::Vector3d::Zero(), Eigen::Vector2d::Zero()), DomainError);
}

TEST(Kernel, RejectsBadHyperparameters) {
  EXPECT_THROW(Kernel::squared_exponential(0.0, kPair), DomainError);
  EXPECT_THROW(Kernel::matern(-1.0, 1.0, kPair), DomainError);
  EXPECT_THROW(Kernel::sum({}), DomainError);
}

TEST(Gram, SmallCases) {
  const auto k = Kernel::squared_exponential(1.0, kPair);
  Eigen::MatrixXd one(2, 1);
  one << 0.3, 0.4;
  EXPECT_EQ(gram(k, one), Eigen::MatrixXd::Ones(1, 1));
  Eigen::MatrixXd twin(2, 2);
  twin << 0.3, 0.3, 0.4, 0.4;
  EXPECT_EQ(gram(k, twin), Eigen::MatrixXd::Ones(2, 2));
}

TEST(Gram, PositiveSemidefiniteOnRandomPoints) {
  const std::vector<Kernel> kernels{
      Kernel::squared_exponential(0.3, kPair), Kernel::matern(1.2, 0.5, kPair),
      Kernel::product({Kernel::linear(kPair), Kernel::squared_exponential(0.2, kPair)}),
      Kernel::sum({Kernel::matern(2.5, 0.4, {0, 1}), Kernel::matern(0.5, 0.7, {1, 1})})};
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Random(2, 20);
  for (const auto& k : kernels) {
    const Eigen::MatrixXd g = gram(k, pts);
    EXPECT_EQ(g, g.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
    EXPECT_TRUE(prior_variance(k, pts).isApprox(g.diagonal()));
    EXPECT_TRUE(cross_covariance(k, pts, pts).isApprox(g));
  }
}

TEST(Kernel, JsonRoundTrip) {
  const auto k = Kernel::product(
      {Kernel::linear(kPair, 1.5), Kernel::sum({Kernel::matern(1.2, 0.3, {0, 1}),
                                                Kernel::squared_exponential(0.2, {1, 1})})});
  EXPECT_EQ(kernel_from_json(kernel_to_json(k)), k);
  EXPECT_THROW(kernel_from_json(nlohmann::json{{"type", "cosine"}}), DomainError);
}

}  // namespace
}  // namespace mro
