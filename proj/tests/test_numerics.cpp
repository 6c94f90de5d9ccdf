#include <cmath>
#include <numbers>
#include <vector>

#include "eocntk/numerics.hpp"
#include "gtest/gtest.h"

using namespace eocntk;

TEST(PhiloxTest, KnownAnswerVectors) {
  auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero[0], 0x6627e8d5u);
  EXPECT_EQ(zero[1], 0xe169c58du);
  EXPECT_EQ(zero[2], 0xbc57ac4cu);
  EXPECT_EQ(zero[3], 0x9b00dbd8u);

  auto ones = philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  EXPECT_EQ(ones[0], 0x408f276du);
  EXPECT_EQ(ones[1], 0x41c83b0eu);
  EXPECT_EQ(ones[2], 0xa20bc7c6u);
  EXPECT_EQ(ones[3], 0x6d5451fdu);

  auto pi = philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(pi[0], 0xd16cfe09u);
  EXPECT_EQ(pi[1], 0x94fdccebu);
  EXPECT_EQ(pi[2], 0x5001e420u);
  EXPECT_EQ(pi[3], 0x24126ea1u);
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs |= (x != c.normal());
  }
  EXPECT_TRUE(differs);
}

TEST(RngTest, FillNormalMatchesScalarStream) {
  // Bulk fills must continue the scalar stream exactly, from any state.
  for (int lead : {0, 1, 2, 3}) {
    for (std::size_t len : {0u, 1u, 2u, 5u, 128u, 129u, 1001u}) {
      Rng bulk(99), scalar(99);
      for (int i = 0; i < lead; ++i) {
        bulk.normal();
        scalar.normal();
      }
      if (lead == 3) {
        bulk.next_u64();
        scalar.next_u64();
      }
      std::vector<double> out(len);
      bulk.fill_normal(out);
      for (std::size_t i = 0; i < len; ++i) ASSERT_EQ(out[i], scalar.normal()) << lead << "/" << i;
      EXPECT_EQ(bulk.normal(), scalar.normal());
      EXPECT_EQ(bulk.next_u64(), scalar.next_u64());
    }
  }
}

TEST(RngTest, ForkIsPureFunctionOfParentAndIndex) {
  Rng parent(7);
  Rng c1 = parent.fork(3);
  for (int i = 0; i < 17; ++i) parent.normal();
  Rng c2 = parent.fork(3);
  Rng other = parent.fork(4);
  EXPECT_EQ(c1.next_u64(), c2.next_u64());
  EXPECT_NE(c1.key(), other.key());
  EXPECT_NE(parent.key(), c1.key());
}

TEST(RngTest, UniformRange) {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) ++counts[r.uniform_index(5)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(GaussianMatrixTest, SampleMoments) {
  Rng r(2024);
  const auto m = gaussian_matrix(r, 1000, 1000, 1.0);
  const double n = static_cast<double>(m.size());
  const double mean = m.sum() / n;
  const double var = (m.array() - mean).square().sum() / (n - 1.0);
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(n));
  EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(GaussianMatrixTest, ScalesByStd) {
  Rng a(5), b(5);
  const auto m1 = gaussian_matrix(a, 3, 4, 1.0);
  const auto m2 = gaussian_matrix(b, 3, 4, 2.5);
  EXPECT_EQ((2.5 * m1 - m2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GaussianMatrixTest, RejectsBadArguments) {
  Rng r(0);
  EXPECT_THROW(gaussian_matrix(r, 2, 2, 0.0), InvalidArgument);
  EXPECT_THROW(gaussian_matrix(r, 2, 2, -1.0), InvalidArgument);
  EXPECT_THROW(gaussian_matrix(r, 0, 2, 1.0), InvalidArgument);
}

TEST(SpectralNormTest, SimpleMatrices) {
  EXPECT_NEAR(spectral_norm(MatrixXd::Identity(5, 5)), 1.0, 1e-12);
  MatrixXd d = MatrixXd::Zero(3, 3);
  d.diagonal() << 3.0, 1.0, 2.0;
  EXPECT_NEAR(spectral_norm(d), 3.0, 1e-9);
  EXPECT_EQ(spectral_norm(MatrixXd::Zero(4, 2)), 0.0);
}

TEST(SpectralNormTest, MatchesSvdOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng r(seed);
    const MatrixXd m = gaussian_matrix(r, 10, 10, 1.0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double expected = svd.singularValues()(0);
    EXPECT_NEAR(spectral_norm(m), expected, 1e-8 * expected);
    EXPECT_NEAR(spectral_norm(m.transpose()), spectral_norm(m), 1e-8 * expected);
  }
}

TEST(SpectralNormTest, StartVectorInNullSpace) {
  // All-ones is orthogonal to the only nonzero right singular vector.
  MatrixXd m(2, 2);
  m << 1.0, -1.0, 2.0, -2.0;
  EXPECT_NEAR(spectral_norm(m), std::sqrt(10.0), 1e-9);
}

TEST(SpectralNormTest, NonConvergenceCarriesEstimate) {
  Rng r(3);
  const MatrixXd m = gaussian_matrix(r, 20, 20, 1.0);
  try {
    spectral_norm(m, {1e-300, 2});
    FAIL() << "expected NumericFailure";
  } catch (const NumericFailure& e) {
    EXPECT_GT(e.last_iterate(), 0.0);
  }
}

TEST(SpectralNormTest, RejectsNonFinite) {
  MatrixXd m = MatrixXd::Ones(2, 2);
  m(0, 1) = std::nan("");
  EXPECT_THROW(spectral_norm(m), InvalidArgument);
}

TEST(QuadratureTest, RuleWeightsAndMoments) {
  const auto leg = gauss_legendre(20);
  double s = 0.0, x2 = 0.0;
  for (std::size_t i = 0; i < leg.nodes.size(); ++i) {
    s += leg.weights[i];
    x2 += leg.weights[i] * leg.nodes[i] * leg.nodes[i];
  }
  EXPECT_NEAR(s, 2.0, 1e-13);
  EXPECT_NEAR(x2, 2.0 / 3.0, 1e-13);

  const auto lag = gauss_laguerre(30);
  double l0 = 0.0, l3 = 0.0;
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) {
    l0 += lag.weights[i];
    l3 += lag.weights[i] * std::pow(lag.nodes[i], 3);
  }
  EXPECT_NEAR(l0, 1.0, 1e-13);
  EXPECT_NEAR(l3, 6.0, 1e-11);
}

TEST(QuadratureTest, HermiteMoments) {
  EXPECT_NEAR(gauss_hermite_expectation([](double) { return 1.0; }), 1.0, 1e-12);
  EXPECT_NEAR(gauss_hermite_expectation([](double u) { return u * u; }), 1.0, 1e-10);
  EXPECT_NEAR(gauss_hermite_expectation([](double u) { return u * u * u * u; }), 3.0, 1e-10);
  // odd moments vanish by symmetry of the rule
  EXPECT_NEAR(gauss_hermite_expectation([](double u) { return u * std::abs(u); }), 0.0, 1e-14);
}

TEST(QuadratureTest, BivariateIdentity) {
  auto id = [](double u) { return u; };
  EXPECT_NEAR(bivariate_dual_quadrature(id, id, 0.7), 0.7, 1e-12);
  EXPECT_NEAR(bivariate_dual_quadrature(id, id, -0.3), -0.3, 1e-12);
}

TEST(QuadratureTest, BivariateAbsoluteValue) {
  auto ab = [](double u) { return std::abs(u); };
  EXPECT_NEAR(bivariate_dual_quadrature(ab, ab, 1.0), 1.0, 1e-12);
  EXPECT_NEAR(bivariate_dual_quadrature(ab, ab, 0.0), 2.0 / std::numbers::pi, 1e-12);
}

TEST(QuadratureTest, BivariateSignProduct) {
  // E sgn(u1) sgn(u2) = (2/pi) asin(rho)
  auto sgn = [](double u) { return u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0); };
  for (double rho : {-0.9, -0.2, 0.0, 0.4, 0.99}) {
    EXPECT_NEAR(bivariate_dual_quadrature(sgn, sgn, rho), 2.0 / std::numbers::pi * std::asin(rho),
                1e-12);
  }
}

TEST(QuadratureTest, BivariateSymmetricInArguments) {
  auto f = [](double u) { return 0.3 * u + 0.7 * std::abs(u); };
  auto g = [](double u) { return u > 0 ? 1.0 : -0.5; };
  for (double rho : {-0.8, 0.1, 0.6}) {
    EXPECT_NEAR(bivariate_dual_quadrature(f, g, rho), bivariate_dual_quadrature(g, f, rho), 1e-12);
  }
}

TEST(QuadratureTest, BivariateReducesToOneDimension) {
  auto f = [](double u) {
    const double p = 0.3 * u + 0.7 * std::abs(u);
    return p * p;
  };
  auto one = [](double) { return 1.0; };
  for (double rho : {-0.5, 0.0, 0.9}) {
    EXPECT_NEAR(bivariate_dual_quadrature(f, one, rho), 0.58, 1e-12);
  }
}

TEST(QuadratureTest, FullCorrelationMatchesOneDimension) {
  for (auto [a, b] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {1.0, -0.5}, {0.3, 0.7}}) {
    auto f = [a, b](double u) { return a * u + b * std::abs(u); };
    const double one_d = gauss_hermite_expectation([&](double u) { return f(u) * f(u); });
    EXPECT_NEAR(bivariate_dual_quadrature(f, f, 1.0), one_d, 1e-10);
  }
}

TEST(QuadratureTest, RejectsRhoOutsideRange) {
  auto id = [](double u) { return u; };
  EXPECT_THROW(bivariate_dual_quadrature(id, id, 1.0 + 1e-12), InvalidArgument);
}
