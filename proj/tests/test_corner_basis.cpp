#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "cornerbie/corner_basis.hpp"
#include "cornerbie/io.hpp"
#include "cornerbie/singular_quadrature.hpp"
#include "support.hpp"

using namespace cornerbie;
using testing_support::basis;

namespace {

double node_integral(const CornerBasis& B, double mu) {
  double s = 0;
  for (int j = 0; j < B.K; ++j) s += B.weights[j] * std::pow(B.nodes[j], mu);
  return s;
}

}  // namespace

TEST(CornerBasis, DefaultRankIsFrozen) {
  const CornerBasis& B = basis();
  EXPECT_EQ(B.K, 36);
  EXPECT_LT(B.cond_U, B.options.cond_bound);
  for (int j = 0; j < B.K; ++j) {
    EXPECT_GT(B.weights[j], 0.0);
    EXPECT_GT(B.nodes[j], 0.0);
    EXPECT_LT(B.nodes[j], 1.0);
    if (j > 0) EXPECT_GT(B.nodes[j], B.nodes[j - 1]);
  }
}

TEST(CornerBasis, PolynomialFamilyIsExact) {
  PowerFamily fam;
  fam.explicit_mu = {0.0, 1.0, 2.0};
  const CornerBasis B = testing_support::make_basis(fam, {});
  EXPECT_EQ(B.K, 3);
  for (double mu : {0.0, 1.0, 2.0}) {
    EXPECT_LT(B.projection_residual(mu), 1e-14);
    EXPECT_NEAR(node_integral(B, mu), 1.0 / (mu + 1), 1e-14);
  }
}

TEST(CornerBasis, LooserCutoffGivesFewerFunctions) {
  BasisOptions opt;
  opt.eps = 1e-6;
  opt.svd_cutoff = 1e-7;
  const CornerBasis B = testing_support::make_basis({}, opt);
  EXPECT_LT(B.K, basis().K);
  EXPECT_GT(B.K, 3);
}

TEST(CornerBasis, InvalidCutoff) {
  BasisOptions opt;
  opt.svd_cutoff = 1e-3;
  try {
    testing_support::make_basis({}, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(CornerBasis, QuadratureOfPowers) {
  const CornerBasis& B = basis();
  EXPECT_NEAR(node_integral(B, 0.5), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(node_integral(B, 49.5) * 50.5, 1.0, 1e-11);
  EXPECT_NEAR(node_integral(B, 0.0), 1.0, 1e-13);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 50.0);
  for (int k = 0; k < 20; ++k) {
    const double mu = u(rng);
    EXPECT_NEAR(node_integral(B, mu) * (mu + 1), 1.0, 1e-11) << mu;
  }
}

TEST(CornerBasis, ProjectionResiduals) {
  const CornerBasis& B = basis();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 50.0);
  for (int k = 0; k < 30; ++k) {
    const double mu = u(rng);
    // relative to ||x^mu|| = 1 / sqrt(2 mu + 1)
    EXPECT_LT(B.projection_residual(mu) * std::sqrt(2 * mu + 1), 1e-12) << mu;
  }
  // x^0.8 log x is a limit of differences of family members
  Eigen::VectorXd v(B.grid.x.size());
  for (std::size_t i = 0; i < B.grid.x.size(); ++i) v(i) = std::pow(B.grid.x[i], 0.8) * std::log(B.grid.x[i]) * std::sqrt(B.grid.w[i]);
  EXPECT_LT(B.projection_residual(v) / v.norm(), 1e-12);
}

TEST(CornerBasis, Orthonormal) {
  const CornerBasis& B = basis();
  Eigen::MatrixXd Q(B.grid.x.size(), B.K);
  for (std::size_t i = 0; i < B.grid.x.size(); ++i)
    for (int k = 0; k < B.K; ++k) Q(i, k) = B.phi(i, k) * std::sqrt(B.grid.w[i]);
  const Eigen::MatrixXd G = Q.transpose() * Q - Eigen::MatrixXd::Identity(B.K, B.K);
  EXPECT_LT(G.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CornerBasis, PowerMatrixColumnNorms) {
  const PowerFamily fam;
  const Eigen::MatrixXd A = build_power_matrix(fam);
  const auto mu = fam.exponents();
  for (std::size_t j = 0; j < mu.size(); j += 7) EXPECT_NEAR(A.col(j).norm() * std::sqrt(2 * mu[j] + 1), 1.0, 1e-13) << mu[j];
}

TEST(TwoSided, InterpolatesCornerFamily) {
  const CornerBasis& B = basis();
  const double d = 0.25;
  const TwoSidedCorner C = two_sided_extend(B, d);
  auto check = [&](auto f) {
    std::vector<double> y(2 * B.K);
    for (int j = 0; j < 2 * B.K; ++j) y[j] = f(C.t[j]) * std::sqrt(C.w[j]);
    double worst = 0;
    for (double t : {-0.2, -0.07, -1e-3, 1e-5, 0.013, 0.11, 0.249}) worst = std::max(worst, std::abs(C.interpolate_scaled(B, y, t) - f(t)));
    return worst;
  };
  EXPECT_LT(check([](double t) { return std::sqrt(std::abs(t)); }), 1e-11);
  EXPECT_LT(check([](double t) { return (t < 0 ? -1.0 : 1.0) * std::sqrt(std::abs(t)); }), 1e-11);
  EXPECT_LT(check([](double) { return 1.0; }), 1e-11);
  const Eigen::MatrixXd I = C.U * C.U.inverse() - Eigen::MatrixXd::Identity(2 * B.K, 2 * B.K);
  EXPECT_LT(I.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SingularTable, CertifiedAcrossAngles) {
  for (double alpha : {1.0 / 3.0, 0.5, 2.0 / 3.0, 1.5, 1.75}) {
    const SingularWeightTable& T = testing_support::tables().get(alpha);
    EXPECT_LE(T.basis_residual, 1e-13) << alpha;
    EXPECT_LE(T.power_residual, 1e-13) << alpha;
  }
  for (double bad : {0.0, 1.0, 2.0, -0.5}) {
    try {
      build_singular_weights(bad, basis());
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::DegenerateAngle);
    }
  }
}

TEST(SingularTable, ScaleInvariantBlock) {
  TableOptions a, b;
  a.certify = b.certify = false;
  b.delta = 1e-3;
  const SingularWeightTable A = build_singular_weights(0.4, basis(), a);
  const SingularWeightTable Bt = build_singular_weights(0.4, basis(), b);
  EXPECT_LT((A.block - Bt.block).cwiseAbs().maxCoeff(), 1e-12 * A.block.cwiseAbs().maxCoeff());
}

TEST(BasisCache, RoundTrip) {
  const CornerBasis& B = basis();
  const auto p = std::filesystem::temp_directory_path() / "cornerbie_basis_roundtrip.bin";
  write_basis(p, B);
  CornerBasis R;
  ASSERT_TRUE(read_basis(p, B.family, B.options, R));
  EXPECT_EQ(R.K, B.K);
  EXPECT_EQ(R.nodes, B.nodes);
  EXPECT_EQ(R.weights, B.weights);
  EXPECT_EQ((R.phi - B.phi).cwiseAbs().maxCoeff(), 0.0);
  PowerFamily other = B.family;
  other.levels = 30;
  CornerBasis S;
  EXPECT_FALSE(read_basis(p, other, B.options, S));
  std::filesystem::remove(p);
}
