#include <gtest/gtest.h>

#include <cmath>

#include "oslab/core/rng.hpp"
#include "oslab/deltanorm.hpp"

using namespace oslab;

TEST(DeltaNorm, EqualityWitness) {
  Mat b(2, 2);
  b << 1, 1, 0, 1;
  const DeltaNorm dn(2, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(dn.eps_scale(), 0.5);
  EXPECT_DOUBLE_EQ(dn.op_norm(b), 1.5);
}

// property: |B|_delta <= r(B) + delta for upper-triangular B in the beta box
TEST(DeltaNorm, NormBoundOnRandomMatrices) {
  for (int k = 2; k <= 5; ++k)
    for (double beta : {1.0, 10.0})
      for (double delta : {0.1, 0.5}) {
        const DeltaNorm dn(k, beta, delta);
        auto g = stream(5, static_cast<std::uint64_t>(k * 100 + beta * 10 + delta * 10));
        for (int n = 0; n < 500; ++n) {
          Mat b = Mat::Zero(k, k);
          for (int i = 0; i < k; ++i)
            for (int j = i; j < k; ++j) b(i, j) = (2 * uniform01(g) - 1) * beta;
          const double r = b.diagonal().cwiseAbs().maxCoeff();
          ASSERT_LE(dn.op_norm(b), r + delta + 1e-12);
          ASSERT_NEAR(dn.op_norm(b), dn.induced_norm(b), 1e-12);
        }
      }
}

// induced norm is the max over the unit delta-ball: check against vertex enumeration
TEST(DeltaNorm, InducedNormOracle) {
  const int k = 3;
  const DeltaNorm dn(k, 2.0, 0.4);
  Mat b(3, 3);
  b << 0.3, -1.5, 2.0, 0, -0.8, 1.1, 0, 0, 0.5;
  double best = 0.0;
  for (int mask = 0; mask < 8; ++mask) {
    Vec v(3);
    for (int i = 0; i < 3; ++i) v(i) = ((mask >> i) & 1 ? 1.0 : -1.0) * dn.scaling()(i);
    best = std::max(best, dn.vector_norm(b * v));
  }
  EXPECT_NEAR(dn.op_norm(b), best, 1e-12);
}

TEST(DeltaNorm, NormEquivalenceConstants) {
  const DeltaNorm dn(4, 3.0, 0.3);
  auto g = stream(9, 0);
  for (int n = 0; n < 200; ++n) {
    Vec v(4);
    for (int i = 0; i < 4; ++i) v(i) = 2 * uniform01(g) - 1;
    const double inf = v.cwiseAbs().maxCoeff();
    EXPECT_LE(inf, dn.lower_constant() * dn.vector_norm(v) + 1e-15);
    EXPECT_LE(dn.vector_norm(v), dn.upper_constant() * inf * (1 + 1e-12));
  }
}

TEST(DeltaNorm, Errors) {
  const DeltaNorm dn(2, 1.0, 0.1);
  Mat lower(2, 2);
  lower << 1, 0, 0.5, 1;
  EXPECT_THROW(dn.op_norm(lower), ShapeError);
  Mat big(2, 2);
  big << 1, 2, 0, 1;
  EXPECT_THROW(dn.op_norm(big), BoundError);
  EXPECT_THROW(DeltaNorm(2, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(dn.vector_norm(Vec::Zero(3)), ShapeError);
}

TEST(DeltaNorm, KOneIsAbsoluteValue) {
  const DeltaNorm dn(1, 5.0, 0.2);
  Mat b(1, 1);
  b << -0.7;
  EXPECT_DOUBLE_EQ(dn.op_norm(b), 0.7);
}

TEST(Gronwall, CertificateOnSmoothSystems) {
  for (int k = 1; k <= 4; ++k) {
    const auto sys = random_smooth_system(k, 51, k);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(0.5 * i);
    const auto tr = triangularize(sys, Mat::Identity(k, k), grid);
    double beta = 0.0;
    for (const auto& b : tr.B)
      for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) beta = std::max(beta, std::abs(b(i, j)));
    for (double T : {2.0, 5.0, 10.0}) {
      const auto g = gronwall_certificate(tr, DeltaNorm(k, beta, 0.1), T);
      EXPECT_TRUE(g.pass) << "k=" << k << " T=" << T << " " << g.log_lhs << " " << g.log_rhs;
    }
  }
}

TEST(GrowthCertificate, UnperturbedConstantIsOne) {
  const SuspensionFlow flow{BaseMap(), RoofFunction(1.0)};
  const auto pts = sample_volume(flow, 3, 50);
  const auto rep = growth_certificate(flow, Bundle::Unstable, 0.05, pts, {10, 20, 40}, 1, 60, 0.0);
  for (double c : rep.C_hat) EXPECT_NEAR(c, 1.0, 1e-9);
  EXPECT_NEAR(rep.mean_u, std::log((3 + std::sqrt(5.0)) / 2), 1e-9);
}
