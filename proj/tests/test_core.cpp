#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oslab/core/linalg.hpp"
#include "oslab/core/parallel.hpp"
#include "oslab/core/rng.hpp"
#include "oslab/core/stats.hpp"
#include "oslab/path.hpp"

using namespace oslab;

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = stream(42, 7), b = stream(42, 7), c = stream(42, 8), d = stream(43, 7);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
  auto g = stream(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(g);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Parallel, MapIsIndexOrderedForAnyWorkerCount) {
  auto f = [](std::size_t i) { return std::sin(static_cast<double>(i)); };
  const auto a = parallel_map(1000, 1, f);
  const auto b = parallel_map(1000, 4, f);
  EXPECT_EQ(a, b);
}

TEST(Parallel, MapRethrows) {
  EXPECT_THROW(parallel_map(100, 3,
                            [](std::size_t i) -> int {
                              if (i == 57) throw std::runtime_error("x");
                              return 0;
                            }),
               std::runtime_error);
}

TEST(Parallel, PairwiseSumMatchesLongDouble) {
  std::mt19937_64 g(3);
  std::vector<double> v(100001);
  long double ref = 0;
  for (auto& x : v) {
    x = std::ldexp(static_cast<double>(g() >> 11), -53) - 0.5;
    ref += x;
  }
  EXPECT_NEAR(pairwise_sum(v), static_cast<double>(ref), 1e-10);
}

TEST(Linalg, QrPositiveRoundTrip) {
  std::mt19937_64 g(5);
  std::normal_distribution<double> nd;
  Mat m(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) m(i, j) = nd(g);
  const QR f = qr_positive(m);
  EXPECT_LT((f.q * f.r - m).norm() / m.norm(), 1e-10);
  EXPECT_LT((f.q.transpose() * f.q - Mat::Identity(5, 5)).norm(), 1e-12);
  for (int i = 0; i < 5; ++i) {
    EXPECT_GT(f.r(i, i), 0.0);
    for (int j = 0; j < i; ++j) EXPECT_EQ(f.r(i, j), 0.0);
  }
}

TEST(Linalg, GramSchmidtSmallExample) {
  Mat b(2, 2);
  b << 1, 1, 0, 1;  // columns (1,0), (1,1)
  const QR f = gram_schmidt(b);
  EXPECT_NEAR((f.q - Mat::Identity(2, 2)).norm(), 0.0, 1e-15);
  EXPECT_NEAR(f.r(0, 1), 1.0, 1e-15);
}

TEST(Linalg, GramSchmidtRejectsBadInput) {
  EXPECT_THROW(gram_schmidt(Mat::Zero(2, 3)), ShapeError);
  Mat b(2, 2);
  b << 1, 1, 1, 1 + 1e-13;
  EXPECT_THROW(gram_schmidt(b), DegenerateBasis);
}

TEST(Stats, MeanStderr) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto m = mean_stderr(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3 / 4), 1e-15);
}

TEST(Stats, FitLineRecoversSlope) {
  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back(i);
    y.push_back(3 - 0.5 * i);
  }
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-14);
  EXPECT_NEAR(f.intercept, 3.0, 1e-13);
}

TEST(Stats, WilsonIntervalContainsPoint) {
  const auto ci = wilson_interval(30, 100);
  EXPECT_LT(ci.lo, 0.3);
  EXPECT_GT(ci.hi, 0.3);
  const auto z = wilson_interval(0, 100);
  EXPECT_EQ(z.lo, 0.0);
  EXPECT_GT(z.hi, 0.0);
}

TEST(Path, ClosedFormIntegralMatchesSimpson) {
  const Harmonic h[] = {{0.7, 3.0, 0.4}, {-0.2, 11.0, 1.0}};
  IntegrandPath p;
  p.add_piece(2.5, 0.1, h);
  const double T = 2.5;
  const int n = 20000;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += w * p.value(0, T * i / n);
  }
  s *= T / n / 3;
  EXPECT_NEAR(p.integral(0, T), s, 1e-10);
  EXPECT_NEAR(p.total(), s, 1e-10);
  EXPECT_LE(p.upper(0), 0.1 + 0.9 + 1e-15);
}
