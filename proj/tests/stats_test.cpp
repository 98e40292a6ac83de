#include "loscope/stats.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "loscope/error.hpp"

namespace loscope::stats {
namespace {

// Raw-sum textbook form, independent of the centered two-pass implementation.
double textbook_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Two-tailed p by Simpson integration of the Student-t density over [0, |t|].
double quadrature_p(double r, double n) {
  const double df = n - 2;
  const double t = std::fabs(r) * std::sqrt(df / (1 - r * r));
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto f = [&](double u) { return c * std::pow(1 + u * u / df, -(df + 1) / 2); };
  const int steps = 200000;
  const double h = t / steps;
  double s = f(0) + f(t);
  for (int i = 1; i < steps; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  return 1 - 2 * s * h / 3;
}

TEST(PearsonTest, PerfectAndTextbook) {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> neg = {-1, -2, -3, -4};
  EXPECT_DOUBLE_EQ(pearson(x, x), 1.0);
  EXPECT_DOUBLE_EQ(pearson(x, neg), -1.0);
  const std::vector<double> y = {1, 3, 2, 5};
  EXPECT_NEAR(pearson(x, y), textbook_pearson(x, y), 1e-12);
  EXPECT_NEAR(pearson(x, y), 0.8315218406202999, 1e-12);
}

TEST(PearsonTest, Degenerate) {
  const std::vector<double> two = {1, 2};
  const std::vector<double> three = {1, 2, 3};
  const std::vector<double> flat = {5, 5, 5};
  EXPECT_THROW(pearson(two, two), DegenerateInput);
  EXPECT_THROW(pearson(three, two), DegenerateInput);
  EXPECT_THROW(pearson(three, flat), DegenerateInput);
}

TEST(PearsonTest, AffineInvarianceAndSymmetry) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 60;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = nd(rng);
      y[i] = 0.5 * x[i] + nd(rng);
    }
    const double r = pearson(x, y);
    EXPECT_LE(std::fabs(r), 1.0 + 1e-12);
    EXPECT_NEAR(pearson(y, x), r, 1e-9);
    EXPECT_NEAR(r, textbook_pearson(x, y), 1e-9);
    const double a = 0.1 + static_cast<double>(rng() % 100), b = nd(rng) * 50;
    std::vector<double> ax(n), nx(n);
    for (std::size_t i = 0; i < n; ++i) {
      ax[i] = a * x[i] + b;
      nx[i] = -a * x[i] + b;
    }
    EXPECT_NEAR(pearson(ax, y), r, 1e-9);
    EXPECT_NEAR(pearson(nx, y), -r, 1e-9);
  }
}

TEST(PValueTest, Examples) {
  EXPECT_DOUBLE_EQ(p_value_two_tailed(0.0, 20), 1.0);
  EXPECT_LT(p_value_two_tailed(0.56, 930), 0.01);
  const double p = p_value_two_tailed(0.3, 20);
  EXPECT_NEAR(p, quadrature_p(0.3, 20), 1e-6);
  EXPECT_NEAR(p, 0.1987577173445536, 1e-9);  // frozen quadrature value
  EXPECT_NEAR(p_value_two_tailed(-0.3, 20), p, 1e-15);
  EXPECT_THROW(p_value_two_tailed(1.0, 20), DegenerateInput);
  EXPECT_THROW(p_value_two_tailed(0.5, 2), DegenerateInput);
}

TEST(PValueTest, AgreesWithQuadratureAcrossGrid) {
  for (double n : {3.0, 5.0, 12.0, 40.0, 200.0}) {
    for (double r : {0.05, 0.2, 0.45, 0.7, 0.9}) {
      EXPECT_NEAR(p_value_two_tailed(r, static_cast<std::size_t>(n)), quadrature_p(r, n), 1e-6)
          << r << " " << n;
    }
  }
}

TEST(PValueTest, MonotoneInAbsR) {
  for (std::size_t n : {3u, 10u, 100u, 930u}) {
    double prev = 1.0;
    for (int i = 0; i < 1000; ++i) {
      const double r = i / 1000.0;
      const double p = p_value_two_tailed(r, n);
      EXPECT_GT(p, 0.0);
      EXPECT_LE(p, 1.0);
      EXPECT_LE(p, prev) << r << " " << n;
      prev = p;
    }
  }
}

TEST(IncompleteBetaTest, ClosedForms) {
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.92, 1.0}) {
    EXPECT_NEAR(incomplete_beta(1, 1, x), x, 1e-14);
    EXPECT_NEAR(incomplete_beta(2, 1, x), x * x, 1e-14);
    EXPECT_NEAR(incomplete_beta(1, 3, x), 1 - std::pow(1 - x, 3), 1e-14);
  }
  EXPECT_NEAR(incomplete_beta(4.5, 4.5, 0.5), 0.5, 1e-14);
}

TEST(SpearmanTest, RanksAndMonotoneMaps) {
  const std::vector<double> v = {10, 20, 20, 5};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{2, 3.5, 3.5, 1}));
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {1, 8, 27, 64, 125};
  EXPECT_DOUBLE_EQ(spearman(x, y), 1.0);
}

struct NaiveBox {
  double q1, median, q3, lo, hi;
  std::vector<double> outliers;
};

NaiveBox naive_box(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = (static_cast<double>(v.size()) - 1) * p;
    const auto i = static_cast<std::size_t>(std::floor(h));
    return i + 1 < v.size() ? v[i] + (h - static_cast<double>(i)) * (v[i + 1] - v[i]) : v[i];
  };
  NaiveBox b{q(0.25), q(0.5), q(0.75), 0, 0, {}};
  const double iqr = b.q3 - b.q1;
  b.lo = b.q1;
  b.hi = b.q3;
  for (double x : v) {
    if (x < b.q1 - 1.5 * iqr || x > b.q3 + 1.5 * iqr) {
      b.outliers.push_back(x);
      continue;
    }
    b.lo = std::min(b.lo, x);
    b.hi = std::max(b.hi, x);
  }
  return b;
}

TEST(BoxStatsTest, Examples) {
  const std::vector<double> flat(9, 0.7);
  const auto c = box_stats(flat);
  for (double f : {c.min, c.q1, c.median, c.q3, c.max, c.lower_whisker, c.upper_whisker}) {
    EXPECT_DOUBLE_EQ(f, 0.7);
  }
  EXPECT_TRUE(c.outliers.empty());

  const std::vector<double> nine = {9, 1, 8, 2, 7, 3, 6, 4, 5};
  const auto b = box_stats(nine);
  EXPECT_DOUBLE_EQ(b.q1, 3);
  EXPECT_DOUBLE_EQ(b.median, 5);
  EXPECT_DOUBLE_EQ(b.q3, 7);

  const std::vector<double> spike = {0, 0, 0, 0, 10};
  const auto s = box_stats(spike);
  EXPECT_EQ(s.outliers, std::vector<double>{10});
  EXPECT_DOUBLE_EQ(s.upper_whisker, 0);
  EXPECT_DOUBLE_EQ(s.max, 10);

  // Nearest in-fence point lies inside the box; the whisker stays at q3.
  const std::vector<double> step = {1, 1, 1, 2};
  const auto t = box_stats(step);
  EXPECT_DOUBLE_EQ(t.q3, 1.25);
  EXPECT_DOUBLE_EQ(t.upper_whisker, 1.25);
  EXPECT_EQ(t.outliers, std::vector<double>{2});

  EXPECT_THROW(box_stats(std::vector<double>{}), EmptyInput);
}

TEST(BoxStatsTest, MatchesNaiveOracleOnRandomArrays) {
  std::mt19937_64 rng(1000);
  std::lognormal_distribution<double> heavy(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 80;
    std::vector<double> v(n);
    for (auto& x : v) x = trial % 3 ? heavy(rng) : static_cast<double>(rng() % 5);
    const auto got = box_stats(v);
    const auto want = naive_box(v);
    EXPECT_EQ(got.n, n);
    EXPECT_DOUBLE_EQ(got.q1, want.q1);
    EXPECT_DOUBLE_EQ(got.median, want.median);
    EXPECT_DOUBLE_EQ(got.q3, want.q3);
    EXPECT_DOUBLE_EQ(got.lower_whisker, want.lo);
    EXPECT_DOUBLE_EQ(got.upper_whisker, want.hi);
    EXPECT_EQ(got.outliers, want.outliers);
    EXPECT_LE(got.min, got.lower_whisker);
    EXPECT_LE(got.lower_whisker, got.q1);
    EXPECT_LE(got.q1, got.median);
    EXPECT_LE(got.median, got.q3);
    EXPECT_LE(got.q3, got.upper_whisker);
    EXPECT_LE(got.upper_whisker, got.max);
  }
}

}  // namespace
}  // namespace loscope::stats
