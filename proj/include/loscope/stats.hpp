#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loscope::stats {

// Sample Pearson product-moment correlation, clamped to [-1, 1].
// Throws DegenerateInput for |x| != |y|, n < 3, or a constant variable.
double pearson(std::span<const double> x, std::span<const double> y);

// Pearson over average ranks (ties share the mean rank).
double spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> values);

// Regularized incomplete beta I_x(a, b) by Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

// Two-tailed p for a correlation via t = r*sqrt((n-2)/(1-r^2)), df = n-2.
// Throws DegenerateInput unless n >= 3 and |r| < 1.
double p_value_two_tailed(double r, std::size_t n);

// Linear interpolation between order statistics ("type 7"); `sorted` ascending, non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

struct BoxStats {
  std::size_t n = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double lower_whisker = 0, upper_whisker = 0;
  std::vector<double> outliers;  // ascending

  bool operator==(const BoxStats&) const = default;
};

inline constexpr double kTukeyK = 1.5;

// Throws EmptyInput for an empty sample.
BoxStats box_stats(std::span<const double> values, double whisker_k = kTukeyK);

}  // namespace loscope::stats
