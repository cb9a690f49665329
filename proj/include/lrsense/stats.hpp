#pragma once

#include <span>
#include <vector>

namespace lrsense::stats {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two points.
double stddev(std::span<const double> x);
double median(std::span<const double> x);

/// Ranks starting at 1; ties share their average rank.
std::vector<double> ranks(std::span<const double> x);

/// Spearman rank correlation: Pearson correlation of the average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double half_width_95 = 0.0;  // Student-t 95% half-width on the slope
  int points = 0;
};

/// Ordinary least squares y = slope * x + intercept. Throws
/// InsufficientPoints for fewer than three points.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace lrsense::stats
