#pragma once

#include <span>
#include <vector>

namespace layergeo {

double mean(std::span<const double> values);

/// Population standard deviation (divides by n).
double population_std(std::span<const double> values);

/// Linear-interpolation quantile (the "type 7" rule) of unsorted values.
double quantile(std::span<const double> values, double q);

/// Quantile of values already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

double median(std::span<const double> values);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Percentile interval of a set of bootstrap replicates at the given level.
Interval percentile_interval(std::span<const double> replicates, double level);

}  // namespace layergeo
