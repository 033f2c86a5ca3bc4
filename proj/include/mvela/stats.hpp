#ifndef MVELA_STATS_HPP
#define MVELA_STATS_HPP

#include <span>
#include <vector>

namespace mvela::stats {

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sd(std::span<const double> v);
// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);
// Quantile with linear interpolation between order statistics: position
// 1 + q (n - 1) in the sorted sample.
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

} // namespace mvela::stats

#endif
