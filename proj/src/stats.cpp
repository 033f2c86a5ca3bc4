#include "mvela/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvela/core.hpp"

namespace mvela::stats {

double mean(std::span<const double> v)
{
    if (v.empty()) {
        throw DataError("mean of an empty sample");
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd(std::span<const double> v)
{
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double pearson(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw DimensionError("correlation of samples with different lengths");
    }
    if (a.size() < 2) {
        return 0.0;
    }
    const double ma = mean(a);
    const double mb = mean(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) {
        return 0.0;
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty()) {
        throw DataError("quantile of an empty sample");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw DataError("quantile level must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) {
        return values[lo];
    }
    return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values)
{
    return quantile(std::move(values), 0.5);
}

} // namespace mvela::stats
