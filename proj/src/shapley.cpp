#include "mvela/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "mvela/random.hpp"

namespace mvela {

std::size_t CoalitionMask::count() const
{
    return static_cast<std::size_t>(std::count(included_.begin(), included_.end(), 1));
}

CoalitionMask CoalitionMask::from_bits(std::size_t n_features, std::uint64_t bits)
{
    CoalitionMask mask(n_features);
    for (std::size_t i = 0; i < n_features; ++i) {
        if ((bits >> i) & 1U) {
            mask.include(i);
        }
    }
    return mask;
}

double ShapleyAttribution::efficiency_gap() const
{
    return base_value + std::accumulate(phi.begin(), phi.end(), 0.0) - full_value;
}

InterventionalValue::InterventionalValue(PredictFn model, std::span<const double> x, const Matrix& background)
    : model_(std::move(model))
    , x_(x.begin(), x.end())
    , background_(background)
{
    if (background.rows() == 0) {
        throw DataError("interventional value function needs at least one background row");
    }
    if (static_cast<std::size_t>(background.cols()) != x_.size()) {
        throw DimensionError("background width does not match the explained row");
    }
}

double InterventionalValue::operator()(const CoalitionMask& mask) const
{
    std::vector<double> blended(x_.size());
    double sum = 0.0;
    for (Eigen::Index r = 0; r < background_.rows(); ++r) {
        for (std::size_t j = 0; j < x_.size(); ++j) {
            blended[j] = mask.contains(j) ? x_[j] : background_(r, static_cast<Eigen::Index>(j));
        }
        sum += model_(blended);
    }
    return sum / static_cast<double>(background_.rows());
}

ForestInterventionalValue::ForestInterventionalValue(const RegressionForest& forest, std::span<const double> x,
                                                     const Matrix& background)
    : forest_(forest)
    , x_(x.begin(), x.end())
    , background_(background)
{
    if (background.rows() == 0) {
        throw DataError("interventional value function needs at least one background row");
    }
    if (static_cast<std::size_t>(background.cols()) != x_.size() || x_.size() != forest.n_features()) {
        throw DimensionError("background / explained row width does not match the forest");
    }
}

double ForestInterventionalValue::tree_sum(const DecisionTree& tree, const CoalitionMask& mask,
                                           std::vector<std::size_t>& rows) const
{
    struct Range {
        std::size_t node, begin, end;
    };
    const auto& nodes = tree.nodes();
    std::vector<Range> stack{{0, 0, rows.size()}};
    double sum = 0.0;
    while (!stack.empty()) {
        auto [node, begin, end] = stack.back();
        stack.pop_back();
        while (!nodes[node].is_leaf()) {
            const auto& n = nodes[node];
            const auto f = static_cast<std::size_t>(n.feature);
            if (mask.contains(f)) {
                node = static_cast<std::size_t>(x_[f] <= n.threshold ? n.left : n.right);
                continue;
            }
            const auto first = rows.begin() + static_cast<std::ptrdiff_t>(begin);
            const auto last = rows.begin() + static_cast<std::ptrdiff_t>(end);
            const auto middle = std::partition(first, last, [&](std::size_t r) {
                return background_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) <= n.threshold;
            });
            const auto mid = static_cast<std::size_t>(middle - rows.begin());
            if (mid == begin) {
                node = static_cast<std::size_t>(n.right);
            } else if (mid == end) {
                node = static_cast<std::size_t>(n.left);
            } else {
                stack.push_back({static_cast<std::size_t>(n.right), mid, end});
                node = static_cast<std::size_t>(n.left);
                end = mid;
            }
        }
        sum += tree.payload(node)[0] * static_cast<double>(end - begin);
    }
    return sum;
}

double ForestInterventionalValue::operator()(const CoalitionMask& mask) const
{
    std::vector<std::size_t> rows(static_cast<std::size_t>(background_.rows()));
    double sum = 0.0;
    for (const auto& tree : forest_.trees()) {
        std::iota(rows.begin(), rows.end(), 0);
        sum += tree_sum(tree, mask, rows);
    }
    return sum / (static_cast<double>(rows.size()) * static_cast<double>(forest_.trees().size()));
}

ShapleyAttribution exact_shapley(const CoalitionValueFn& value, std::size_t n_features)
{
    if (n_features > kExactShapleyMaxFeatures) {
        throw CapabilityError("exact Shapley enumeration is limited to " + std::to_string(kExactShapleyMaxFeatures) +
                              " features, got " + std::to_string(n_features));
    }
    const std::size_t m = n_features;
    const std::uint64_t n_subsets = std::uint64_t{1} << m;
    std::vector<double> v(n_subsets);
    for (std::uint64_t bits = 0; bits < n_subsets; ++bits) {
        v[bits] = value(CoalitionMask::from_bits(m, bits));
    }

    // weight[s] = s! (m - s - 1)! / m!
    std::vector<double> weight(m, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
        weight[s] = std::exp(std::lgamma(static_cast<double>(s) + 1.0) +
                             std::lgamma(static_cast<double>(m - s)) - std::lgamma(static_cast<double>(m) + 1.0));
    }

    ShapleyAttribution out;
    out.base_value = v.front();
    out.full_value = v.back();
    out.phi.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const std::uint64_t bit = std::uint64_t{1} << i;
        double phi = 0.0;
        for (std::uint64_t bits = 0; bits < n_subsets; ++bits) {
            if (bits & bit) {
                continue;
            }
            const auto s = static_cast<std::size_t>(std::popcount(bits));
            phi += weight[s] * (v[bits | bit] - v[bits]);
        }
        out.phi[i] = phi;
    }
    return out;
}

ShapleyAttribution exact_shapley(const PredictFn& model, std::span<const double> x, const Matrix& background)
{
    if (x.size() > kExactShapleyMaxFeatures) {
        throw CapabilityError("exact Shapley enumeration is limited to " + std::to_string(kExactShapleyMaxFeatures) +
                              " features, got " + std::to_string(x.size()));
    }
    InterventionalValue value(model, x, background);
    return exact_shapley(std::cref(value), x.size());
}

ShapleyAttribution permutation_shapley(const CoalitionValueFn& value, std::size_t n_features,
                                       std::size_t n_permutations, std::uint64_t seed)
{
    if (n_permutations < 1) {
        throw ConfigError("permutation Shapley needs at least one permutation");
    }
    const std::size_t m = n_features;
    ShapleyAttribution out;
    out.phi.assign(m, 0.0);
    out.base_value = value(CoalitionMask(m, false));
    out.full_value = value(CoalitionMask(m, true));
    if (m == 0) {
        return out;
    }

    Rng rng(seed);
    std::vector<std::size_t> order(m);
    auto walk = [&](auto first, auto last) {
        CoalitionMask mask(m);
        double previous = out.base_value;
        std::size_t added = 0;
        for (auto it = first; it != last; ++it) {
            mask.include(*it);
            ++added;
            const double current = added == m ? out.full_value : value(mask);
            out.phi[*it] += current - previous;
            previous = current;
        }
    };
    for (std::size_t p = 0; p < n_permutations; ++p) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        walk(order.begin(), order.end());
        walk(order.rbegin(), order.rend());
    }
    for (auto& phi : out.phi) {
        phi /= static_cast<double>(2 * n_permutations);
    }
    return out;
}

ShapleyAttribution permutation_shapley(const PredictFn& model, std::span<const double> x, const Matrix& background,
                                       std::size_t n_permutations, std::uint64_t seed)
{
    InterventionalValue value(model, x, background);
    return permutation_shapley(std::cref(value), x.size(), n_permutations, seed);
}

} // namespace mvela
