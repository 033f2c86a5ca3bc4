#ifndef MVELA_SHAPLEY_HPP
#define MVELA_SHAPLEY_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mvela/core.hpp"
#include "mvela/forest.hpp"

namespace mvela {

// Which players (features) take their value from the explained row.
class CoalitionMask {
public:
    explicit CoalitionMask(std::size_t n_features, bool included = false)
        : included_(n_features, included ? 1 : 0)
    {
    }

    std::size_t size() const noexcept { return included_.size(); }
    bool contains(std::size_t i) const { return included_[i] != 0; }
    void include(std::size_t i) { included_[i] = 1; }
    void exclude(std::size_t i) { included_[i] = 0; }
    std::size_t count() const;

    static CoalitionMask from_bits(std::size_t n_features, std::uint64_t bits);

private:
    std::vector<unsigned char> included_;
};

struct ShapleyAttribution {
    // Value of the empty coalition.
    double base_value = 0.0;
    std::vector<double> phi;
    // Value of the full coalition; base_value + sum(phi) reproduces it.
    double full_value = 0.0;

    double efficiency_gap() const;
};

using PredictFn = std::function<double(std::span<const double>)>;
using CoalitionValueFn = std::function<double(const CoalitionMask&)>;

// Interventional value function: mean over the background rows of the model
// evaluated on the row that takes coalition features from x and the others
// from the background row.
class InterventionalValue {
public:
    InterventionalValue(PredictFn model, std::span<const double> x, const Matrix& background);

    double operator()(const CoalitionMask& mask) const;

private:
    PredictFn model_;
    std::vector<double> x_;
    const Matrix& background_;
};

// Same value function for a regression forest, computed by routing the whole
// background set through each tree at once: splits on coalition features send
// the set along x's branch, other splits partition it.
class ForestInterventionalValue {
public:
    ForestInterventionalValue(const RegressionForest& forest, std::span<const double> x, const Matrix& background);

    double operator()(const CoalitionMask& mask) const;

private:
    double tree_sum(const DecisionTree& tree, const CoalitionMask& mask, std::vector<std::size_t>& rows) const;

    const RegressionForest& forest_;
    std::vector<double> x_;
    const Matrix& background_;
};

inline constexpr std::size_t kExactShapleyMaxFeatures = 20;

// Full subset enumeration; throws CapabilityError above kExactShapleyMaxFeatures.
ShapleyAttribution exact_shapley(const CoalitionValueFn& value, std::size_t n_features);
ShapleyAttribution exact_shapley(const PredictFn& model, std::span<const double> x, const Matrix& background);

// Antithetic permutation sampling: every sampled feature order is walked
// forward and then reversed, and phi averages the 2 * n_permutations marginal
// contributions per feature.
ShapleyAttribution permutation_shapley(const CoalitionValueFn& value, std::size_t n_features,
                                       std::size_t n_permutations, std::uint64_t seed);
ShapleyAttribution permutation_shapley(const PredictFn& model, std::span<const double> x, const Matrix& background,
                                       std::size_t n_permutations, std::uint64_t seed);

} // namespace mvela

#endif
