#ifndef MVELA_FOREST_HPP
#define MVELA_FOREST_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvela/core.hpp"

namespace mvela {

enum class FeatureSubsample { all, sqrt, fraction };

struct ForestParams {
    std::size_t n_trees = 100;
    std::optional<std::size_t> max_depth;
    std::size_t min_samples_leaf = 1;
    FeatureSubsample subsample = FeatureSubsample::all;
    double fraction = 1.0;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    // Worker threads for fitting; results do not depend on it.
    std::size_t jobs = 1;

    static ForestParams regression_defaults(std::uint64_t seed = 0);
    static ForestParams classification_defaults(std::uint64_t seed = 0);

    void validate() const;
    std::size_t features_per_split(std::size_t n_features) const;

    nlohmann::json to_json() const;
    static ForestParams from_json(const nlohmann::json& j);
};

struct TreeNode {
    // -1 marks a leaf.
    std::int32_t feature = -1;
    // Samples with x[feature] <= threshold go left.
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    // Offset of the leaf payload (mean target, or class counts).
    std::uint32_t payload = 0;

    bool is_leaf() const noexcept { return feature < 0; }
};

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::vector<TreeNode> nodes, std::vector<double> payload, std::size_t payload_width);

    std::size_t leaf_of(std::span<const double> x) const;
    std::span<const double> payload(std::size_t node) const;

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t payload_width() const noexcept { return width_; }
    std::size_t depth() const;

    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j, std::size_t payload_width);

private:
    std::vector<TreeNode> nodes_;
    std::vector<double> payload_;
    std::size_t width_ = 1;
};

class RegressionForest {
public:
    RegressionForest() = default;
    RegressionForest(std::vector<DecisionTree> trees, std::size_t n_features);

    double predict(std::span<const double> x) const;
    std::vector<double> predict(const Matrix& X) const;

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    std::size_t n_features() const noexcept { return n_features_; }

    nlohmann::json to_json() const;
    static RegressionForest from_json(const nlohmann::json& j);

private:
    std::vector<DecisionTree> trees_;
    std::size_t n_features_ = 0;
};

class ClassificationForest {
public:
    ClassificationForest() = default;
    ClassificationForest(std::vector<DecisionTree> trees, std::size_t n_features, std::vector<std::string> class_labels);

    // Mean over trees of the leaf class proportions.
    std::vector<double> predict_proba(std::span<const double> x) const;
    // argmax of predict_proba, ties to the lower class index.
    std::size_t predict(std::span<const double> x) const;
    const std::string& predict_label(std::span<const double> x) const;

    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const std::vector<std::string>& class_labels() const noexcept { return class_labels_; }
    std::size_t n_features() const noexcept { return n_features_; }

    nlohmann::json to_json() const;
    static ClassificationForest from_json(const nlohmann::json& j);

private:
    std::vector<DecisionTree> trees_;
    std::size_t n_features_ = 0;
    std::vector<std::string> class_labels_;
};

std::size_t argmax_first(std::span<const double> values);

RegressionForest fit_regression(const Matrix& X, std::span<const double> y, const ForestParams& params);

// labels[i] indexes class_labels.
ClassificationForest fit_classification(const Matrix& X, std::span<const std::size_t> labels,
                                        std::vector<std::string> class_labels, const ForestParams& params);

} // namespace mvela

#endif
