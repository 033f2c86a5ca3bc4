#include "mvela/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "mvela/parallel.hpp"
#include "mvela/random.hpp"

namespace mvela {

ForestParams ForestParams::regression_defaults(std::uint64_t seed)
{
    ForestParams p;
    p.subsample = FeatureSubsample::all;
    p.seed = seed;
    return p;
}

ForestParams ForestParams::classification_defaults(std::uint64_t seed)
{
    ForestParams p;
    p.subsample = FeatureSubsample::sqrt;
    p.seed = seed;
    return p;
}

void ForestParams::validate() const
{
    if (n_trees < 1) {
        throw ConfigError("forest needs at least one tree");
    }
    if (min_samples_leaf < 1) {
        throw ConfigError("min_samples_leaf must be at least 1");
    }
    if (subsample == FeatureSubsample::fraction && !(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("feature fraction must lie in (0, 1]");
    }
    if (max_depth && *max_depth < 1) {
        throw ConfigError("max_depth must be at least 1");
    }
}

std::size_t ForestParams::features_per_split(std::size_t n_features) const
{
    switch (subsample) {
    case FeatureSubsample::all:
        return n_features;
    case FeatureSubsample::sqrt:
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))));
    case FeatureSubsample::fraction:
        return std::clamp<std::size_t>(static_cast<std::size_t>(fraction * static_cast<double>(n_features)), 1,
                                       n_features);
    }
    return n_features;
}

nlohmann::json ForestParams::to_json() const
{
    nlohmann::json j;
    j["n_trees"] = n_trees;
    j["max_depth"] = max_depth ? nlohmann::json(*max_depth) : nlohmann::json(nullptr);
    j["min_samples_leaf"] = min_samples_leaf;
    switch (subsample) {
    case FeatureSubsample::all:
        j["feature_subsample"] = "all";
        break;
    case FeatureSubsample::sqrt:
        j["feature_subsample"] = "sqrt";
        break;
    case FeatureSubsample::fraction:
        j["feature_subsample"] = fraction;
        break;
    }
    j["bootstrap"] = bootstrap;
    j["seed"] = seed;
    return j;
}

ForestParams ForestParams::from_json(const nlohmann::json& j)
{
    ForestParams p;
    p.n_trees = j.value("n_trees", p.n_trees);
    if (j.contains("max_depth") && !j.at("max_depth").is_null()) {
        p.max_depth = j.at("max_depth").get<std::size_t>();
    }
    p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
    if (j.contains("feature_subsample")) {
        const auto& fs = j.at("feature_subsample");
        if (fs.is_number()) {
            p.subsample = FeatureSubsample::fraction;
            p.fraction = fs.get<double>();
        } else if (fs.get<std::string>() == "sqrt") {
            p.subsample = FeatureSubsample::sqrt;
        } else if (fs.get<std::string>() == "all") {
            p.subsample = FeatureSubsample::all;
        } else {
            throw ConfigError("unknown feature_subsample '" + fs.get<std::string>() + "'");
        }
    }
    p.bootstrap = j.value("bootstrap", p.bootstrap);
    p.seed = j.value("seed", p.seed);
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, std::vector<double> payload, std::size_t payload_width)
    : nodes_(std::move(nodes))
    , payload_(std::move(payload))
    , width_(payload_width)
{
    if (nodes_.empty()) {
        throw DataError("tree without nodes");
    }
    for (const auto& n : nodes_) {
        if (n.is_leaf()) {
            if (n.payload + width_ > payload_.size()) {
                throw DataError("tree leaf payload out of range");
            }
        } else if (n.left < 0 || n.right < 0 || static_cast<std::size_t>(n.left) >= nodes_.size() ||
                   static_cast<std::size_t>(n.right) >= nodes_.size()) {
            throw DataError("tree child index out of range");
        }
    }
}

std::size_t DecisionTree::leaf_of(std::span<const double> x) const
{
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return i;
}

std::span<const double> DecisionTree::payload(std::size_t node) const
{
    return {payload_.data() + nodes_[node].payload, width_};
}

std::size_t DecisionTree::depth() const
{
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes_[i].is_leaf()) {
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
        }
    }
    return deepest;
}

nlohmann::json DecisionTree::to_json() const
{
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (n.is_leaf()) {
            const auto p = payload(i);
            nodes.push_back({{"leaf", std::vector<double>(p.begin(), p.end())}});
        } else {
            nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
        }
    }
    return {{"nodes", nodes}};
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j, std::size_t payload_width)
{
    std::vector<TreeNode> nodes;
    std::vector<double> payload;
    for (const auto& n : j.at("nodes")) {
        TreeNode node;
        if (n.contains("leaf")) {
            const auto values = n.at("leaf").get<std::vector<double>>();
            if (values.size() != payload_width) {
                throw DataError("tree leaf payload has wrong width");
            }
            node.payload = static_cast<std::uint32_t>(payload.size());
            payload.insert(payload.end(), values.begin(), values.end());
        } else {
            node.feature = n.at("feature").get<std::int32_t>();
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<std::int32_t>();
            node.right = n.at("right").get<std::int32_t>();
        }
        nodes.push_back(node);
    }
    return DecisionTree(std::move(nodes), std::move(payload), payload_width);
}

namespace {

// Grows one CART tree over a (possibly repeated) sample index set. Regression
// maximizes variance reduction, classification Gini reduction. Both reduce to
// maximizing a child "purity proxy":
//   regression:      sum_L^2 / n_L + sum_R^2 / n_R
//   classification:  sum_c cL_c^2 / n_L + sum_c cR_c^2 / n_R
class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const double> targets, std::size_t n_classes, const ForestParams& params)
        : X_(X)
        , targets_(targets)
        , n_classes_(n_classes)
        , params_(params)
        , n_features_(static_cast<std::size_t>(X.cols()))
    {
    }

    DecisionTree build(std::vector<std::size_t> samples, Rng& rng)
    {
        samples_ = std::move(samples);
        nodes_.clear();
        payload_.clear();
        nodes_.push_back({});
        struct Pending {
            std::size_t node, begin, end, depth;
        };
        std::vector<Pending> stack{{0, 0, samples_.size(), 0}};
        while (!stack.empty()) {
            const auto task = stack.back();
            stack.pop_back();
            const auto split = find_split(task.begin, task.end, task.depth, rng);
            if (!split) {
                make_leaf(task.node, task.begin, task.end);
                continue;
            }
            const auto first = samples_.begin() + static_cast<std::ptrdiff_t>(task.begin);
            const auto last = samples_.begin() + static_cast<std::ptrdiff_t>(task.end);
            const auto middle = std::stable_partition(first, last, [&](std::size_t s) {
                return X_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(split->feature)) <= split->threshold;
            });
            const auto mid = static_cast<std::size_t>(middle - samples_.begin());
            const auto left = static_cast<std::int32_t>(nodes_.size());
            nodes_.push_back({});
            nodes_.push_back({});
            auto& node = nodes_[task.node];
            node.feature = static_cast<std::int32_t>(split->feature);
            node.threshold = split->threshold;
            node.left = left;
            node.right = left + 1;
            stack.push_back({static_cast<std::size_t>(left) + 1, mid, task.end, task.depth + 1});
            stack.push_back({static_cast<std::size_t>(left), task.begin, mid, task.depth + 1});
        }
        return DecisionTree(std::move(nodes_), std::move(payload_), n_classes_ == 0 ? 1 : n_classes_);
    }

private:
    struct Split {
        std::size_t feature;
        double threshold;
    };

    double target(std::size_t s) const { return targets_[s]; }
    std::size_t label(std::size_t s) const { return static_cast<std::size_t>(targets_[s]); }

    bool pure(std::size_t begin, std::size_t end) const
    {
        const double first = targets_[samples_[begin]];
        for (std::size_t i = begin + 1; i < end; ++i) {
            if (targets_[samples_[i]] != first) {
                return false;
            }
        }
        return true;
    }

    std::optional<Split> find_split(std::size_t begin, std::size_t end, std::size_t depth, Rng& rng)
    {
        const std::size_t n = end - begin;
        if (n < 2 * params_.min_samples_leaf || pure(begin, end)) {
            return std::nullopt;
        }
        if (params_.max_depth && depth >= *params_.max_depth) {
            return std::nullopt;
        }
        std::vector<std::size_t> order(n_features_);
        std::iota(order.begin(), order.end(), 0);
        const std::size_t m = params_.features_per_split(n_features_);
        if (m < n_features_) {
            for (std::size_t i = 0; i < m; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n_features_ - 1);
                std::swap(order[i], order[pick(rng)]);
            }
            std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
            std::sort(order.begin() + static_cast<std::ptrdiff_t>(m), order.end());
        }
        Best best;
        for (std::size_t i = 0; i < m; ++i) {
            scan_feature(order[i], begin, end, best);
        }
        // None of the drawn features can split the node: fall back to the rest.
        for (std::size_t i = m; i < n_features_ && !best.split; ++i) {
            scan_feature(order[i], begin, end, best);
        }
        if (!best.split) {
            return std::nullopt;
        }
        return best.split;
    }

    struct Best {
        std::optional<Split> split;
        double proxy = -std::numeric_limits<double>::infinity();

        void offer(std::size_t feature, double threshold, double value)
        {
            // Ties keep the earlier (lower feature, then lower threshold) candidate.
            const double tol = 1e-12 * std::max(1.0, std::abs(proxy));
            if (!split || value > proxy + tol) {
                split = Split{feature, threshold};
                proxy = value;
            }
        }
    };

    void scan_feature(std::size_t feature, std::size_t begin, std::size_t end, Best& best)
    {
        const std::size_t n = end - begin;
        buffer_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto s = samples_[begin + i];
            buffer_[i] = {X_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(feature)), s};
        }
        std::sort(buffer_.begin(), buffer_.end());
        if (buffer_.front().first == buffer_.back().first) {
            return;
        }
        const std::size_t msl = params_.min_samples_leaf;
        if (n_classes_ == 0) {
            double total = 0.0;
            for (const auto& [x, s] : buffer_) {
                total += target(s);
            }
            double left = 0.0;
            for (std::size_t p = 1; p < n; ++p) {
                left += target(buffer_[p - 1].second);
                if (p < msl || n - p < msl || buffer_[p - 1].first == buffer_[p].first) {
                    continue;
                }
                const double right = total - left;
                const double proxy = left * left / static_cast<double>(p) + right * right / static_cast<double>(n - p);
                best.offer(feature, threshold(buffer_[p - 1].first, buffer_[p].first), proxy);
            }
        } else {
            counts_left_.assign(n_classes_, 0.0);
            counts_right_.assign(n_classes_, 0.0);
            for (const auto& [x, s] : buffer_) {
                counts_right_[label(s)] += 1.0;
            }
            double sq_left = 0.0;
            double sq_right = 0.0;
            for (double c : counts_right_) {
                sq_right += c * c;
            }
            for (std::size_t p = 1; p < n; ++p) {
                const auto c = label(buffer_[p - 1].second);
                sq_left += 2.0 * counts_left_[c] + 1.0;
                sq_right -= 2.0 * counts_right_[c] - 1.0;
                counts_left_[c] += 1.0;
                counts_right_[c] -= 1.0;
                if (p < msl || n - p < msl || buffer_[p - 1].first == buffer_[p].first) {
                    continue;
                }
                const double proxy = sq_left / static_cast<double>(p) + sq_right / static_cast<double>(n - p);
                best.offer(feature, threshold(buffer_[p - 1].first, buffer_[p].first), proxy);
            }
        }
    }

    static double threshold(double lo, double hi)
    {
        const double mid = lo + 0.5 * (hi - lo);
        return mid < hi ? mid : lo;
    }

    void make_leaf(std::size_t node, std::size_t begin, std::size_t end)
    {
        nodes_[node].feature = -1;
        nodes_[node].payload = static_cast<std::uint32_t>(payload_.size());
        if (n_classes_ == 0) {
            double sum = 0.0;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (std::size_t i = begin; i < end; ++i) {
                const double t = target(samples_[i]);
                sum += t;
                lo = std::min(lo, t);
                hi = std::max(hi, t);
            }
            payload_.push_back(std::clamp(sum / static_cast<double>(end - begin), lo, hi));
        } else {
            const auto offset = payload_.size();
            payload_.resize(offset + n_classes_, 0.0);
            for (std::size_t i = begin; i < end; ++i) {
                payload_[offset + label(samples_[i])] += 1.0;
            }
        }
    }

    const Matrix& X_;
    std::span<const double> targets_;
    std::size_t n_classes_;
    const ForestParams& params_;
    std::size_t n_features_;

    std::vector<std::size_t> samples_;
    std::vector<TreeNode> nodes_;
    std::vector<double> payload_;
    std::vector<std::pair<double, std::size_t>> buffer_;
    std::vector<double> counts_left_;
    std::vector<double> counts_right_;
};

void check_training_data(const Matrix& X, std::size_t n_targets)
{
    if (X.rows() == 0 || X.cols() == 0) {
        throw DataError("cannot fit a forest on empty data");
    }
    if (static_cast<std::size_t>(X.rows()) != n_targets) {
        throw DimensionError("forest training targets do not match the number of rows");
    }
    if (!X.allFinite()) {
        throw DataError("forest training data contains non-finite values");
    }
}

std::vector<DecisionTree> grow_trees(const Matrix& X, std::span<const double> targets, std::size_t n_classes,
                                     const ForestParams& params)
{
    params.validate();
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<DecisionTree> trees(params.n_trees);
    parallel_for(params.n_trees, params.jobs, [&](std::size_t t) {
        Rng rng(derive_seed(params.seed, t));
        std::vector<std::size_t> samples(n);
        if (params.bootstrap) {
            std::uniform_int_distribution<std::size_t> draw(0, n - 1);
            for (auto& s : samples) {
                s = draw(rng);
            }
        } else {
            std::iota(samples.begin(), samples.end(), 0);
        }
        TreeBuilder builder(X, targets, n_classes, params);
        trees[t] = builder.build(std::move(samples), rng);
    });
    return trees;
}

void check_dimension(std::span<const double> x, std::size_t expected)
{
    if (x.size() != expected) {
        throw DimensionError("forest expects " + std::to_string(expected) + " features, got " +
                             std::to_string(x.size()));
    }
}

} // namespace

RegressionForest::RegressionForest(std::vector<DecisionTree> trees, std::size_t n_features)
    : trees_(std::move(trees))
    , n_features_(n_features)
{
    if (trees_.empty()) {
        throw DataError("forest without trees");
    }
}

double RegressionForest::predict(std::span<const double> x) const
{
    check_dimension(x, n_features_);
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& tree : trees_) {
        const double v = tree.payload(tree.leaf_of(x))[0];
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return std::clamp(sum / static_cast<double>(trees_.size()), lo, hi);
}

std::vector<double> RegressionForest::predict(const Matrix& X) const
{
    std::vector<double> out(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        out[static_cast<std::size_t>(r)] = predict(row_span(X, r));
    }
    return out;
}

nlohmann::json RegressionForest::to_json() const
{
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) {
        trees.push_back(t.to_json());
    }
    return {{"format", "mvela-forest"}, {"version", 1}, {"task", "regression"}, {"n_features", n_features_},
            {"trees", trees}};
}

RegressionForest RegressionForest::from_json(const nlohmann::json& j)
{
    if (j.at("version").get<int>() != 1 || j.at("task").get<std::string>() != "regression") {
        throw DataError("not a version 1 regression forest dump");
    }
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) {
        trees.push_back(DecisionTree::from_json(t, 1));
    }
    return RegressionForest(std::move(trees), j.at("n_features").get<std::size_t>());
}

ClassificationForest::ClassificationForest(std::vector<DecisionTree> trees, std::size_t n_features,
                                           std::vector<std::string> class_labels)
    : trees_(std::move(trees))
    , n_features_(n_features)
    , class_labels_(std::move(class_labels))
{
    if (trees_.empty()) {
        throw DataError("forest without trees");
    }
    if (class_labels_.empty()) {
        throw DataError("classification forest without classes");
    }
    for (const auto& t : trees_) {
        if (t.payload_width() != class_labels_.size()) {
            throw DataError("tree payload width does not match the number of classes");
        }
    }
}

std::vector<double> ClassificationForest::predict_proba(std::span<const double> x) const
{
    check_dimension(x, n_features_);
    std::vector<double> proba(class_labels_.size(), 0.0);
    for (const auto& tree : trees_) {
        const auto counts = tree.payload(tree.leaf_of(x));
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        for (std::size_t c = 0; c < proba.size(); ++c) {
            proba[c] += counts[c] / total;
        }
    }
    for (auto& p : proba) {
        p /= static_cast<double>(trees_.size());
    }
    return proba;
}

std::size_t argmax_first(std::span<const double> values)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

std::size_t ClassificationForest::predict(std::span<const double> x) const
{
    return argmax_first(predict_proba(x));
}

const std::string& ClassificationForest::predict_label(std::span<const double> x) const
{
    return class_labels_[predict(x)];
}

nlohmann::json ClassificationForest::to_json() const
{
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) {
        trees.push_back(t.to_json());
    }
    return {{"format", "mvela-forest"}, {"version", 1},       {"task", "classification"}, {"n_features", n_features_},
            {"class_labels", class_labels_}, {"trees", trees}};
}

ClassificationForest ClassificationForest::from_json(const nlohmann::json& j)
{
    if (j.at("version").get<int>() != 1 || j.at("task").get<std::string>() != "classification") {
        throw DataError("not a version 1 classification forest dump");
    }
    auto labels = j.at("class_labels").get<std::vector<std::string>>();
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) {
        trees.push_back(DecisionTree::from_json(t, labels.size()));
    }
    return ClassificationForest(std::move(trees), j.at("n_features").get<std::size_t>(), std::move(labels));
}

RegressionForest fit_regression(const Matrix& X, std::span<const double> y, const ForestParams& params)
{
    check_training_data(X, y.size());
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw DataError("forest regression target contains non-finite values");
        }
    }
    return RegressionForest(grow_trees(X, y, 0, params), static_cast<std::size_t>(X.cols()));
}

ClassificationForest fit_classification(const Matrix& X, std::span<const std::size_t> labels,
                                        std::vector<std::string> class_labels, const ForestParams& params)
{
    check_training_data(X, labels.size());
    if (class_labels.empty()) {
        throw DataError("classification needs at least one class label");
    }
    std::vector<double> targets(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= class_labels.size()) {
            throw DataError("class index out of range");
        }
        targets[i] = static_cast<double>(labels[i]);
    }
    const auto n_classes = class_labels.size();
    return ClassificationForest(grow_trees(X, targets, n_classes, params), static_cast<std::size_t>(X.cols()),
                                std::move(class_labels));
}

} // namespace mvela
