#ifndef MVELA_SELECTOR_HPP
#define MVELA_SELECTOR_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvela/ela.hpp"
#include "mvela/forest.hpp"
#include "mvela/portfolio.hpp"

namespace mvela {

// Best algorithm per instance (lowest ert, ties to declaration order).
std::map<std::string, std::string> label_instances(const PerformanceTable& perf);

struct LabeledRow {
    std::string instance_id;
    std::size_t repetition = 0;
    std::vector<double> features;
    std::string label;
};

struct LabeledDataset {
    EncodingTag encoding = EncodingTag::raw;
    // Classes the selector may output, in declaration order.
    std::vector<std::string> class_labels;
    std::vector<LabeledRow> rows;

    std::size_t width() const { return rows.empty() ? 0 : rows.front().features.size(); }
};

LabeledDataset make_labeled_dataset(std::span<const FeatureVector> features, EncodingTag encoding,
                                    const PerformanceTable& perf);

struct FoldPlan {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::size_t> fold_of;

    std::size_t fold(std::string_view instance_id) const;
    std::vector<std::string> instances_in(std::size_t f) const;
};

// Seeded shuffle of the sorted ids, then round-robin assignment.
FoldPlan grouped_kfold(std::vector<std::string> instances, std::size_t k, std::uint64_t seed);

class Selector {
public:
    Selector() = default;
    // Trained model.
    explicit Selector(ClassificationForest forest);
    // Constant selector for single-class training data.
    Selector(std::vector<std::string> class_labels, std::size_t constant_class);

    bool is_constant() const noexcept { return constant_; }
    const std::vector<std::string>& class_labels() const noexcept { return class_labels_; }
    std::vector<double> predict_proba(std::span<const double> x) const;
    const std::string& predict(std::span<const double> x) const;
    // Largest class probability.
    double confidence(std::span<const double> x) const;

private:
    ClassificationForest forest_;
    std::vector<std::string> class_labels_;
    bool constant_ = false;
    std::size_t constant_class_ = 0;
};

// Throws DataError on an empty training set.
Selector train_selector(std::span<const LabeledRow> rows, const std::vector<std::string>& class_labels,
                        const ForestParams& params);

// The prediction with the lower realized ert; ties and identical predictions
// go to the TE prediction.
std::string hybrid_oracle(const std::string& pred_te, const std::string& pred_sh, const PerformanceTable& perf,
                          std::string_view instance_id);

inline constexpr std::string_view kMetaTe = "TE";
inline constexpr std::string_view kMetaSh = "SH";

// Rows are aligned by position. Features are the TE block followed by the SH
// block; label TE when ert(pred_te) <= ert(pred_sh).
LabeledDataset build_meta_dataset(std::span<const LabeledRow> te_rows, std::span<const LabeledRow> sh_rows,
                                  std::span<const std::string> pred_te, std::span<const std::string> pred_sh,
                                  const PerformanceTable& perf);

std::vector<double> concat_features(std::span<const double> te, std::span<const double> sh);

std::string meta_select(const Selector& meta, std::span<const double> te_row, std::span<const double> sh_row,
                        const Selector& selector_te, const Selector& selector_sh);

std::string confidence_select(const Selector& selector_te, std::span<const double> te_row,
                              const Selector& selector_sh, std::span<const double> sh_row);

enum class Strategy { te, sh, hybrid, meta, confidence };
inline constexpr std::array<Strategy, 5> kStrategies{Strategy::te, Strategy::sh, Strategy::hybrid, Strategy::meta,
                                                     Strategy::confidence};
std::string_view to_string(Strategy s);

struct SelectionRow {
    std::string instance_id;
    std::size_t repetition = 0;
    std::size_t fold = 0;
    std::array<std::string, 5> chosen;
    std::array<double, 5> ert{};
    std::array<double, 5> relert{};
};

struct SelectionOutcome {
    std::vector<SelectionRow> rows;

    void write(const std::filesystem::path& path) const;
    static SelectionOutcome read(const std::filesystem::path& path);
};

struct SelectorConfig {
    std::size_t folds = 10;
    // Inner grouped split producing out-of-fold labels for the meta model.
    std::size_t inner_folds = 5;
    ForestParams forest = ForestParams::classification_defaults();
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static SelectorConfig from_json(const nlohmann::json& j);
};

// Grouped k-fold evaluation of the TE and SH selectors and of the Hybrid,
// Meta and Confidence strategies. Every model that predicts a test row was
// trained without that row's instance. Returns rows ordered by (instance, repetition).
SelectionOutcome run_cv_experiment(std::span<const FeatureVector> te_features,
                                   std::span<const FeatureVector> sh_features, const PerformanceTable& perf,
                                   const SelectorConfig& config, FoldPlan* plan_out = nullptr);

} // namespace mvela

#endif
