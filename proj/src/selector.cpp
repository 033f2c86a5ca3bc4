#include "mvela/selector.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "mvela/core.hpp"
#include "mvela/csv.hpp"
#include "mvela/parallel.hpp"
#include "mvela/random.hpp"

namespace mvela {

std::map<std::string, std::string> label_instances(const PerformanceTable& perf)
{
    std::map<std::string, std::string> out;
    for (const auto& inst : perf.instances()) {
        const std::string* best = nullptr;
        double best_ert = 0.0;
        for (const auto& a : perf.algorithms()) {
            const double e = perf.ert(inst, a);
            if (best == nullptr || e < best_ert) {
                best = &a;
                best_ert = e;
            }
        }
        out[inst] = *best;
    }
    return out;
}

LabeledDataset make_labeled_dataset(std::span<const FeatureVector> features, EncodingTag encoding,
                                    const PerformanceTable& perf)
{
    const auto labels = label_instances(perf);
    LabeledDataset out;
    out.encoding = encoding;
    out.class_labels = perf.algorithms();
    for (const auto& fv : features) {
        if (fv.encoding != encoding) {
            continue;
        }
        const auto it = labels.find(fv.problem_id);
        if (it == labels.end()) {
            throw DataError("no performance data for instance '" + fv.problem_id + "'");
        }
        out.rows.push_back({fv.problem_id, fv.repetition, std::vector<double>(fv.values.begin(), fv.values.end()),
                            it->second});
    }
    std::sort(out.rows.begin(), out.rows.end(), [](const LabeledRow& a, const LabeledRow& b) {
        return std::tie(a.instance_id, a.repetition) < std::tie(b.instance_id, b.repetition);
    });
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
        if (out.rows[i].instance_id == out.rows[i - 1].instance_id &&
            out.rows[i].repetition == out.rows[i - 1].repetition) {
            throw DataError("duplicate feature row for (" + out.rows[i].instance_id + ", " +
                            std::to_string(out.rows[i].repetition) + ")");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::size_t FoldPlan::fold(std::string_view instance_id) const
{
    const auto it = fold_of.find(std::string(instance_id));
    if (it == fold_of.end()) {
        throw DataError("instance '" + std::string(instance_id) + "' is not part of the fold plan");
    }
    return it->second;
}

std::vector<std::string> FoldPlan::instances_in(std::size_t f) const
{
    std::vector<std::string> out;
    for (const auto& [id, fold] : fold_of) {
        if (fold == f) {
            out.push_back(id);
        }
    }
    return out;
}

FoldPlan grouped_kfold(std::vector<std::string> instances, std::size_t k, std::uint64_t seed)
{
    std::sort(instances.begin(), instances.end());
    instances.erase(std::unique(instances.begin(), instances.end()), instances.end());
    if (k < 2) {
        throw ConfigError("grouped k-fold needs k >= 2");
    }
    if (instances.size() < k) {
        throw DataError("grouped k-fold with k = " + std::to_string(k) + " needs at least k instances, got " +
                        std::to_string(instances.size()));
    }
    Rng rng(seed);
    std::shuffle(instances.begin(), instances.end(), rng);
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        plan.fold_of[instances[i]] = i % k;
    }
    return plan;
}

// ---------------------------------------------------------------------------

Selector::Selector(ClassificationForest forest)
    : forest_(std::move(forest))
    , class_labels_(forest_.class_labels())
{
}

Selector::Selector(std::vector<std::string> class_labels, std::size_t constant_class)
    : class_labels_(std::move(class_labels))
    , constant_(true)
    , constant_class_(constant_class)
{
    if (constant_class_ >= class_labels_.size()) {
        throw DataError("constant selector class out of range");
    }
}

std::vector<double> Selector::predict_proba(std::span<const double> x) const
{
    if (constant_) {
        std::vector<double> p(class_labels_.size(), 0.0);
        p[constant_class_] = 1.0;
        return p;
    }
    return forest_.predict_proba(x);
}

const std::string& Selector::predict(std::span<const double> x) const
{
    if (constant_) {
        return class_labels_[constant_class_];
    }
    return forest_.predict_label(x);
}

double Selector::confidence(std::span<const double> x) const
{
    const auto p = predict_proba(x);
    return *std::max_element(p.begin(), p.end());
}

Selector train_selector(std::span<const LabeledRow> rows, const std::vector<std::string>& class_labels,
                        const ForestParams& params)
{
    if (rows.empty()) {
        throw DataError("cannot train a selector on an empty training set");
    }
    const std::size_t width = rows.front().features.size();
    Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    std::vector<std::size_t> labels(rows.size());
    std::set<std::size_t> present;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].features.size() != width) {
            throw DimensionError("selector training rows differ in width");
        }
        const auto it = std::find(class_labels.begin(), class_labels.end(), rows[r].label);
        if (it == class_labels.end()) {
            throw DataError("label '" + rows[r].label + "' is not a known class");
        }
        labels[r] = static_cast<std::size_t>(it - class_labels.begin());
        present.insert(labels[r]);
        for (std::size_t c = 0; c < width; ++c) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].features[c];
        }
    }
    if (present.size() == 1) {
        return Selector(class_labels, *present.begin());
    }
    return Selector(fit_classification(X, labels, class_labels, params));
}

std::string hybrid_oracle(const std::string& pred_te, const std::string& pred_sh, const PerformanceTable& perf,
                          std::string_view instance_id)
{
    return perf.ert(instance_id, pred_sh) < perf.ert(instance_id, pred_te) ? pred_sh : pred_te;
}

std::vector<double> concat_features(std::span<const double> te, std::span<const double> sh)
{
    std::vector<double> out(te.begin(), te.end());
    out.insert(out.end(), sh.begin(), sh.end());
    return out;
}

LabeledDataset build_meta_dataset(std::span<const LabeledRow> te_rows, std::span<const LabeledRow> sh_rows,
                                  std::span<const std::string> pred_te, std::span<const std::string> pred_sh,
                                  const PerformanceTable& perf)
{
    if (te_rows.size() != sh_rows.size() || te_rows.size() != pred_te.size() || te_rows.size() != pred_sh.size()) {
        throw DimensionError("meta dataset inputs differ in length");
    }
    LabeledDataset out;
    out.class_labels = {std::string(kMetaTe), std::string(kMetaSh)};
    out.rows.reserve(te_rows.size());
    for (std::size_t i = 0; i < te_rows.size(); ++i) {
        const auto& te = te_rows[i];
        const auto& sh = sh_rows[i];
        if (te.instance_id != sh.instance_id || te.repetition != sh.repetition) {
            throw DataError("meta dataset rows are misaligned at position " + std::to_string(i));
        }
        const bool te_wins = perf.ert(te.instance_id, pred_te[i]) <= perf.ert(te.instance_id, pred_sh[i]);
        out.rows.push_back({te.instance_id, te.repetition, concat_features(te.features, sh.features),
                            std::string(te_wins ? kMetaTe : kMetaSh)});
    }
    return out;
}

std::string meta_select(const Selector& meta, std::span<const double> te_row, std::span<const double> sh_row,
                        const Selector& selector_te, const Selector& selector_sh)
{
    const auto joint = concat_features(te_row, sh_row);
    if (meta.predict(joint) == kMetaSh) {
        return selector_sh.predict(sh_row);
    }
    return selector_te.predict(te_row);
}

std::string confidence_select(const Selector& selector_te, std::span<const double> te_row,
                              const Selector& selector_sh, std::span<const double> sh_row)
{
    if (selector_sh.confidence(sh_row) > selector_te.confidence(te_row)) {
        return selector_sh.predict(sh_row);
    }
    return selector_te.predict(te_row);
}

std::string_view to_string(Strategy s)
{
    switch (s) {
    case Strategy::te:
        return "TE";
    case Strategy::sh:
        return "SH";
    case Strategy::hybrid:
        return "Hybrid";
    case Strategy::meta:
        return "Meta";
    case Strategy::confidence:
        return "Confidence";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------

void SelectionOutcome::write(const std::filesystem::path& path) const
{
    csv::Table table;
    table.header = {"instance", "repetition", "fold"};
    for (auto s : kStrategies) {
        const std::string name(to_string(s));
        table.header.push_back(name + "_algorithm");
        table.header.push_back(name + "_ert");
        table.header.push_back(name + "_relert");
    }
    for (const auto& r : rows) {
        csv::Row row{r.instance_id, std::to_string(r.repetition), std::to_string(r.fold)};
        for (std::size_t s = 0; s < kStrategies.size(); ++s) {
            row.push_back(r.chosen[s]);
            row.push_back(csv::format_double(r.ert[s]));
            row.push_back(csv::format_double(r.relert[s]));
        }
        table.rows.push_back(std::move(row));
    }
    csv::write(path, table);
}

SelectionOutcome SelectionOutcome::read(const std::filesystem::path& path)
{
    const auto table = csv::read(path);
    const auto c_inst = table.column("instance");
    const auto c_rep = table.column("repetition");
    const auto c_fold = table.column("fold");
    std::array<std::array<std::size_t, 3>, 5> cols{};
    for (std::size_t s = 0; s < kStrategies.size(); ++s) {
        const std::string name(to_string(kStrategies[s]));
        cols[s] = {table.column(name + "_algorithm"), table.column(name + "_ert"), table.column(name + "_relert")};
    }
    SelectionOutcome out;
    for (const auto& row : table.rows) {
        SelectionRow r;
        r.instance_id = row[c_inst];
        r.repetition = static_cast<std::size_t>(std::stoull(row[c_rep]));
        r.fold = static_cast<std::size_t>(std::stoull(row[c_fold]));
        for (std::size_t s = 0; s < kStrategies.size(); ++s) {
            r.chosen[s] = row[cols[s][0]];
            r.ert[s] = csv::parse_double(row[cols[s][1]]);
            r.relert[s] = csv::parse_double(row[cols[s][2]]);
        }
        out.rows.push_back(std::move(r));
    }
    return out;
}

void SelectorConfig::validate() const
{
    if (folds < 2) {
        throw ConfigError("cv folds must be at least 2");
    }
    if (inner_folds < 2) {
        throw ConfigError("inner cv folds must be at least 2");
    }
    forest.validate();
}

nlohmann::json SelectorConfig::to_json() const
{
    return {{"folds", folds}, {"inner_folds", inner_folds}, {"forest", forest.to_json()}, {"seed", seed}};
}

SelectorConfig SelectorConfig::from_json(const nlohmann::json& j)
{
    SelectorConfig c;
    c.folds = j.value("folds", c.folds);
    c.inner_folds = j.value("inner_folds", c.inner_folds);
    if (j.contains("forest")) {
        c.forest = ForestParams::from_json(j.at("forest"));
    }
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<LabeledRow> pick(const std::vector<LabeledRow>& rows, const std::vector<std::size_t>& idx)
{
    std::vector<LabeledRow> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        out.push_back(rows[i]);
    }
    return out;
}

ForestParams seeded(const ForestParams& base, std::uint64_t seed)
{
    ForestParams p = base;
    p.seed = seed;
    p.jobs = 1;
    return p;
}

// Meta model trained on out-of-fold TE/SH predictions within `train`.
Selector train_meta(const std::vector<LabeledRow>& te_rows, const std::vector<LabeledRow>& sh_rows,
                    const std::vector<std::size_t>& train, const std::vector<std::string>& classes,
                    const PerformanceTable& perf, const SelectorConfig& config, std::uint64_t seed)
{
    std::vector<std::string> ids;
    for (auto i : train) {
        ids.push_back(te_rows[i].instance_id);
    }
    const auto inner = grouped_kfold(ids, config.inner_folds, derive_seed(seed, 0));
    std::vector<std::string> pred_te(train.size());
    std::vector<std::string> pred_sh(train.size());
    for (std::size_t g = 0; g < inner.k; ++g) {
        std::vector<std::size_t> fit_idx;
        std::vector<std::size_t> out_pos;
        for (std::size_t p = 0; p < train.size(); ++p) {
            if (inner.fold(te_rows[train[p]].instance_id) == g) {
                out_pos.push_back(p);
            } else {
                fit_idx.push_back(train[p]);
            }
        }
        const auto sel_te = train_selector(pick(te_rows, fit_idx), classes, seeded(config.forest, derive_seed(seed, g, 1)));
        const auto sel_sh = train_selector(pick(sh_rows, fit_idx), classes, seeded(config.forest, derive_seed(seed, g, 2)));
        for (auto p : out_pos) {
            pred_te[p] = sel_te.predict(te_rows[train[p]].features);
            pred_sh[p] = sel_sh.predict(sh_rows[train[p]].features);
        }
    }
    const auto meta = build_meta_dataset(pick(te_rows, train), pick(sh_rows, train), pred_te, pred_sh, perf);
    return train_selector(meta.rows, meta.class_labels, seeded(config.forest, derive_seed(seed, 1)));
}

} // namespace

SelectionOutcome run_cv_experiment(std::span<const FeatureVector> te_features,
                                   std::span<const FeatureVector> sh_features, const PerformanceTable& perf,
                                   const SelectorConfig& config, FoldPlan* plan_out)
{
    config.validate();
    const auto te = make_labeled_dataset(te_features, EncodingTag::target, perf);
    const auto sh = make_labeled_dataset(sh_features, EncodingTag::shap, perf);
    if (te.rows.size() != sh.rows.size()) {
        throw DataError("TE and SH feature tables have different row counts");
    }
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < te.rows.size(); ++i) {
        if (te.rows[i].instance_id != sh.rows[i].instance_id || te.rows[i].repetition != sh.rows[i].repetition) {
            throw DataError("TE and SH feature tables cover different (instance, repetition) rows");
        }
        ids.push_back(te.rows[i].instance_id);
    }
    const auto plan = grouped_kfold(ids, config.folds, derive_seed(config.seed, 0));
    const auto& classes = perf.algorithms();

    std::vector<std::vector<SelectionRow>> per_fold(plan.k);
    parallel_for(plan.k, config.jobs, [&](std::size_t f) {
        const std::uint64_t fold_seed = derive_seed(config.seed, 1, f);
        std::vector<std::size_t> train;
        std::vector<std::size_t> test;
        for (std::size_t i = 0; i < te.rows.size(); ++i) {
            (plan.fold(te.rows[i].instance_id) == f ? test : train).push_back(i);
        }
        const auto sel_te = train_selector(pick(te.rows, train), classes, seeded(config.forest, derive_seed(fold_seed, 1)));
        const auto sel_sh = train_selector(pick(sh.rows, train), classes, seeded(config.forest, derive_seed(fold_seed, 2)));
        const auto meta = train_meta(te.rows, sh.rows, train, classes, perf, config, derive_seed(fold_seed, 3));

        for (auto i : test) {
            const auto& id = te.rows[i].instance_id;
            const auto& x_te = te.rows[i].features;
            const auto& x_sh = sh.rows[i].features;
            SelectionRow row;
            row.instance_id = id;
            row.repetition = te.rows[i].repetition;
            row.fold = f;
            const auto p_te = sel_te.predict(x_te);
            const auto p_sh = sel_sh.predict(x_sh);
            row.chosen = {p_te, p_sh, hybrid_oracle(p_te, p_sh, perf, id), meta_select(meta, x_te, x_sh, sel_te, sel_sh),
                          confidence_select(sel_te, x_te, sel_sh, x_sh)};
            const double vbs = perf.vbs_ert(id);
            for (std::size_t s = 0; s < row.chosen.size(); ++s) {
                row.ert[s] = perf.ert(id, row.chosen[s]);
                row.relert[s] = row.ert[s] / vbs;
            }
            per_fold[f].push_back(std::move(row));
        }
    });

    SelectionOutcome out;
    for (auto& rows : per_fold) {
        out.rows.insert(out.rows.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
    }
    std::sort(out.rows.begin(), out.rows.end(), [](const SelectionRow& a, const SelectionRow& b) {
        return std::tie(a.instance_id, a.repetition) < std::tie(b.instance_id, b.repetition);
    });
    if (plan_out != nullptr) {
        *plan_out = plan;
    }
    return out;
}

} // namespace mvela
