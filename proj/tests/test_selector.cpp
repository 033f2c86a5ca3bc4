#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <set>

#include "mvela/random.hpp"
#include "mvela/selector.hpp"

using namespace mvela;

namespace {

const std::vector<std::string> kAlgs{"a", "b", "c"};

std::string instance(std::size_t i)
{
    return "g" + std::to_string(i % 3) + "_" + std::to_string(i);
}

// Instance i is best solved by algorithm i % 3, which its features reveal.
PerformanceTable synthetic_perf(std::size_t n)
{
    PerformanceTable perf(kAlgs);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < 3; ++a) {
            const double ert = a == i % 3 ? 100.0 : 100.0 + 50.0 * static_cast<double>(1 + (a + i) % 2);
            perf.add({instance(i), kAlgs[a], ert, 5, static_cast<std::size_t>(ert * 5)});
        }
        perf.set_target(instance(i), 0.0);
    }
    return perf;
}

std::vector<FeatureVector> synthetic_features(std::size_t n, std::size_t reps, EncodingTag tag, double noise,
                                              std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> e(0.0, noise);
    std::vector<FeatureVector> out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < reps; ++r) {
            FeatureVector fv;
            fv.problem_id = instance(i);
            fv.repetition = r;
            fv.encoding = tag;
            for (std::size_t k = 0; k < fv.values.size(); ++k) {
                fv.values[k] = e(rng);
            }
            fv.values[0] += static_cast<double>(i % 3);
            fv.values[1] += static_cast<double>(i % 3 == 1);
            out.push_back(fv);
        }
    }
    return out;
}

} // namespace

TEST_CASE("labels follow the lowest ert")
{
    PerformanceTable perf(kAlgs);
    perf.add({"x", "a", 5.0, 1, 5});
    perf.add({"x", "b", 5.0, 1, 5});
    perf.add({"x", "c", 6.0, 1, 6});
    perf.add({"y", "a", std::numeric_limits<double>::infinity(), 0, 10});
    perf.add({"y", "b", 9.0, 1, 9});
    perf.add({"y", "c", 8.0, 1, 8});
    const auto labels = label_instances(perf);
    CHECK(labels.at("x") == "a");
    CHECK(labels.at("y") == "c");
}

TEST_CASE("grouped folds")
{
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < 702; ++i) {
        ids.push_back("p_" + std::to_string(i));
    }
    const auto plan = grouped_kfold(ids, 10, 3);
    std::set<std::size_t> sizes;
    std::size_t total = 0;
    for (std::size_t f = 0; f < 10; ++f) {
        const auto in = plan.instances_in(f);
        sizes.insert(in.size());
        total += in.size();
    }
    CHECK(sizes == std::set<std::size_t>{70, 71});
    CHECK(total == 702);

    auto shuffled = ids;
    std::reverse(shuffled.begin(), shuffled.end());
    shuffled.push_back("p_5");
    CHECK(grouped_kfold(shuffled, 10, 3).fold_of == plan.fold_of);
    CHECK(grouped_kfold(ids, 10, 4).fold_of != plan.fold_of);
    CHECK_THROWS_AS(grouped_kfold(ids, 1, 3), ConfigError);
    CHECK_THROWS_AS(grouped_kfold({"a", "b"}, 3, 3), DataError);
    CHECK_THROWS_AS(plan.fold("unknown"), DataError);
}

TEST_CASE("labeled dataset")
{
    const auto perf = synthetic_perf(6);
    auto features = synthetic_features(6, 2, EncodingTag::target, 0.1, 1);
    const auto shap = synthetic_features(6, 2, EncodingTag::shap, 0.1, 2);
    features.insert(features.end(), shap.begin(), shap.end());
    std::reverse(features.begin(), features.end());
    const auto ds = make_labeled_dataset(features, EncodingTag::target, perf);
    CHECK(ds.rows.size() == 12);
    CHECK(ds.width() == 38);
    CHECK(ds.class_labels == kAlgs);
    CHECK(ds.rows[0].instance_id == "g0_0");
    CHECK(ds.rows[0].repetition == 0);
    CHECK(ds.rows[0].label == "a");
    features.push_back(features.back());
    CHECK_THROWS_AS(make_labeled_dataset(features, EncodingTag::target, perf), DataError);
}

TEST_CASE("selectors")
{
    const auto perf = synthetic_perf(30);
    const auto ds = make_labeled_dataset(synthetic_features(30, 3, EncodingTag::target, 0.05, 3),
                                         EncodingTag::target, perf);
    auto params = ForestParams::classification_defaults(1);
    params.n_trees = 30;
    const auto sel = train_selector(ds.rows, ds.class_labels, params);
    CHECK_FALSE(sel.is_constant());
    std::size_t correct = 0;
    for (const auto& r : ds.rows) {
        correct += sel.predict(r.features) == r.label ? 1 : 0;
        const auto p = sel.predict_proba(r.features);
        CHECK(sel.confidence(r.features) == *std::max_element(p.begin(), p.end()));
    }
    CHECK(correct == ds.rows.size());

    std::vector<LabeledRow> single(ds.rows.begin(), ds.rows.begin() + 3);
    const auto constant = train_selector(single, ds.class_labels, params);
    CHECK(constant.is_constant());
    CHECK(constant.predict(ds.rows[10].features) == "a");
    CHECK(constant.confidence(ds.rows[10].features) == 1.0);
    CHECK_THROWS_AS(train_selector(std::vector<LabeledRow>{}, ds.class_labels, params), DataError);
}

TEST_CASE("hybrid, meta labels and confidence ties")
{
    PerformanceTable perf(kAlgs);
    perf.add({"x", "a", 5.0, 1, 5});
    perf.add({"x", "b", 3.0, 1, 3});
    perf.add({"x", "c", 5.0, 1, 5});
    CHECK(hybrid_oracle("a", "b", perf, "x") == "b");
    CHECK(hybrid_oracle("b", "a", perf, "x") == "b");
    CHECK(hybrid_oracle("a", "c", perf, "x") == "a");

    std::vector<LabeledRow> te{{"x", 0, {1.0}, "b"}, {"x", 1, {2.0}, "b"}};
    std::vector<LabeledRow> sh{{"x", 0, {3.0}, "b"}, {"x", 1, {4.0}, "b"}};
    const std::vector<std::string> pte{"a", "b"};
    const std::vector<std::string> psh{"b", "c"};
    const auto meta = build_meta_dataset(te, sh, pte, psh, perf);
    CHECK(meta.rows[0].label == "SH");
    CHECK(meta.rows[1].label == "TE");
    CHECK(meta.rows[0].features == std::vector<double>{1.0, 3.0});
    std::swap(sh[0], sh[1]);
    CHECK_THROWS_AS(build_meta_dataset(te, sh, pte, psh, perf), DataError);

    const Selector sel_a(kAlgs, 0);
    const Selector sel_b(kAlgs, 1);
    const std::vector<double> row{0.0};
    CHECK(confidence_select(sel_a, row, sel_b, row) == "a");
    const Selector meta_sh({"TE", "SH"}, 1);
    const Selector meta_te({"TE", "SH"}, 0);
    CHECK(meta_select(meta_sh, row, row, sel_a, sel_b) == "b");
    CHECK(meta_select(meta_te, row, row, sel_a, sel_b) == "a");
}

TEST_CASE("cross-validated experiment")
{
    const std::size_t n = 24;
    const auto perf = synthetic_perf(n);
    const auto te = synthetic_features(n, 4, EncodingTag::target, 0.3, 5);
    const auto sh = synthetic_features(n, 4, EncodingTag::shap, 0.6, 6);
    SelectorConfig cfg;
    cfg.folds = 4;
    cfg.inner_folds = 3;
    cfg.forest.n_trees = 20;
    cfg.seed = 11;
    FoldPlan plan;
    const auto out = run_cv_experiment(te, sh, perf, cfg, &plan);
    REQUIRE(out.rows.size() == n * 4);
    CHECK(plan.k == 4);
    for (const auto& r : out.rows) {
        CHECK(r.fold == plan.fold(r.instance_id));
        const double vbs = perf.vbs_ert(r.instance_id);
        for (std::size_t k = 0; k < 5; ++k) {
            CHECK(r.ert[k] == perf.ert(r.instance_id, r.chosen[k]));
            CHECK(r.relert[k] == r.ert[k] / vbs);
        }
        CHECK(r.relert[2] == std::min(r.relert[0], r.relert[1]));
        CHECK((r.chosen[3] == r.chosen[0] || r.chosen[3] == r.chosen[1]));
        CHECK((r.chosen[4] == r.chosen[0] || r.chosen[4] == r.chosen[1]));
    }
    for (std::size_t i = 1; i < out.rows.size(); ++i) {
        CHECK(std::tie(out.rows[i - 1].instance_id, out.rows[i - 1].repetition) <
              std::tie(out.rows[i].instance_id, out.rows[i].repetition));
    }

    auto threaded = cfg;
    threaded.jobs = 3;
    const auto again = run_cv_experiment(te, sh, perf, threaded);
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        CHECK(again.rows[i].chosen == out.rows[i].chosen);
    }

    const auto path =
        std::filesystem::temp_directory_path() / ("mvela_outcome_" + std::to_string(::getpid()) + ".csv");
    out.write(path);
    const auto back = SelectionOutcome::read(path);
    REQUIRE(back.rows.size() == out.rows.size());
    CHECK(back.rows[5].chosen == out.rows[5].chosen);
    CHECK(back.rows[5].relert == out.rows[5].relert);
    CHECK(back.rows[5].fold == out.rows[5].fold);
    std::filesystem::remove(path);
}

TEST_CASE("selector config json")
{
    SelectorConfig cfg;
    cfg.folds = 5;
    cfg.forest.n_trees = 12;
    const auto back = SelectorConfig::from_json(cfg.to_json());
    CHECK(back.folds == 5);
    CHECK(back.forest.n_trees == 12);
    cfg.folds = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
