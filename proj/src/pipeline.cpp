#include "mvela/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

#include "mvela/csv.hpp"
#include "mvela/design.hpp"
#include "mvela/ela.hpp"
#include "mvela/metrics.hpp"
#include "mvela/parallel.hpp"
#include "mvela/portfolio.hpp"
#include "mvela/random.hpp"
#include "mvela/selector.hpp"

namespace mvela {

namespace fs = std::filesystem;

SuiteConfig PipelineConfig::default_suite()
{
    SuiteConfig s;
    s.templates = {
        {2, 1, 1, 3, false, 10},
        {1, 1, 2, 3, false, 10},
        {2, 0, 1, 3, true, 10},
        {1, 0, 2, 4, false, 10},
        {3, 0, 1, 3, false, 10},
    };
    return s;
}

void PipelineConfig::validate() const
{
    suite.validate();
    if (design_multiplier < 1) {
        throw ConfigError("design_multiplier must be at least 1");
    }
    if (repetitions < 1) {
        throw ConfigError("repetitions must be at least 1");
    }
    if (budget_multiplier < 1) {
        throw ConfigError("budget_multiplier must be at least 1");
    }
    encoder.validate();
    selector_forest.validate();
    SelectorConfig{cv_folds, meta_inner_folds, selector_forest, 0, 1}.validate();
}

nlohmann::json PipelineConfig::to_json() const
{
    return {{"suite", mvela::to_json(suite)},
            {"design_multiplier", design_multiplier},
            {"repetitions", repetitions},
            {"encoder", encoder.to_json()},
            {"selector_forest", selector_forest.to_json()},
            {"budget_multiplier", budget_multiplier},
            {"cv_folds", cv_folds},
            {"meta_inner_folds", meta_inner_folds},
            {"seed", seed}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw ConfigError("pipeline config must be a JSON object");
    }
    static const std::vector<std::string> known{"suite",           "design_multiplier", "repetitions",
                                                "encoder",         "selector_forest",   "budget_multiplier",
                                                "cv_folds",        "meta_inner_folds",  "seed",
                                                "out",             "jobs"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    PipelineConfig c;
    try {
        if (j.contains("suite")) {
            c.suite = suite_config_from_json(j.at("suite"));
        }
        c.design_multiplier = j.value("design_multiplier", c.design_multiplier);
        c.repetitions = j.value("repetitions", c.repetitions);
        if (j.contains("encoder")) {
            c.encoder = EncoderConfig::from_json(j.at("encoder"));
        }
        if (j.contains("selector_forest")) {
            auto merged = ForestParams::classification_defaults().to_json();
            merged.merge_patch(j.at("selector_forest"));
            c.selector_forest = ForestParams::from_json(merged);
        }
        c.budget_multiplier = j.value("budget_multiplier", c.budget_multiplier);
        c.cv_folds = j.value("cv_folds", c.cv_folds);
        c.meta_inner_folds = j.value("meta_inner_folds", c.meta_inner_folds);
        c.seed = j.value("seed", c.seed);
        if (j.contains("out")) {
            c.out = j.at("out").get<std::string>();
        }
        c.jobs = j.value("jobs", c.jobs);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed pipeline config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

std::vector<std::string_view> prerequisites(std::string_view stage)
{
    if (stage == "suite") {
        return {};
    }
    if (stage == "sample" || stage == "bench") {
        return {"suite"};
    }
    if (stage == "encode") {
        return {"sample"};
    }
    if (stage == "features") {
        return {"encode"};
    }
    if (stage == "select") {
        return {"features", "bench"};
    }
    if (stage == "report") {
        return {"select", "bench"};
    }
    throw ConfigError("unknown stage '" + std::string(stage) + "'");
}

nlohmann::json stage_slice(const PipelineConfig& c, std::string_view stage)
{
    if (stage == "suite") {
        return {{"suite", to_json(c.suite)}};
    }
    if (stage == "sample") {
        return {{"design_multiplier", c.design_multiplier}, {"repetitions", c.repetitions}};
    }
    if (stage == "encode") {
        return {{"encoder", c.encoder.to_json()}};
    }
    if (stage == "features") {
        return {{"feature_count", kFeatureCount}};
    }
    if (stage == "bench") {
        return {{"budget_multiplier", c.budget_multiplier}, {"repetitions", c.repetitions}, {"portfolio", kPortfolio}};
    }
    if (stage == "select") {
        return {{"selector_forest", c.selector_forest.to_json()},
                {"cv_folds", c.cv_folds},
                {"meta_inner_folds", c.meta_inner_folds}};
    }
    return nlohmann::json::object();
}

std::string hex(std::uint64_t v)
{
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

fs::path stage_dir(const PipelineConfig& c, std::string_view stage)
{
    return c.out / std::string(stage);
}

fs::path manifest_path(const PipelineConfig& c, std::string_view stage)
{
    return stage_dir(c, stage) / "stage.json";
}

std::optional<nlohmann::json> read_manifest(const PipelineConfig& c, std::string_view stage)
{
    const auto path = manifest_path(c, stage);
    if (!fs::exists(path)) {
        return std::nullopt;
    }
    return csv::read_json(path);
}

void check_prerequisites(const PipelineConfig& c, std::string_view stage)
{
    for (auto p : prerequisites(stage)) {
        const auto manifest = read_manifest(c, p);
        if (!manifest) {
            throw StageError(std::string(stage), "stage '" + std::string(stage) + "' needs the output of stage '" +
                                                     std::string(p) + "', which is missing under " +
                                                     stage_dir(c, p).string() + "; run stage '" + std::string(p) +
                                                     "' first");
        }
        const auto expected = stage_hash(c, p);
        const auto found = manifest->value("config_hash", std::string());
        if (found != expected) {
            throw StageError(std::string(stage), "stage '" + std::string(p) + "' output was produced with config hash " +
                                                     found + " but the current config gives " + expected +
                                                     "; rerun stage '" + std::string(p) + "' before '" +
                                                     std::string(stage) + "'");
        }
    }
}

void write_manifest(const PipelineConfig& c, std::string_view stage, const nlohmann::json& details)
{
    nlohmann::json m;
    m["stage"] = stage;
    m["master_seed"] = c.seed;
    m["config_hash"] = stage_hash(c, stage);
    nlohmann::json inputs = nlohmann::json::object();
    for (auto p : prerequisites(stage)) {
        inputs[std::string(p)] = stage_hash(c, p);
    }
    m["inputs"] = inputs;
    m["details"] = details;
    csv::write_json(manifest_path(c, stage), m);
}

std::vector<SyntheticProblemSpec> load_specs(const PipelineConfig& c)
{
    return specs_from_manifest(csv::read_json(stage_dir(c, "suite") / "manifest.json"));
}

struct WorkItem {
    std::size_t spec;
    std::size_t repetition;
};

std::vector<WorkItem> work_items(std::size_t n_specs, std::size_t repetitions)
{
    std::vector<WorkItem> items;
    for (std::size_t s = 0; s < n_specs; ++s) {
        for (std::size_t r = 0; r < repetitions; ++r) {
            items.push_back({s, r});
        }
    }
    return items;
}

std::string stem(const std::string& instance_id, std::size_t repetition)
{
    return instance_id + "_r" + std::to_string(repetition);
}

std::uint64_t item_seed(std::uint64_t master, std::uint64_t stream, const std::string& id, std::size_t rep)
{
    return derive_seed(derive_seed(master, stream, fnv1a(id)), rep);
}

inline constexpr std::array<EncodingTag, 3> kPipelineEncodings{EncodingTag::onehot, EncodingTag::target,
                                                               EncodingTag::shap};

nlohmann::json stage_suite(const PipelineConfig& c)
{
    const auto specs = plan_synthetic_suite(c.suite, derive_seed(c.seed, 1));
    csv::write_json(stage_dir(c, "suite") / "manifest.json", suite_manifest(specs));
    return {{"instances", specs.size()}};
}

nlohmann::json stage_sample(const PipelineConfig& c)
{
    const auto specs = load_specs(c);
    const auto items = work_items(specs.size(), c.repetitions);
    parallel_for(items.size(), c.jobs, [&](std::size_t i) {
        const auto& spec = specs[items[i].spec];
        const auto problem = make_synthetic_problem(spec);
        const auto design = sample_initial_design(
            problem, item_seed(c.seed, 2, spec.instance_id, items[i].repetition), c.design_multiplier);
        write_design(design, stage_dir(c, "sample") / "designs" / stem(spec.instance_id, items[i].repetition));
    });
    return {{"designs", items.size()}};
}

nlohmann::json stage_encode(const PipelineConfig& c)
{
    const auto specs = load_specs(c);
    const auto items = work_items(specs.size(), c.repetitions);
    std::vector<double> gaps(items.size(), 0.0);
    parallel_for(items.size(), c.jobs, [&](std::size_t i) {
        const auto& id = specs[items[i].spec].instance_id;
        const auto name = stem(id, items[i].repetition);
        const auto design = read_design(stage_dir(c, "sample") / "designs" / name);
        EncoderConfig enc = c.encoder;
        enc.seed = item_seed(c.seed, 3, id, items[i].repetition);
        enc.jobs = 1;
        for (auto tag : kPipelineEncodings) {
            NumericDesign encoded;
            if (tag == EncodingTag::shap) {
                auto detailed = shap_encode_detailed(design, enc);
                for (const auto& a : detailed.attributions) {
                    gaps[i] = std::max(gaps[i], std::abs(a.efficiency_gap()));
                }
                encoded = std::move(detailed.design);
            } else {
                encoded = encode(design, tag, enc);
            }
            write_numeric_design(encoded, stage_dir(c, "encode") / std::string(to_string(tag)) / name);
        }
    });
    return {{"designs", items.size()}, {"max_efficiency_gap", *std::max_element(gaps.begin(), gaps.end())}};
}

nlohmann::json stage_features(const PipelineConfig& c)
{
    const auto specs = load_specs(c);
    const auto items = work_items(specs.size(), c.repetitions);
    std::vector<FeatureVector> rows(items.size() * kPipelineEncodings.size());
    parallel_for(items.size(), c.jobs, [&](std::size_t i) {
        const auto& id = specs[items[i].spec].instance_id;
        const auto name = stem(id, items[i].repetition);
        for (std::size_t e = 0; e < kPipelineEncodings.size(); ++e) {
            const auto tag = kPipelineEncodings[e];
            const auto path = stage_dir(c, "encode") / std::string(to_string(tag)) / name;
            const auto design = normalize(read_numeric_design(path));
            rows[i * kPipelineEncodings.size() + e] =
                compute_feature_vector(design, item_seed(c.seed, 4, id, items[i].repetition), items[i].repetition);
        }
    });
    std::size_t rank_deficient = 0;
    std::size_t non_finite = 0;
    for (const auto& fv : rows) {
        rank_deficient += fv.rank_deficient ? 1 : 0;
        non_finite += fv.all_finite() ? 0 : 1;
    }
    write_feature_table(rows, stage_dir(c, "features") / "features.csv");
    return {{"rows", rows.size()}, {"rank_deficient_rows", rank_deficient}, {"non_finite_rows", non_finite}};
}

nlohmann::json stage_bench(const PipelineConfig& c)
{
    const auto specs = load_specs(c);
    const std::vector<std::string> algorithms(kPortfolio.begin(), kPortfolio.end());
    std::vector<InstanceBenchmark> results(specs.size());
    parallel_for(specs.size(), c.jobs, [&](std::size_t i) {
        const auto problem = make_synthetic_problem(specs[i]);
        auto bench = benchmark_instance(problem, algorithms, c.budget_multiplier * problem.dimension(), c.repetitions,
                                        derive_seed(c.seed, 5, fnv1a(specs[i].instance_id)));
        write_traces(bench.traces, stage_dir(c, "bench") / "traces" / (specs[i].instance_id + ".csv"));
        bench.traces.clear();
        results[i] = std::move(bench);
    });
    PerformanceTable perf(algorithms);
    std::size_t unsolved = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        perf.set_target(specs[i].instance_id, results[i].target);
        for (const auto& r : results[i].records) {
            perf.add(r);
            unsolved += r.solved() ? 0 : 1;
        }
    }
    perf.validate();
    perf.write(stage_dir(c, "bench") / "performance.csv");
    const auto labels = label_instances(perf);
    nlohmann::json wins = nlohmann::json::object();
    for (const auto& a : algorithms) {
        wins[a] = std::count_if(labels.begin(), labels.end(), [&](const auto& kv) { return kv.second == a; });
    }
    return {{"instances", specs.size()}, {"unsolved_pairs", unsolved}, {"best_algorithm_counts", wins}};
}

nlohmann::json stage_select(const PipelineConfig& c)
{
    const auto perf = PerformanceTable::read(stage_dir(c, "bench") / "performance.csv");
    const auto features = read_feature_table(stage_dir(c, "features") / "features.csv");
    std::vector<FeatureVector> te;
    std::vector<FeatureVector> sh;
    for (const auto& fv : features) {
        if (fv.encoding == EncodingTag::target) {
            te.push_back(fv);
        } else if (fv.encoding == EncodingTag::shap) {
            sh.push_back(fv);
        }
    }
    SelectorConfig sc;
    sc.folds = c.cv_folds;
    sc.inner_folds = c.meta_inner_folds;
    sc.forest = c.selector_forest;
    sc.seed = derive_seed(c.seed, 6);
    sc.jobs = c.jobs;
    FoldPlan plan;
    const auto outcome = run_cv_experiment(te, sh, perf, sc, &plan);
    outcome.write(stage_dir(c, "select") / "outcome.csv");
    csv::Table folds;
    folds.header = {"instance", "fold"};
    for (const auto& [id, f] : plan.fold_of) {
        folds.rows.push_back({id, std::to_string(f)});
    }
    csv::write(stage_dir(c, "select") / "folds.csv", folds);
    return {{"rows", outcome.rows.size()}, {"folds", plan.k}};
}

nlohmann::json stage_report(const PipelineConfig& c)
{
    const auto perf = PerformanceTable::read(stage_dir(c, "bench") / "performance.csv");
    const auto outcome = SelectionOutcome::read(stage_dir(c, "select") / "outcome.csv");
    const auto table = relert(perf, outcome);
    const nlohmann::json metadata = {{"master_seed", c.seed}, {"config_hash", stage_hash(c, "report")}};
    const auto summary = emit_report(table, stage_dir(c, "report"), metadata);
    return {{"excluded_rows", summary.at("diagnostics").at("excluded_rows")}};
}

} // namespace

std::string stage_hash(const PipelineConfig& config, std::string_view stage)
{
    nlohmann::json j;
    j["stage"] = stage;
    j["seed"] = config.seed;
    j["config"] = stage_slice(config, stage);
    nlohmann::json inputs = nlohmann::json::array();
    for (auto p : prerequisites(stage)) {
        inputs.push_back(stage_hash(config, p));
    }
    j["inputs"] = inputs;
    return hex(fnv1a(j.dump()));
}

StageResult run_stage(const PipelineConfig& config, std::string_view stage)
{
    config.validate();
    StageResult result{std::string(stage), false};
    check_prerequisites(config, stage);
    if (const auto manifest = read_manifest(config, stage);
        manifest && manifest->value("config_hash", std::string()) == stage_hash(config, stage)) {
        result.skipped = true;
        return result;
    }
    // A stale or partial manifest must not survive a failed rerun.
    fs::remove(manifest_path(config, stage));
    fs::create_directories(stage_dir(config, stage));

    nlohmann::json details;
    if (stage == "suite") {
        details = stage_suite(config);
    } else if (stage == "sample") {
        details = stage_sample(config);
    } else if (stage == "encode") {
        details = stage_encode(config);
    } else if (stage == "features") {
        details = stage_features(config);
    } else if (stage == "bench") {
        details = stage_bench(config);
    } else if (stage == "select") {
        details = stage_select(config);
    } else {
        details = stage_report(config);
    }
    write_manifest(config, stage, details);
    return result;
}

std::vector<StageResult> run_pipeline(const PipelineConfig& config)
{
    std::vector<StageResult> out;
    for (auto stage : kStages) {
        out.push_back(run_stage(config, stage));
    }
    return out;
}

} // namespace mvela
