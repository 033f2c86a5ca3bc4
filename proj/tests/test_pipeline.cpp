#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvela/csv.hpp"
#include "mvela/pipeline.hpp"

using namespace mvela;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    const char* env = std::getenv("MVELA_TEST_TMP");
    const std::filesystem::path root =
        env != nullptr ? std::filesystem::path(env) : std::filesystem::temp_directory_path() / "mvela_pipeline";
    auto dir = root / (name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    return dir;
}

PipelineConfig tiny(const std::filesystem::path& out)
{
    const auto j = nlohmann::json::parse(R"({
        "suite": {"templates": [
            {"continuous": 1, "integer": 1, "categorical": 1, "levels": 3, "count": 4},
            {"continuous": 2, "categorical": 1, "hierarchical": true, "count": 4}
        ]},
        "design_multiplier": 30,
        "repetitions": 3,
        "encoder": {"shap_n_permutations": 2, "shap_background_cap": 16, "shap_forest": {"n_trees": 8}},
        "selector_forest": {"n_trees": 15},
        "cv_folds": 4,
        "meta_inner_folds": 3,
        "seed": 5
    })");
    auto c = PipelineConfig::from_json(j);
    c.out = out;
    return c;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("config json")
{
    const auto c = tiny("x");
    const auto back = PipelineConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(c.selector_forest.n_trees == 15);
    CHECK(c.selector_forest.subsample == FeatureSubsample::sqrt);
    CHECK_FALSE(c.to_json().contains("out"));
    CHECK_FALSE(c.to_json().contains("jobs"));
    CHECK_THROWS_AS(PipelineConfig::from_json({{"seed", 1}, {"budget", 3}}), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"repetitions", "many"}}), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json({{"repetitions", 0}}), ConfigError);
    CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::array()), ConfigError);
}

TEST_CASE("stage hashes")
{
    auto a = tiny("x");
    auto b = a;
    b.out = "elsewhere";
    b.jobs = 4;
    for (auto s : kStages) {
        CHECK(stage_hash(a, s) == stage_hash(b, s));
    }
    b.cv_folds = 5;
    CHECK(stage_hash(a, "bench") == stage_hash(b, "bench"));
    CHECK(stage_hash(a, "select") != stage_hash(b, "select"));
    CHECK(stage_hash(a, "report") != stage_hash(b, "report"));
    b = a;
    b.repetitions = 4;
    CHECK(stage_hash(a, "suite") == stage_hash(b, "suite"));
    CHECK(stage_hash(a, "sample") != stage_hash(b, "sample"));
    CHECK(stage_hash(a, "features") != stage_hash(b, "features"));
    b = a;
    b.seed = 6;
    CHECK(stage_hash(a, "suite") != stage_hash(b, "suite"));
    CHECK_THROWS_AS(stage_hash(a, "deploy"), ConfigError);
}

TEST_CASE("missing prerequisite")
{
    const auto c = tiny(scratch("missing"));
    try {
        run_stage(c, "features");
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "features");
        CHECK(std::string(e.what()).find("encode") != std::string::npos);
    }
    CHECK_THROWS_AS(run_stage(c, "report"), StageError);
}

TEST_CASE("full run, skip and determinism")
{
    const auto c = tiny(scratch("run_a"));
    const auto results = run_pipeline(c);
    REQUIRE(results.size() == kStages.size());
    for (const auto& r : results) {
        CHECK_FALSE(r.skipped);
        const auto manifest = csv::read_json(c.out / r.stage / "stage.json");
        CHECK(manifest["stage"] == r.stage);
        CHECK(manifest["master_seed"] == 5);
        CHECK(manifest["config_hash"] == stage_hash(c, r.stage));
    }
    for (const char* f : {"suite/manifest.json", "features/features.csv", "bench/performance.csv",
                          "select/outcome.csv", "select/folds.csv", "report/summary.json", "report/table1.csv",
                          "report/table2.csv", "report/scatter.csv", "report/relert.csv"}) {
        CHECK(std::filesystem::exists(c.out / f));
    }
    const auto encode = csv::read_json(c.out / "encode" / "stage.json");
    CHECK(encode["details"]["max_efficiency_gap"].get<double>() < 1e-9);
    const auto features = csv::read(c.out / "features" / "features.csv");
    // 8 instances x 3 designs x 3 encodings (one-hot, target, SHAP).
    CHECK(features.rows.size() == 72);
    const auto summary = csv::read_json(c.out / "report" / "summary.json");
    CHECK(summary["table1"].back()["group"] == "All");
    CHECK(summary["table1"].back()["instances"] == 8);

    const auto again = run_pipeline(c);
    for (const auto& r : again) {
        CHECK(r.skipped);
    }

    auto threaded = tiny(scratch("run_b"));
    threaded.jobs = 3;
    run_pipeline(threaded);
    for (const char* f : {"report/summary.json", "report/relert.csv", "select/outcome.csv", "bench/performance.csv",
                          "features/features.csv"}) {
        CHECK(slurp(c.out / f) == slurp(threaded.out / f));
    }
    std::filesystem::remove_all(threaded.out);

    // A changed selector setting invalidates select, so report refuses to run.
    auto changed = c;
    changed.cv_folds = 3;
    CHECK_THROWS_AS(run_stage(changed, "report"), StageError);
    CHECK_FALSE(run_stage(changed, "select").skipped);
    CHECK_FALSE(run_stage(changed, "report").skipped);
    CHECK(run_stage(changed, "bench").skipped);
    std::filesystem::remove_all(c.out);
}
