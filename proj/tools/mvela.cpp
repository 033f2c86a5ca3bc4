#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mvela/csv.hpp"
#include "mvela/pipeline.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Landscape-feature based algorithm selection for mixed-variable problems"};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
    std::string stage = "all";
    app.add_option("--config", config_path, "Pipeline configuration (JSON)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Master seed (overrides the config)");
    app.add_option("--out", out, "Output directory (overrides the config)");
    app.add_option("--stage", stage, "Stage to run: suite, sample, encode, features, bench, select, report or all");
    app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        nlohmann::json j = nlohmann::json::object();
        if (!config_path.empty()) {
            j = mvela::csv::read_json(config_path);
        }
        if (seed) {
            j["seed"] = *seed;
        }
        if (out) {
            j["out"] = *out;
        }
        if (jobs) {
            j["jobs"] = *jobs;
        }
        const auto config = mvela::PipelineConfig::from_json(j);

        std::vector<mvela::StageResult> results;
        if (stage == "all") {
            results = mvela::run_pipeline(config);
        } else {
            results.push_back(mvela::run_stage(config, stage));
        }
        for (const auto& r : results) {
            std::cout << r.stage << ": " << (r.skipped ? "up to date" : "done") << "\n";
        }
    } catch (const mvela::StageError& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
        return 3;
    } catch (const mvela::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
