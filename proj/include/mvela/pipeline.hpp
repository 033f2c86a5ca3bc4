#ifndef MVELA_PIPELINE_HPP
#define MVELA_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "mvela/core.hpp"
#include "mvela/encoding.hpp"
#include "mvela/forest.hpp"
#include "mvela/problem.hpp"

namespace mvela {

// A stage could not run: a prerequisite is missing or was produced under a
// different configuration.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(what)
        , stage_(std::move(stage))
    {
    }
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

inline constexpr std::array<std::string_view, 7> kStages{"suite", "sample", "encode", "features",
                                                         "bench", "select", "report"};

struct PipelineConfig {
    SuiteConfig suite = default_suite();
    std::size_t design_multiplier = 50;
    // Initial designs per instance and runs per (instance, algorithm).
    std::size_t repetitions = 20;
    EncoderConfig encoder;
    ForestParams selector_forest = ForestParams::classification_defaults();
    std::size_t budget_multiplier = 100;
    std::size_t cv_folds = 10;
    std::size_t meta_inner_folds = 5;
    std::uint64_t seed = 0;
    std::filesystem::path out = "mvela-out";
    std::size_t jobs = 1;

    static SuiteConfig default_suite();

    void validate() const;
    // Everything except `out` and `jobs`, which do not affect results.
    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
};

// Hex digest of the configuration slice a stage depends on, chained with the
// digests of its prerequisites.
std::string stage_hash(const PipelineConfig& config, std::string_view stage);

struct StageResult {
    std::string stage;
    bool skipped = false;
};

// Runs one stage. A stage whose manifest already records the current hash is
// left untouched (skipped = true). Throws StageError for missing or stale
// prerequisites.
StageResult run_stage(const PipelineConfig& config, std::string_view stage);

// Runs every stage in order.
std::vector<StageResult> run_pipeline(const PipelineConfig& config);

} // namespace mvela

#endif
