#ifndef MVELA_METRICS_HPP
#define MVELA_METRICS_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mvela/portfolio.hpp"
#include "mvela/selector.hpp"

namespace mvela {

inline constexpr std::array<std::string_view, 6> kReportColumns{"SBS", "TE", "SH", "Hybrid", "Meta", "Confidence"};
inline constexpr std::size_t kHybridColumn = 3;

// ert(algorithm) / ert(virtual best solver) of the instance.
double relative_ert(const PerformanceTable& perf, std::string_view instance_id, std::string_view algorithm_id);

// Algorithm with the lowest mean relERT over all instances; ties go to
// declaration order. Algorithms that leave instances unsolved (infinite
// relERT) rank behind those that solve more, then by mean over the solved ones.
std::string single_best_solver(const PerformanceTable& perf);

// Report group of an instance: its id up to the last '_'.
std::string group_of(std::string_view instance_id);

struct RelErtRow {
    std::string instance_id;
    std::string group;
    std::size_t repetition = 0;
    // In kReportColumns order.
    std::array<double, 6> values{};

    bool finite() const;
};

struct RelErtTable {
    std::string sbs;
    std::vector<RelErtRow> rows;

    void write(const std::filesystem::path& path) const;
    static RelErtTable read(const std::filesystem::path& path);
};

RelErtTable relert(const PerformanceTable& perf, const SelectionOutcome& outcome);

// Every value of a row divided by the row's Hybrid value.
RelErtTable vbe_normalize(const RelErtTable& table);

struct ReportRow {
    std::string group;
    std::size_t instances = 0;
    std::size_t rows = 0;
    // Rows left out because some column is not finite.
    std::size_t excluded = 0;
    std::array<double, 6> means{};
};

// One row per group (sorted) followed by "All".
std::vector<ReportRow> aggregate(const RelErtTable& table);

// 100 (sbe - method) / (sbe - vbe); nullopt when sbe == vbe.
std::optional<double> gap_closure(double sbe_mean, double method_mean, double vbe_mean);

// Writes relert.csv, table1.csv, table2.csv, scatter.csv and summary.json into
// `dir`. `metadata` is embedded in the summary as-is. Returns the summary.
nlohmann::json emit_report(const RelErtTable& table, const std::filesystem::path& dir,
                           const nlohmann::json& metadata = nlohmann::json::object());

} // namespace mvela

#endif
