#include "mvela/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "mvela/core.hpp"
#include "mvela/csv.hpp"

namespace mvela {

double relative_ert(const PerformanceTable& perf, std::string_view instance_id, std::string_view algorithm_id)
{
    const double vbs = perf.vbs_ert(instance_id);
    if (!std::isfinite(vbs) || vbs <= 0.0) {
        throw DataError("instance '" + std::string(instance_id) + "' has no finite virtual best ert");
    }
    return perf.ert(instance_id, algorithm_id) / vbs;
}

std::string single_best_solver(const PerformanceTable& perf)
{
    if (perf.instances().empty()) {
        throw DataError("single best solver of an empty performance table");
    }
    // Fewest unsolved instances first, then the lowest mean relERT over the
    // solved ones; with every instance solved this is the plain mean.
    const std::string* best = nullptr;
    std::size_t best_unsolved = 0;
    double best_mean = 0.0;
    for (const auto& a : perf.algorithms()) {
        double sum = 0.0;
        std::size_t unsolved = 0;
        for (const auto& inst : perf.instances()) {
            const double r = relative_ert(perf, inst, a);
            if (std::isfinite(r)) {
                sum += r;
            } else {
                ++unsolved;
            }
        }
        const std::size_t solved = perf.instances().size() - unsolved;
        const double mean = solved > 0 ? sum / static_cast<double>(solved) : std::numeric_limits<double>::infinity();
        if (best == nullptr || unsolved < best_unsolved || (unsolved == best_unsolved && mean < best_mean)) {
            best = &a;
            best_unsolved = unsolved;
            best_mean = mean;
        }
    }
    return *best;
}

std::string group_of(std::string_view instance_id)
{
    const auto pos = instance_id.rfind('_');
    return std::string(pos == std::string_view::npos ? instance_id : instance_id.substr(0, pos));
}

bool RelErtRow::finite() const
{
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void RelErtTable::write(const std::filesystem::path& path) const
{
    csv::Table table;
    table.header = {"instance", "group", "repetition"};
    for (auto c : kReportColumns) {
        table.header.emplace_back(c);
    }
    table.header.emplace_back("sbs_algorithm");
    for (const auto& r : rows) {
        csv::Row row{r.instance_id, r.group, std::to_string(r.repetition)};
        for (double v : r.values) {
            row.push_back(csv::format_double(v));
        }
        row.push_back(sbs);
        table.rows.push_back(std::move(row));
    }
    csv::write(path, table);
}

RelErtTable RelErtTable::read(const std::filesystem::path& path)
{
    const auto table = csv::read(path);
    const auto c_inst = table.column("instance");
    const auto c_group = table.column("group");
    const auto c_rep = table.column("repetition");
    const auto c_sbs = table.column("sbs_algorithm");
    std::array<std::size_t, 6> cols{};
    for (std::size_t c = 0; c < kReportColumns.size(); ++c) {
        cols[c] = table.column(kReportColumns[c]);
    }
    RelErtTable out;
    for (const auto& row : table.rows) {
        RelErtRow r;
        r.instance_id = row[c_inst];
        r.group = row[c_group];
        r.repetition = static_cast<std::size_t>(std::stoull(row[c_rep]));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            r.values[c] = csv::parse_double(row[cols[c]]);
        }
        out.sbs = row[c_sbs];
        out.rows.push_back(std::move(r));
    }
    return out;
}

RelErtTable relert(const PerformanceTable& perf, const SelectionOutcome& outcome)
{
    RelErtTable out;
    out.sbs = single_best_solver(perf);
    for (const auto& s : outcome.rows) {
        RelErtRow r;
        r.instance_id = s.instance_id;
        r.group = group_of(s.instance_id);
        r.repetition = s.repetition;
        r.values[0] = relative_ert(perf, s.instance_id, out.sbs);
        for (std::size_t k = 0; k < s.chosen.size(); ++k) {
            r.values[k + 1] = relative_ert(perf, s.instance_id, s.chosen[k]);
        }
        out.rows.push_back(std::move(r));
    }
    return out;
}

RelErtTable vbe_normalize(const RelErtTable& table)
{
    RelErtTable out = table;
    for (auto& r : out.rows) {
        const double hybrid = r.values[kHybridColumn];
        for (auto& v : r.values) {
            v /= hybrid;
        }
    }
    return out;
}

std::vector<ReportRow> aggregate(const RelErtTable& table)
{
    struct Accumulator {
        std::set<std::string> instances;
        std::size_t rows = 0;
        std::size_t excluded = 0;
        std::array<double, 6> sums{};
    };
    std::map<std::string, Accumulator> groups;
    Accumulator all;
    for (const auto& r : table.rows) {
        for (Accumulator* acc : {&groups[r.group], &all}) {
            acc->instances.insert(r.instance_id);
            if (!r.finite()) {
                ++acc->excluded;
                continue;
            }
            ++acc->rows;
            for (std::size_t c = 0; c < r.values.size(); ++c) {
                acc->sums[c] += r.values[c];
            }
        }
    }
    auto finish = [](const std::string& name, const Accumulator& acc) {
        ReportRow row;
        row.group = name;
        row.instances = acc.instances.size();
        row.rows = acc.rows;
        row.excluded = acc.excluded;
        for (std::size_t c = 0; c < row.means.size(); ++c) {
            row.means[c] = acc.rows > 0 ? acc.sums[c] / static_cast<double>(acc.rows)
                                        : std::numeric_limits<double>::quiet_NaN();
        }
        return row;
    };
    std::vector<ReportRow> out;
    for (const auto& [name, acc] : groups) {
        out.push_back(finish(name, acc));
    }
    out.push_back(finish("All", all));
    return out;
}

std::optional<double> gap_closure(double sbe_mean, double method_mean, double vbe_mean)
{
    if (sbe_mean == vbe_mean) {
        return std::nullopt;
    }
    return 100.0 * (sbe_mean - method_mean) / (sbe_mean - vbe_mean);
}

namespace {

void write_report_table(const std::vector<ReportRow>& rows, const std::filesystem::path& path)
{
    csv::Table table;
    table.header = {"group", "instances", "rows", "excluded"};
    for (auto c : kReportColumns) {
        table.header.emplace_back(c);
    }
    for (const auto& r : rows) {
        csv::Row row{r.group, std::to_string(r.instances), std::to_string(r.rows), std::to_string(r.excluded)};
        for (double m : r.means) {
            row.push_back(csv::format_double(m));
        }
        table.rows.push_back(std::move(row));
    }
    csv::write(path, table);
}

nlohmann::json rows_json(const std::vector<ReportRow>& rows)
{
    auto out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json means = nlohmann::json::object();
        for (std::size_t c = 0; c < kReportColumns.size(); ++c) {
            means[std::string(kReportColumns[c])] = r.means[c];
        }
        out.push_back({{"group", r.group},
                       {"instances", r.instances},
                       {"rows", r.rows},
                       {"excluded", r.excluded},
                       {"means", means}});
    }
    return out;
}

nlohmann::json optional_json(const std::optional<double>& v)
{
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

} // namespace

nlohmann::json emit_report(const RelErtTable& table, const std::filesystem::path& dir, const nlohmann::json& metadata)
{
    std::filesystem::create_directories(dir);
    table.write(dir / "relert.csv");
    const auto table1 = aggregate(table);
    const auto table2 = aggregate(vbe_normalize(table));
    write_report_table(table1, dir / "table1.csv");
    write_report_table(table2, dir / "table2.csv");

    // Per-instance means of the SH and TE columns.
    std::map<std::string, std::array<double, 3>> per_instance;
    for (const auto& r : table.rows) {
        auto& acc = per_instance[r.instance_id];
        acc[0] += r.values[2];
        acc[1] += r.values[1];
        acc[2] += 1.0;
    }
    csv::Table scatter;
    scatter.header = {"instance", "group", "relert_sh", "relert_te"};
    for (const auto& [id, acc] : per_instance) {
        scatter.rows.push_back(
            {id, group_of(id), csv::format_double(acc[0] / acc[2]), csv::format_double(acc[1] / acc[2])});
    }
    csv::write(dir / "scatter.csv", scatter);

    const auto& all = table2.back();
    const bool te_is_sbe = all.means[1] <= all.means[2];
    const double sbe = te_is_sbe ? all.means[1] : all.means[2];
    const double vbe = all.means[kHybridColumn];

    nlohmann::json summary;
    summary["format"] = "mvela-report";
    summary["version"] = 1;
    summary["metadata"] = metadata;
    summary["sbs_algorithm"] = table.sbs;
    summary["columns"] = kReportColumns;
    summary["table1"] = rows_json(table1);
    summary["table2"] = rows_json(table2);
    summary["sbe_encoding"] = te_is_sbe ? "TE" : "SH";
    summary["gap_closure"] = {{"Meta", optional_json(gap_closure(sbe, all.means[4], vbe))},
                              {"Confidence", optional_json(gap_closure(sbe, all.means[5], vbe))}};
    summary["diagnostics"] = {{"excluded_rows", table1.back().excluded}};
    csv::write_json(dir / "summary.json", summary);
    return summary;
}

} // namespace mvela
