#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "mvela/csv.hpp"
#include "mvela/metrics.hpp"

using namespace mvela;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PerformanceTable perf_table()
{
    PerformanceTable perf({"a", "b", "c"});
    // relERT  a: 2, 1, inf  b: 4, 2, 2  c: 1, 2, 1
    const double erts[3][3] = {{10, 20, 5}, {10, 20, 20}, {kInf, 10, 5}};
    const char* ids[3] = {"g1_0", "g1_1", "g2_0"};
    for (std::size_t i = 0; i < 3; ++i) {
        const char* algs[3] = {"a", "b", "c"};
        for (std::size_t a = 0; a < 3; ++a) {
            const double e = erts[i][a];
            perf.add({ids[i], algs[a], e, std::isinf(e) ? 0u : 1u, 100});
        }
        perf.set_target(ids[i], 0.0);
    }
    return perf;
}

SelectionRow row(std::string id, std::size_t rep, std::array<std::string, 5> chosen)
{
    SelectionRow r;
    r.instance_id = std::move(id);
    r.repetition = rep;
    r.chosen = std::move(chosen);
    return r;
}

} // namespace

TEST_CASE("gap closure reproduces the published table arithmetic")
{
    const auto confidence = gap_closure(8.01, 4.99, 1.00);
    const auto meta = gap_closure(8.01, 6.20, 1.00);
    REQUIRE(confidence.has_value());
    REQUIRE(meta.has_value());
    CHECK(std::abs(*confidence - 43.08) < 0.005);
    CHECK(std::abs(*meta - 25.82) < 0.005);
    CHECK(std::abs(*confidence - 43.10) < 0.1);
    CHECK(std::abs(*meta - 25.84) < 0.1);
    CHECK_FALSE(gap_closure(1.0, 1.0, 1.0).has_value());
    CHECK(*gap_closure(3.0, 1.0, 1.0) == 100.0);
    CHECK(*gap_closure(3.0, 3.0, 1.0) == 0.0);
}

TEST_CASE("relative ert and the single best solver")
{
    const auto perf = perf_table();
    CHECK(relative_ert(perf, "g1_0", "b") == 4.0);
    CHECK(relative_ert(perf, "g1_1", "c") == 2.0);
    CHECK(std::isinf(relative_ert(perf, "g2_0", "a")));
    CHECK(single_best_solver(perf) == "c");

    PerformanceTable partial({"a", "b"});
    partial.add({"x_0", "a", 10, 1, 10});
    partial.add({"x_0", "b", kInf, 0, 10});
    partial.add({"x_1", "a", kInf, 0, 10});
    partial.add({"x_1", "b", 10, 1, 10});
    partial.add({"x_2", "a", 30, 1, 30});
    partial.add({"x_2", "b", 10, 1, 10});
    // Both leave one instance unsolved; b has the lower mean over solved ones.
    CHECK(single_best_solver(partial) == "b");
    partial.add({"x_2", "a", 10, 1, 10});
    // Tie: declaration order.
    CHECK(single_best_solver(partial) == "a");
    partial.add({"x_0", "b", 1000, 1, 1000});
    // b now solves everything, however slowly.
    CHECK(single_best_solver(partial) == "b");
}

TEST_CASE("report groups")
{
    CHECK(group_of("c2i1k1_3") == "c2i1k1");
    CHECK(group_of("a_b_12") == "a_b");
    CHECK(group_of("plain") == "plain");
}

TEST_CASE("relert table, normalization and aggregation")
{
    const auto perf = perf_table();
    SelectionOutcome outcome;
    outcome.rows = {row("g1_0", 0, {"a", "b", "a", "a", "b"}), row("g1_0", 1, {"b", "b", "b", "b", "b"}),
                    row("g1_1", 0, {"a", "c", "a", "a", "a"}), row("g2_0", 0, {"c", "a", "c", "a", "c"})};
    const auto table = relert(perf, outcome);
    CHECK(table.sbs == "c");
    REQUIRE(table.rows.size() == 4);
    CHECK(table.rows[0].values == std::array<double, 6>{1.0, 2.0, 4.0, 2.0, 2.0, 4.0});
    CHECK(table.rows[2].values == std::array<double, 6>{2.0, 1.0, 2.0, 1.0, 1.0, 1.0});
    CHECK(table.rows[0].group == "g1");
    CHECK_FALSE(table.rows[3].finite());

    const auto agg = aggregate(table);
    REQUIRE(agg.size() == 3);
    CHECK(agg[0].group == "g1");
    CHECK(agg[0].instances == 2);
    CHECK(agg[0].rows == 3);
    CHECK(agg[0].excluded == 0);
    CHECK(std::abs(agg[0].means[0] - 4.0 / 3.0) < 1e-12);
    CHECK(std::abs(agg[0].means[1] - 7.0 / 3.0) < 1e-12);
    CHECK(std::abs(agg[0].means[2] - 10.0 / 3.0) < 1e-12);
    CHECK(agg[1].group == "g2");
    CHECK(agg[1].rows == 0);
    CHECK(agg[1].excluded == 1);
    CHECK(std::isnan(agg[1].means[0]));
    CHECK(agg[2].group == "All");
    CHECK(agg[2].instances == 3);
    CHECK(agg[2].excluded == 1);
    CHECK(agg[2].means == agg[0].means);

    const auto norm = vbe_normalize(table);
    for (const auto& r : norm.rows) {
        if (r.finite()) {
            CHECK(r.values[kHybridColumn] == 1.0);
        }
    }
    CHECK(norm.rows[0].values[0] == 0.5);
    CHECK(norm.rows[1].values[1] == 1.0);
}

TEST_CASE("report files")
{
    const auto perf = perf_table();
    SelectionOutcome outcome;
    outcome.rows = {row("g1_0", 0, {"a", "b", "a", "b", "a"}), row("g1_1", 0, {"c", "a", "a", "a", "a"}),
                    row("g2_0", 0, {"c", "c", "c", "c", "c"})};
    const auto dir = std::filesystem::temp_directory_path() / ("mvela_report_" + std::to_string(::getpid()));
    const auto summary = emit_report(relert(perf, outcome), dir, {{"master_seed", 3}});
    for (const char* f : {"relert.csv", "table1.csv", "table2.csv", "scatter.csv", "summary.json"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    CHECK(summary["format"] == "mvela-report");
    CHECK(summary["metadata"]["master_seed"] == 3);
    CHECK(summary["sbs_algorithm"] == "c");
    CHECK(summary["diagnostics"]["excluded_rows"] == 0);
    // Normalized means: TE (1 + 2 + 1) / 3 and SH (2 + 1 + 1) / 3 tie, Meta as
    // well; Confidence reaches the Hybrid value 1.
    CHECK(summary["sbe_encoding"] == "TE");
    CHECK(std::abs(summary["gap_closure"]["Meta"].get<double>()) < 1e-12);
    CHECK(std::abs(summary["gap_closure"]["Confidence"].get<double>() - 100.0) < 1e-12);
    CHECK(csv::read_json(dir / "summary.json") == summary);

    const auto back = RelErtTable::read(dir / "relert.csv");
    CHECK(back.sbs == "c");
    REQUIRE(back.rows.size() == 3);
    CHECK(back.rows[1].values[2] == 1.0);
    const auto scatter = csv::read(dir / "scatter.csv");
    CHECK(scatter.rows.size() == 3);
    std::filesystem::remove_all(dir);
}
