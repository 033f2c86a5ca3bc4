#ifndef MVELA_PORTFOLIO_HPP
#define MVELA_PORTFOLIO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvela/problem.hpp"

namespace mvela {

// Declaration order doubles as the tie-break order everywhere.
inline constexpr std::array<std::string_view, 3> kPortfolio{"random_search", "mixed_evolutionary", "mixed_annealing"};

inline constexpr std::size_t kDefaultBudgetMultiplier = 100;
inline constexpr std::size_t kDefaultRepetitions = 20;

struct RunTrace {
    std::string instance_id;
    std::string algorithm_id;
    std::size_t repetition = 0;
    std::uint64_t seed = 0;
    // Raw objective value of every evaluation, in order.
    std::vector<double> values;
    std::vector<double> best_so_far;
};

// Runs `repetitions` independent runs of a built-in algorithm; repetition r
// uses derive_seed(seed, r). Candidates are canonicalized before evaluation so
// inactive variables never vary.
std::vector<RunTrace> run_algorithm(const MixedVariableProblem& problem, std::string_view algorithm_id,
                                    std::size_t budget, std::size_t repetitions, std::uint64_t seed,
                                    std::size_t jobs = 1);

// 0.01-quantile of every value recorded in `traces`.
double compute_target(std::span<const RunTrace> traces);

struct PerformanceRecord {
    std::string instance_id;
    std::string algorithm_id;
    double ert = 0.0;
    std::size_t successes = 0;
    std::size_t total_evals = 0;

    bool solved() const noexcept { return successes > 0; }
};

// 1-based hitting time of `target` in a trace, or 0 when it is never reached.
std::size_t hitting_time(const RunTrace& trace, double target);

PerformanceRecord compute_ert(std::span<const RunTrace> traces, double target, std::size_t budget);

class PerformanceTable {
public:
    PerformanceTable() = default;
    explicit PerformanceTable(std::vector<std::string> algorithms);

    void add(const PerformanceRecord& record);
    void set_target(const std::string& instance_id, double target);

    const std::vector<std::string>& algorithms() const noexcept { return algorithms_; }
    // Instances in insertion order.
    const std::vector<std::string>& instances() const noexcept { return instances_; }
    bool contains(std::string_view instance_id, std::string_view algorithm_id) const;
    const PerformanceRecord& at(std::string_view instance_id, std::string_view algorithm_id) const;
    double ert(std::string_view instance_id, std::string_view algorithm_id) const;
    double target(std::string_view instance_id) const;
    // Lowest ert of the instance (virtual best solver).
    double vbs_ert(std::string_view instance_id) const;

    // Every instance has a record for every algorithm and at least one finite
    // ert; throws DataError otherwise.
    void validate() const;

    void write(const std::filesystem::path& path) const;
    static PerformanceTable read(const std::filesystem::path& path);

private:
    std::vector<std::string> algorithms_;
    std::vector<std::string> instances_;
    std::map<std::pair<std::string, std::string>, PerformanceRecord, std::less<>> records_;
    std::map<std::string, double, std::less<>> targets_;
};

struct InstanceBenchmark {
    std::vector<RunTrace> traces;
    std::vector<PerformanceRecord> records;
    double target = 0.0;
};

// Runs every algorithm of the portfolio, then derives the target and the ert
// of each algorithm. Per-algorithm seeds are derived from (seed, algorithm id).
InstanceBenchmark benchmark_instance(const MixedVariableProblem& problem, std::span<const std::string> algorithms,
                                     std::size_t budget, std::size_t repetitions, std::uint64_t seed,
                                     std::size_t jobs = 1);

// Columns: algorithm, repetition, eval, value, best_so_far.
void write_traces(const std::vector<RunTrace>& traces, const std::filesystem::path& path);
std::vector<RunTrace> read_traces(const std::filesystem::path& path, const std::string& instance_id);

} // namespace mvela

#endif
