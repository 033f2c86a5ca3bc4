#include "mvela/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvela/core.hpp"
#include "mvela/csv.hpp"
#include "mvela/parallel.hpp"
#include "mvela/random.hpp"
#include "mvela/stats.hpp"

namespace mvela {

namespace {

// Budget-limited evaluation with trace recording.
class Run {
public:
    Run(const MixedVariableProblem& problem, std::size_t budget, RunTrace& trace)
        : problem_(problem)
        , budget_(budget)
        , trace_(trace)
    {
        trace_.values.reserve(budget);
        trace_.best_so_far.reserve(budget);
    }

    bool exhausted() const noexcept { return trace_.values.size() >= budget_; }
    std::size_t used() const noexcept { return trace_.values.size(); }
    std::size_t budget() const noexcept { return budget_; }

    double evaluate(std::vector<double>& x)
    {
        x = problem_.canonicalize(x);
        const double f = problem_.evaluate_relaxed(x);
        const double best = trace_.best_so_far.empty() ? f : std::min(f, trace_.best_so_far.back());
        trace_.values.push_back(f);
        trace_.best_so_far.push_back(best);
        return f;
    }

private:
    const MixedVariableProblem& problem_;
    std::size_t budget_;
    RunTrace& trace_;
};

std::vector<double> random_point(const MixedVariableProblem& problem, Rng& rng)
{
    std::vector<double> x(problem.dimension());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& v = problem.variables()[i];
        switch (v.kind) {
        case VariableKind::continuous:
            x[i] = std::uniform_real_distribution<double>(v.lower, v.upper)(rng);
            break;
        case VariableKind::integer:
            x[i] = static_cast<double>(std::uniform_int_distribution<std::int64_t>(
                static_cast<std::int64_t>(v.lower), static_cast<std::int64_t>(v.upper))(rng));
            break;
        case VariableKind::categorical:
            x[i] = static_cast<double>(std::uniform_int_distribution<std::size_t>(0, v.categories.size() - 1)(rng));
            break;
        }
    }
    return x;
}

double reflect(double x, double lo, double hi)
{
    const double span = hi - lo;
    if (span <= 0.0) {
        return lo;
    }
    double t = std::fmod(x - lo, 2.0 * span);
    if (t < 0.0) {
        t += 2.0 * span;
    }
    return lo + (t <= span ? t : 2.0 * span - t);
}

std::vector<std::size_t> active_indices(const MixedVariableProblem& problem, const std::vector<double>& x)
{
    const auto active = problem.active_mask(x);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < active.size(); ++i) {
        if (active[i]) {
            idx.push_back(i);
        }
    }
    return idx;
}

// New code for one variable. `step` is relative to the variable range;
// categoricals move to a different level uniformly.
double mutate_variable(const VariableSpec& v, double x, double step, Rng& rng)
{
    switch (v.kind) {
    case VariableKind::continuous: {
        std::normal_distribution<double> gauss(0.0, step * (v.upper - v.lower));
        return reflect(x + gauss(rng), v.lower, v.upper);
    }
    case VariableKind::integer: {
        // Symmetric geometric step with mean magnitude about step * range.
        const double mean = std::max(1.0, step * (v.upper - v.lower));
        std::geometric_distribution<std::int64_t> geo(1.0 / mean);
        const auto magnitude = 1 + geo(rng);
        const double sign = std::bernoulli_distribution(0.5)(rng) ? -1.0 : 1.0;
        return std::round(reflect(x + sign * static_cast<double>(magnitude), v.lower, v.upper));
    }
    case VariableKind::categorical: {
        const std::size_t n = v.categories.size();
        auto level = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
        if (level >= static_cast<std::size_t>(x)) {
            ++level;
        }
        return static_cast<double>(level);
    }
    }
    return x;
}

void random_search(const MixedVariableProblem& problem, Run& run, Rng& rng)
{
    while (!run.exhausted()) {
        auto x = random_point(problem, rng);
        run.evaluate(x);
    }
}

// (1 + lambda) with one shared step size: every active continuous variable
// moves at once, integers with probability 1/2, categoricals with probability
// 1/#active.
void mixed_evolutionary(const MixedVariableProblem& problem, Run& run, Rng& rng)
{
    constexpr std::size_t mu = 1;
    constexpr std::size_t lambda = 4;
    struct Individual {
        std::vector<double> x;
        double f;
    };
    std::vector<Individual> population;
    while (population.size() < mu && !run.exhausted()) {
        auto x = random_point(problem, rng);
        const double f = run.evaluate(x);
        population.push_back({std::move(x), f});
    }
    double step = 0.2;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (!run.exhausted()) {
        std::vector<Individual> offspring;
        std::size_t improved = 0;
        for (std::size_t k = 0; k < lambda && !run.exhausted(); ++k) {
            const auto& parent = population[std::uniform_int_distribution<std::size_t>(0, population.size() - 1)(rng)];
            auto y = parent.x;
            const auto idx = active_indices(problem, y);
            const double p_cat = 1.0 / static_cast<double>(std::max<std::size_t>(1, idx.size()));
            for (auto i : idx) {
                const auto& v = problem.variables()[i];
                const bool move = v.kind == VariableKind::continuous || (v.kind == VariableKind::integer && unit(rng) < 0.5) ||
                                  (v.kind == VariableKind::categorical && unit(rng) < p_cat);
                if (move) {
                    y[i] = mutate_variable(v, y[i], step, rng);
                }
            }
            const double f = run.evaluate(y);
            improved += f < parent.f ? 1 : 0;
            offspring.push_back({std::move(y), f});
        }
        // One-fifth success rule on the shared step size.
        const double rate = static_cast<double>(improved) / static_cast<double>(offspring.size());
        step = std::clamp(rate > 0.2 ? step * 1.5 : step / 1.2, 1e-4, 0.5);
        population.insert(population.end(), offspring.begin(), offspring.end());
        std::stable_sort(population.begin(), population.end(),
                         [](const Individual& a, const Individual& b) { return a.f < b.f; });
        population.resize(std::min(mu, population.size()));
    }
}

// Single-variable moves with a step size per variable, adapted on success,
// under a geometric cooling schedule.
void mixed_annealing(const MixedVariableProblem& problem, Run& run, Rng& rng)
{
    // The first evaluations calibrate the initial temperature.
    constexpr std::size_t warmup = 10;
    std::vector<double> current;
    double f_current = std::numeric_limits<double>::infinity();
    std::vector<double> warm_values;
    while (warm_values.size() < warmup && !run.exhausted()) {
        auto x = random_point(problem, rng);
        const double f = run.evaluate(x);
        warm_values.push_back(f);
        if (f < f_current) {
            f_current = f;
            current = std::move(x);
        }
    }
    double t0 = stats::sd(warm_values);
    if (!(t0 > 0.0)) {
        t0 = 1.0;
    }
    std::vector<double> steps(problem.dimension(), 0.25);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double start = static_cast<double>(run.used());
    const double length = std::max(1.0, static_cast<double>(run.budget()) - start);
    while (!run.exhausted()) {
        // Cooling over the first 60% of the budget, then a cold local phase.
        const double progress = std::min(1.0, (static_cast<double>(run.used()) - start) / (0.6 * length));
        const double temperature = t0 * std::pow(1e-4, progress);
        const auto idx = active_indices(problem, current);
        const auto i = idx[std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng)];
        auto y = current;
        y[i] = mutate_variable(problem.variables()[i], current[i], steps[i], rng);
        const double f = run.evaluate(y);
        // Slow adaptation keeps steps wide while hot; faster once cold.
        const bool cold = progress >= 1.0;
        steps[i] = std::clamp(f < f_current ? steps[i] * (cold ? 1.5 : 1.2) : steps[i] * (cold ? 0.9 : 0.97), 1e-4, 0.5);
        if (f <= f_current || unit(rng) < std::exp(-(f - f_current) / temperature)) {
            current = std::move(y);
            f_current = f;
        }
    }
}

} // namespace

std::vector<RunTrace> run_algorithm(const MixedVariableProblem& problem, std::string_view algorithm_id,
                                    std::size_t budget, std::size_t repetitions, std::uint64_t seed,
                                    std::size_t jobs)
{
    if (std::find(kPortfolio.begin(), kPortfolio.end(), algorithm_id) == kPortfolio.end()) {
        throw ConfigError("unknown algorithm '" + std::string(algorithm_id) + "'");
    }
    if (budget == 0) {
        throw ConfigError("budget must be positive");
    }
    std::vector<RunTrace> traces(repetitions);
    parallel_for(repetitions, jobs, [&](std::size_t r) {
        RunTrace& trace = traces[r];
        trace.instance_id = problem.instance_id();
        trace.algorithm_id = std::string(algorithm_id);
        trace.repetition = r;
        trace.seed = derive_seed(seed, r);
        Rng rng(trace.seed);
        Run run(problem, budget, trace);
        if (algorithm_id == "random_search") {
            random_search(problem, run, rng);
        } else if (algorithm_id == "mixed_evolutionary") {
            mixed_evolutionary(problem, run, rng);
        } else {
            mixed_annealing(problem, run, rng);
        }
    });
    return traces;
}

double compute_target(std::span<const RunTrace> traces)
{
    if (traces.empty()) {
        throw DataError("target needs at least one trace");
    }
    std::vector<double> all;
    for (const auto& t : traces) {
        all.insert(all.end(), t.values.begin(), t.values.end());
    }
    if (all.empty()) {
        throw DataError("target needs at least one evaluation");
    }
    return stats::quantile(std::move(all), 0.01);
}

std::size_t hitting_time(const RunTrace& trace, double target)
{
    for (std::size_t i = 0; i < trace.best_so_far.size(); ++i) {
        if (trace.best_so_far[i] <= target) {
            return i + 1;
        }
    }
    return 0;
}

PerformanceRecord compute_ert(std::span<const RunTrace> traces, double target, std::size_t budget)
{
    PerformanceRecord rec;
    if (!traces.empty()) {
        rec.instance_id = traces.front().instance_id;
        rec.algorithm_id = traces.front().algorithm_id;
    }
    for (const auto& t : traces) {
        if (t.best_so_far.size() != budget) {
            throw DataError("trace of " + t.algorithm_id + " has " + std::to_string(t.best_so_far.size()) +
                            " entries, expected " + std::to_string(budget));
        }
        const std::size_t hit = hitting_time(t, target);
        if (hit > 0) {
            ++rec.successes;
            rec.total_evals += hit;
        } else {
            rec.total_evals += budget;
        }
    }
    rec.ert = rec.successes > 0 ? static_cast<double>(rec.total_evals) / static_cast<double>(rec.successes)
                                : std::numeric_limits<double>::infinity();
    return rec;
}

// ---------------------------------------------------------------------------

PerformanceTable::PerformanceTable(std::vector<std::string> algorithms)
    : algorithms_(std::move(algorithms))
{
    if (algorithms_.empty()) {
        throw ConfigError("performance table needs at least one algorithm");
    }
}

void PerformanceTable::add(const PerformanceRecord& record)
{
    if (std::find(algorithms_.begin(), algorithms_.end(), record.algorithm_id) == algorithms_.end()) {
        throw DataError("algorithm '" + record.algorithm_id + "' is not part of the portfolio");
    }
    if (std::find(instances_.begin(), instances_.end(), record.instance_id) == instances_.end()) {
        instances_.push_back(record.instance_id);
    }
    records_[{record.instance_id, record.algorithm_id}] = record;
}

void PerformanceTable::set_target(const std::string& instance_id, double target)
{
    targets_[instance_id] = target;
}

bool PerformanceTable::contains(std::string_view instance_id, std::string_view algorithm_id) const
{
    return records_.find(std::pair{std::string(instance_id), std::string(algorithm_id)}) != records_.end();
}

const PerformanceRecord& PerformanceTable::at(std::string_view instance_id, std::string_view algorithm_id) const
{
    const auto it = records_.find(std::pair{std::string(instance_id), std::string(algorithm_id)});
    if (it == records_.end()) {
        throw DataError("no performance record for (" + std::string(instance_id) + ", " + std::string(algorithm_id) +
                        ")");
    }
    return it->second;
}

double PerformanceTable::ert(std::string_view instance_id, std::string_view algorithm_id) const
{
    return at(instance_id, algorithm_id).ert;
}

double PerformanceTable::target(std::string_view instance_id) const
{
    const auto it = targets_.find(instance_id);
    if (it == targets_.end()) {
        throw DataError("no target for instance '" + std::string(instance_id) + "'");
    }
    return it->second;
}

double PerformanceTable::vbs_ert(std::string_view instance_id) const
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : algorithms_) {
        best = std::min(best, ert(instance_id, a));
    }
    return best;
}

void PerformanceTable::validate() const
{
    for (const auto& inst : instances_) {
        for (const auto& a : algorithms_) {
            if (!contains(inst, a)) {
                throw DataError("instance '" + inst + "' has no record for '" + a + "'");
            }
        }
        if (!std::isfinite(vbs_ert(inst))) {
            throw DataError("no algorithm reaches the target on instance '" + inst + "'");
        }
    }
}

void PerformanceTable::write(const std::filesystem::path& path) const
{
    csv::Table table;
    table.header = {"instance", "algorithm", "ert", "successes", "total_evals", "target"};
    for (const auto& inst : instances_) {
        const auto t = targets_.find(inst);
        const std::string target = t == targets_.end() ? "nan" : csv::format_double(t->second);
        for (const auto& a : algorithms_) {
            if (!contains(inst, a)) {
                continue;
            }
            const auto& r = at(inst, a);
            table.rows.push_back({inst, a, csv::format_double(r.ert), std::to_string(r.successes),
                                  std::to_string(r.total_evals), target});
        }
    }
    csv::write(path, table);
}

PerformanceTable PerformanceTable::read(const std::filesystem::path& path)
{
    const auto table = csv::read(path);
    const auto c_inst = table.column("instance");
    const auto c_alg = table.column("algorithm");
    const auto c_ert = table.column("ert");
    const auto c_succ = table.column("successes");
    const auto c_total = table.column("total_evals");
    const auto c_target = table.column("target");
    std::vector<std::string> algorithms;
    for (const auto& row : table.rows) {
        if (std::find(algorithms.begin(), algorithms.end(), row[c_alg]) == algorithms.end()) {
            algorithms.push_back(row[c_alg]);
        }
    }
    PerformanceTable out(algorithms);
    for (const auto& row : table.rows) {
        PerformanceRecord r;
        r.instance_id = row[c_inst];
        r.algorithm_id = row[c_alg];
        r.ert = csv::parse_double(row[c_ert]);
        r.successes = static_cast<std::size_t>(std::stoull(row[c_succ]));
        r.total_evals = static_cast<std::size_t>(std::stoull(row[c_total]));
        out.add(r);
        const double target = csv::parse_double(row[c_target]);
        if (!std::isnan(target)) {
            out.set_target(r.instance_id, target);
        }
    }
    return out;
}

InstanceBenchmark benchmark_instance(const MixedVariableProblem& problem, std::span<const std::string> algorithms,
                                     std::size_t budget, std::size_t repetitions, std::uint64_t seed,
                                     std::size_t jobs)
{
    InstanceBenchmark out;
    std::vector<std::vector<RunTrace>> per_algorithm;
    for (const auto& a : algorithms) {
        per_algorithm.push_back(run_algorithm(problem, a, budget, repetitions, derive_seed(seed, fnv1a(a)), jobs));
    }
    for (auto& traces : per_algorithm) {
        out.traces.insert(out.traces.end(), traces.begin(), traces.end());
    }
    out.target = compute_target(out.traces);
    for (const auto& traces : per_algorithm) {
        auto rec = compute_ert(traces, out.target, budget);
        rec.instance_id = problem.instance_id();
        out.records.push_back(std::move(rec));
    }
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        out.records[a].algorithm_id = algorithms[a];
    }
    return out;
}

void write_traces(const std::vector<RunTrace>& traces, const std::filesystem::path& path)
{
    csv::Table table;
    table.header = {"algorithm", "repetition", "eval", "value", "best_so_far"};
    for (const auto& t : traces) {
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            table.rows.push_back({t.algorithm_id, std::to_string(t.repetition), std::to_string(i + 1),
                                  csv::format_double(t.values[i]), csv::format_double(t.best_so_far[i])});
        }
    }
    csv::write(path, table);
}

std::vector<RunTrace> read_traces(const std::filesystem::path& path, const std::string& instance_id)
{
    const auto table = csv::read(path);
    const auto c_alg = table.column("algorithm");
    const auto c_rep = table.column("repetition");
    const auto c_value = table.column("value");
    const auto c_best = table.column("best_so_far");
    std::vector<RunTrace> out;
    for (const auto& row : table.rows) {
        const auto rep = static_cast<std::size_t>(std::stoull(row[c_rep]));
        if (out.empty() || out.back().algorithm_id != row[c_alg] || out.back().repetition != rep) {
            RunTrace t;
            t.instance_id = instance_id;
            t.algorithm_id = row[c_alg];
            t.repetition = rep;
            out.push_back(std::move(t));
        }
        out.back().values.push_back(csv::parse_double(row[c_value]));
        out.back().best_so_far.push_back(csv::parse_double(row[c_best]));
    }
    return out;
}

} // namespace mvela
