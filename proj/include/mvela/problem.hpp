#ifndef MVELA_PROBLEM_HPP
#define MVELA_PROBLEM_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mvela {

enum class VariableKind { continuous, integer, categorical };

std::string_view to_string(VariableKind kind);
VariableKind parse_variable_kind(std::string_view text);

// A variable is active only when its parent takes one of `values`. Values are
// written as category labels for categorical parents and as decimal integers
// for integer parents.
struct Activation {
    std::string parent;
    std::vector<std::string> values;

    bool operator==(const Activation&) const = default;
};

struct VariableSpec {
    std::string name;
    VariableKind kind = VariableKind::continuous;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<std::string> categories;
    std::optional<Activation> activation;

    static VariableSpec continuous(std::string name, double lower, double upper);
    static VariableSpec integer(std::string name, std::int64_t lower, std::int64_t upper);
    static VariableSpec categorical(std::string name, std::vector<std::string> categories);

    VariableSpec& active_when(std::string parent, std::vector<std::string> values);

    bool numeric() const noexcept { return kind != VariableKind::categorical; }

    // Value substituted for the variable while it is inactive: the interval
    // midpoint (rounded down for integers) or the first category.
    double default_code() const;

    // Throws ConfigError on violated invariants.
    void validate() const;

    bool operator==(const VariableSpec&) const = default;
};

using Value = std::variant<double, std::int64_t, std::string>;

// Full assignment of values by variable name. Internally every variable is
// represented by a real "code": the value itself for numeric variables and the
// category index for categorical ones.
class Assignment {
public:
    Assignment() = default;

    Assignment& set(std::string name, Value value);
    const Value& at(std::string_view name) const;
    bool contains(std::string_view name) const;
    std::size_t size() const noexcept { return values_.size(); }
    const std::map<std::string, Value, std::less<>>& values() const noexcept { return values_; }

private:
    std::map<std::string, Value, std::less<>> values_;
};

// Objective over codes in variable order, always called with a canonical point
// (inactive variables at their defaults).
using ObjectiveFn = std::function<double(std::span<const double>)>;

class MixedVariableProblem {
public:
    MixedVariableProblem(std::string instance_id, std::vector<VariableSpec> variables, ObjectiveFn objective);

    const std::string& instance_id() const noexcept { return instance_id_; }
    const std::vector<VariableSpec>& variables() const noexcept { return variables_; }
    std::size_t dimension() const noexcept { return variables_.size(); }
    std::size_t index_of(std::string_view name) const;

    std::vector<double> encode(const Assignment& point) const;
    Assignment decode(std::span<const double> codes) const;

    // Throws DomainError naming the first offending variable.
    void check_bounds(std::span<const double> codes) const;

    std::vector<bool> active_mask(std::span<const double> codes) const;

    // Copy of `codes` with every inactive variable set to its default.
    std::vector<double> canonicalize(std::span<const double> codes) const;

    double evaluate_relaxed(std::span<const double> codes) const;
    double evaluate_relaxed(const Assignment& point) const;

private:
    struct ResolvedActivation {
        std::size_t parent;
        std::vector<double> codes;
    };

    std::string instance_id_;
    std::vector<VariableSpec> variables_;
    std::vector<std::optional<ResolvedActivation>> activations_;
    std::shared_ptr<const ObjectiveFn> objective_;
};

// Synthetic benchmark suite -------------------------------------------------

struct SuiteTemplate {
    std::size_t n_continuous = 0;
    std::size_t n_integer = 0;
    std::size_t n_categorical = 0;
    std::size_t n_levels = 3;
    bool hierarchical = false;
    std::size_t count = 1;

    std::size_t dimension() const noexcept { return n_continuous + n_integer + n_categorical; }
    // Group label used in reports, e.g. "c2i1k1" or "c2i1k1h".
    std::string label() const;

    bool operator==(const SuiteTemplate&) const = default;
};

struct SuiteConfig {
    std::vector<SuiteTemplate> templates;

    void validate() const;
};

// One entry of a suite manifest; sufficient to rebuild the problem exactly.
struct SyntheticProblemSpec {
    std::string instance_id;
    SuiteTemplate shape;
    std::uint64_t seed = 0;
};

enum class LandscapeKind { sphere, ellipsoid, rastrigin };
std::string_view to_string(LandscapeKind kind);

LandscapeKind landscape_of(const SyntheticProblemSpec& spec);

MixedVariableProblem make_synthetic_problem(const SyntheticProblemSpec& spec);

std::vector<SyntheticProblemSpec> plan_synthetic_suite(const SuiteConfig& config, std::uint64_t seed);
std::vector<MixedVariableProblem> generate_synthetic_suite(const SuiteConfig& config, std::uint64_t seed);

nlohmann::json to_json(const VariableSpec& spec);
VariableSpec variable_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SuiteTemplate& t);
SuiteTemplate template_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SuiteConfig& config);
SuiteConfig suite_config_from_json(const nlohmann::json& j);

nlohmann::json suite_manifest(const std::vector<SyntheticProblemSpec>& specs);
std::vector<SyntheticProblemSpec> specs_from_manifest(const nlohmann::json& manifest);
// Rebuilds the problems and checks the recorded variable specs against them.
std::vector<MixedVariableProblem> suite_from_manifest(const nlohmann::json& manifest);

} // namespace mvela

#endif
