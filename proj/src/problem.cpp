#include "mvela/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "mvela/core.hpp"
#include "mvela/random.hpp"

namespace mvela {

std::string_view to_string(VariableKind kind)
{
    switch (kind) {
    case VariableKind::continuous:
        return "continuous";
    case VariableKind::integer:
        return "integer";
    case VariableKind::categorical:
        return "categorical";
    }
    return "unknown";
}

VariableKind parse_variable_kind(std::string_view text)
{
    if (text == "continuous") {
        return VariableKind::continuous;
    }
    if (text == "integer") {
        return VariableKind::integer;
    }
    if (text == "categorical") {
        return VariableKind::categorical;
    }
    throw ConfigError("unknown variable kind '" + std::string(text) + "'");
}

VariableSpec VariableSpec::continuous(std::string name, double lower, double upper)
{
    VariableSpec v;
    v.name = std::move(name);
    v.kind = VariableKind::continuous;
    v.lower = lower;
    v.upper = upper;
    return v;
}

VariableSpec VariableSpec::integer(std::string name, std::int64_t lower, std::int64_t upper)
{
    VariableSpec v;
    v.name = std::move(name);
    v.kind = VariableKind::integer;
    v.lower = static_cast<double>(lower);
    v.upper = static_cast<double>(upper);
    return v;
}

VariableSpec VariableSpec::categorical(std::string name, std::vector<std::string> categories)
{
    VariableSpec v;
    v.name = std::move(name);
    v.kind = VariableKind::categorical;
    v.categories = std::move(categories);
    return v;
}

VariableSpec& VariableSpec::active_when(std::string parent, std::vector<std::string> values)
{
    activation = Activation{std::move(parent), std::move(values)};
    return *this;
}

double VariableSpec::default_code() const
{
    switch (kind) {
    case VariableKind::continuous:
        return 0.5 * (lower + upper);
    case VariableKind::integer:
        return std::floor(0.5 * (lower + upper));
    case VariableKind::categorical:
        return 0.0;
    }
    return 0.0;
}

void VariableSpec::validate() const
{
    if (name.empty()) {
        throw ConfigError("variable with empty name");
    }
    switch (kind) {
    case VariableKind::continuous:
        if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
            throw ConfigError("continuous variable '" + name + "' needs finite lower < upper");
        }
        break;
    case VariableKind::integer:
        if (!(std::isfinite(lower) && std::isfinite(upper) && lower <= upper) || std::floor(lower) != lower ||
            std::floor(upper) != upper) {
            throw ConfigError("integer variable '" + name + "' needs integral lower <= upper");
        }
        break;
    case VariableKind::categorical: {
        if (categories.empty()) {
            throw ConfigError("categorical variable '" + name + "' has no categories");
        }
        std::set<std::string_view> seen(categories.begin(), categories.end());
        if (seen.size() != categories.size()) {
            throw ConfigError("categorical variable '" + name + "' has duplicate categories");
        }
        break;
    }
    }
}

Assignment& Assignment::set(std::string name, Value value)
{
    values_.insert_or_assign(std::move(name), std::move(value));
    return *this;
}

const Value& Assignment::at(std::string_view name) const
{
    auto it = values_.find(name);
    if (it == values_.end()) {
        throw DomainError("assignment has no value for variable '" + std::string(name) + "'");
    }
    return it->second;
}

bool Assignment::contains(std::string_view name) const
{
    return values_.find(name) != values_.end();
}

namespace {

double parse_parent_code(const VariableSpec& parent, const std::string& value)
{
    if (parent.kind == VariableKind::categorical) {
        auto it = std::find(parent.categories.begin(), parent.categories.end(), value);
        if (it == parent.categories.end()) {
            throw ConfigError("activation value '" + value + "' is not a category of '" + parent.name + "'");
        }
        return static_cast<double>(it - parent.categories.begin());
    }
    std::size_t consumed = 0;
    long long parsed = 0;
    try {
        parsed = std::stoll(value, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != value.size()) {
        throw ConfigError("activation value '" + value + "' is not an integer of '" + parent.name + "'");
    }
    return static_cast<double>(parsed);
}

} // namespace

MixedVariableProblem::MixedVariableProblem(std::string instance_id, std::vector<VariableSpec> variables,
                                           ObjectiveFn objective)
    : instance_id_(std::move(instance_id))
    , variables_(std::move(variables))
    , objective_(std::make_shared<const ObjectiveFn>(std::move(objective)))
{
    if (variables_.empty()) {
        throw ConfigError("problem '" + instance_id_ + "' has no variables");
    }
    if (!*objective_) {
        throw ConfigError("problem '" + instance_id_ + "' has no objective");
    }
    activations_.resize(variables_.size());
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& v = variables_[i];
        v.validate();
        for (std::size_t j = 0; j < i; ++j) {
            if (variables_[j].name == v.name) {
                throw ConfigError("duplicate variable name '" + v.name + "'");
            }
        }
        if (!v.activation) {
            continue;
        }
        // Parents must be declared earlier, which rules out cycles.
        std::size_t parent = i;
        for (std::size_t j = 0; j < i; ++j) {
            if (variables_[j].name == v.activation->parent) {
                parent = j;
            }
        }
        if (parent == i) {
            throw ConfigError("activation parent '" + v.activation->parent + "' of '" + v.name +
                              "' must be declared before it");
        }
        if (variables_[parent].kind == VariableKind::continuous) {
            throw ConfigError("activation parent '" + v.activation->parent + "' must be categorical or integer");
        }
        ResolvedActivation resolved{parent, {}};
        for (const auto& value : v.activation->values) {
            resolved.codes.push_back(parse_parent_code(variables_[parent], value));
        }
        activations_[i] = std::move(resolved);
    }
}

std::size_t MixedVariableProblem::index_of(std::string_view name) const
{
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        if (variables_[i].name == name) {
            return i;
        }
    }
    throw DomainError("unknown variable '" + std::string(name) + "'");
}

std::vector<double> MixedVariableProblem::encode(const Assignment& point) const
{
    std::vector<double> codes(variables_.size());
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& v = variables_[i];
        const Value& value = point.at(v.name);
        if (v.kind == VariableKind::categorical) {
            const auto* label = std::get_if<std::string>(&value);
            if (label == nullptr) {
                throw DomainError("variable '" + v.name + "' expects a category label");
            }
            auto it = std::find(v.categories.begin(), v.categories.end(), *label);
            if (it == v.categories.end()) {
                throw DomainError("variable '" + v.name + "' has no category '" + *label + "'");
            }
            codes[i] = static_cast<double>(it - v.categories.begin());
        } else if (const auto* d = std::get_if<double>(&value)) {
            codes[i] = *d;
        } else if (const auto* n = std::get_if<std::int64_t>(&value)) {
            codes[i] = static_cast<double>(*n);
        } else {
            throw DomainError("variable '" + v.name + "' expects a number");
        }
    }
    check_bounds(codes);
    return codes;
}

Assignment MixedVariableProblem::decode(std::span<const double> codes) const
{
    check_bounds(codes);
    Assignment point;
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& v = variables_[i];
        switch (v.kind) {
        case VariableKind::continuous:
            point.set(v.name, codes[i]);
            break;
        case VariableKind::integer:
            point.set(v.name, static_cast<std::int64_t>(codes[i]));
            break;
        case VariableKind::categorical:
            point.set(v.name, v.categories[static_cast<std::size_t>(codes[i])]);
            break;
        }
    }
    return point;
}

void MixedVariableProblem::check_bounds(std::span<const double> codes) const
{
    if (codes.size() != variables_.size()) {
        throw DimensionError("point has " + std::to_string(codes.size()) + " values, problem '" + instance_id_ +
                             "' has " + std::to_string(variables_.size()) + " variables");
    }
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& v = variables_[i];
        const double c = codes[i];
        bool ok = std::isfinite(c);
        switch (v.kind) {
        case VariableKind::continuous:
            ok = ok && c >= v.lower && c <= v.upper;
            break;
        case VariableKind::integer:
            ok = ok && c >= v.lower && c <= v.upper && std::floor(c) == c;
            break;
        case VariableKind::categorical:
            ok = ok && c >= 0.0 && std::floor(c) == c && c < static_cast<double>(v.categories.size());
            break;
        }
        if (!ok) {
            std::ostringstream msg;
            msg << "value " << c << " out of bounds for variable '" << v.name << "'";
            throw DomainError(msg.str());
        }
    }
}

std::vector<bool> MixedVariableProblem::active_mask(std::span<const double> codes) const
{
    std::vector<bool> active(variables_.size(), true);
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& act = activations_[i];
        if (!act) {
            continue;
        }
        active[i] = active[act->parent] &&
                    std::find(act->codes.begin(), act->codes.end(), codes[act->parent]) != act->codes.end();
    }
    return active;
}

std::vector<double> MixedVariableProblem::canonicalize(std::span<const double> codes) const
{
    std::vector<double> out(codes.begin(), codes.end());
    const auto active = active_mask(codes);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!active[i]) {
            out[i] = variables_[i].default_code();
        }
    }
    return out;
}

double MixedVariableProblem::evaluate_relaxed(std::span<const double> codes) const
{
    check_bounds(codes);
    const auto canonical = canonicalize(codes);
    return (*objective_)(canonical);
}

double MixedVariableProblem::evaluate_relaxed(const Assignment& point) const
{
    return evaluate_relaxed(encode(point));
}

// ---------------------------------------------------------------------------

std::string SuiteTemplate::label() const
{
    std::string out = "c" + std::to_string(n_continuous) + "i" + std::to_string(n_integer) + "k" +
                      std::to_string(n_categorical);
    if (hierarchical) {
        out += "h";
    }
    return out;
}

void SuiteConfig::validate() const
{
    if (templates.empty()) {
        throw ConfigError("suite config has no templates");
    }
    for (const auto& t : templates) {
        if (t.dimension() == 0) {
            throw ConfigError("suite template " + t.label() + " is zero-dimensional");
        }
        if (t.n_categorical > 0 && t.n_levels < 2) {
            throw ConfigError("suite template " + t.label() + " needs at least 2 levels per categorical");
        }
        if (t.hierarchical && (t.n_continuous == 0 || t.n_categorical == 0)) {
            throw ConfigError("hierarchical template " + t.label() + " needs a continuous and a categorical variable");
        }
    }
}

std::string_view to_string(LandscapeKind kind)
{
    switch (kind) {
    case LandscapeKind::sphere:
        return "sphere";
    case LandscapeKind::ellipsoid:
        return "ellipsoid";
    case LandscapeKind::rastrigin:
        return "rastrigin";
    }
    return "unknown";
}

LandscapeKind landscape_of(const SyntheticProblemSpec& spec)
{
    return static_cast<LandscapeKind>(derive_seed(spec.seed, 1) % 3);
}

namespace {

constexpr double kContinuousLower = -5.0;
constexpr double kContinuousUpper = 5.0;
constexpr std::int64_t kIntegerLower = 0;
constexpr std::int64_t kIntegerUpper = 10;

std::string level_name(std::size_t l)
{
    std::string s;
    do {
        s.insert(s.begin(), static_cast<char>('a' + l % 26));
        l /= 26;
    } while (l-- > 0);
    return s;
}

// Numeric part: a base landscape around an optimum whose location depends on
// the categorical levels. Categorical part: per-level offsets, per-level
// multiplicative scales and pairwise level interactions.
struct SyntheticObjective {
    LandscapeKind kind;
    std::vector<std::size_t> numeric_index;
    std::vector<double> numeric_lower;
    std::vector<double> numeric_span;
    std::vector<std::size_t> categorical_index;
    std::vector<double> center;
    std::vector<double> weights;
    // [categorical][level][numeric dim]
    std::vector<std::vector<std::vector<double>>> shifts;
    std::vector<std::vector<double>> offsets;
    std::vector<std::vector<double>> scales;
    // [pair][level_a * n_levels + level_b]
    std::vector<std::vector<double>> interactions;
    std::size_t n_levels = 0;

    double operator()(std::span<const double> codes) const
    {
        std::vector<std::size_t> levels(categorical_index.size());
        for (std::size_t v = 0; v < levels.size(); ++v) {
            levels[v] = static_cast<std::size_t>(codes[categorical_index[v]]);
        }
        double scale = 1.0;
        double offset = 0.0;
        for (std::size_t v = 0; v < levels.size(); ++v) {
            scale *= scales[v][levels[v]];
            offset += offsets[v][levels[v]];
        }
        std::size_t pair = 0;
        for (std::size_t a = 0; a < levels.size(); ++a) {
            for (std::size_t b = a + 1; b < levels.size(); ++b) {
                offset += interactions[pair++][levels[a] * n_levels + levels[b]];
            }
        }
        double g = 0.0;
        for (std::size_t d = 0; d < numeric_index.size(); ++d) {
            const double z = (codes[numeric_index[d]] - numeric_lower[d]) / numeric_span[d];
            double target = center[d];
            for (std::size_t v = 0; v < levels.size(); ++v) {
                target += shifts[v][levels[v]][d];
            }
            target = std::clamp(target, 0.05, 0.95);
            const double u = 5.0 * (z - target);
            switch (kind) {
            case LandscapeKind::sphere:
                g += u * u;
                break;
            case LandscapeKind::ellipsoid:
                g += weights[d] * u * u;
                break;
            case LandscapeKind::rastrigin:
                g += u * u + 10.0 * (1.0 - std::cos(2.0 * std::numbers::pi * u));
                break;
            }
        }
        return scale * g + offset;
    }
};

} // namespace

MixedVariableProblem make_synthetic_problem(const SyntheticProblemSpec& spec)
{
    const auto& t = spec.shape;
    SuiteConfig{{t}}.validate();

    std::vector<VariableSpec> vars;
    for (std::size_t i = 0; i < t.n_categorical; ++i) {
        std::vector<std::string> cats;
        for (std::size_t l = 0; l < t.n_levels; ++l) {
            cats.push_back(level_name(l));
        }
        vars.push_back(VariableSpec::categorical("k" + std::to_string(i), std::move(cats)));
    }
    for (std::size_t i = 0; i < t.n_continuous; ++i) {
        vars.push_back(VariableSpec::continuous("x" + std::to_string(i), kContinuousLower, kContinuousUpper));
    }
    for (std::size_t i = 0; i < t.n_integer; ++i) {
        vars.push_back(VariableSpec::integer("i" + std::to_string(i), kIntegerLower, kIntegerUpper));
    }
    if (t.hierarchical) {
        vars[t.n_categorical + t.n_continuous - 1].active_when("k0", {level_name(0)});
    }

    SyntheticObjective obj;
    obj.kind = landscape_of(spec);
    obj.n_levels = t.n_levels;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (vars[i].numeric()) {
            obj.numeric_index.push_back(i);
            obj.numeric_lower.push_back(vars[i].lower);
            obj.numeric_span.push_back(vars[i].upper - vars[i].lower);
        } else {
            obj.categorical_index.push_back(i);
        }
    }

    Rng rng(derive_seed(spec.seed, 2));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t k = obj.numeric_index.size();
    for (std::size_t d = 0; d < k; ++d) {
        obj.center.push_back(0.25 + 0.5 * unit(rng));
        obj.weights.push_back(k > 1 ? std::pow(10.0, 2.0 * static_cast<double>(d) / static_cast<double>(k - 1)) : 1.0);
    }
    for (std::size_t v = 0; v < t.n_categorical; ++v) {
        std::vector<std::vector<double>> level_shifts;
        std::vector<double> level_offsets;
        std::vector<double> level_scales;
        for (std::size_t l = 0; l < t.n_levels; ++l) {
            std::vector<double> shift(k);
            for (auto& s : shift) {
                s = -0.2 + 0.4 * unit(rng);
            }
            level_shifts.push_back(std::move(shift));
            level_offsets.push_back(5.0 * unit(rng));
            level_scales.push_back(0.6 + unit(rng));
        }
        obj.shifts.push_back(std::move(level_shifts));
        obj.offsets.push_back(std::move(level_offsets));
        obj.scales.push_back(std::move(level_scales));
    }
    for (std::size_t a = 0; a < t.n_categorical; ++a) {
        for (std::size_t b = a + 1; b < t.n_categorical; ++b) {
            std::vector<double> table(t.n_levels * t.n_levels);
            for (auto& x : table) {
                x = unit(rng);
            }
            obj.interactions.push_back(std::move(table));
        }
    }
    return MixedVariableProblem(spec.instance_id, std::move(vars), std::move(obj));
}

std::vector<SyntheticProblemSpec> plan_synthetic_suite(const SuiteConfig& config, std::uint64_t seed)
{
    config.validate();
    std::vector<SyntheticProblemSpec> specs;
    std::uint64_t index = 0;
    for (const auto& t : config.templates) {
        for (std::size_t i = 0; i < t.count; ++i) {
            SyntheticProblemSpec spec;
            spec.shape = t;
            spec.seed = derive_seed(seed, index);
            std::ostringstream id;
            id << t.label() << "_" << i;
            spec.instance_id = id.str();
            specs.push_back(std::move(spec));
            ++index;
        }
    }
    // Two templates with the same label would collide.
    std::set<std::string_view> ids;
    for (const auto& s : specs) {
        if (!ids.insert(s.instance_id).second) {
            throw ConfigError("duplicate instance id '" + s.instance_id + "' (repeated template?)");
        }
    }
    return specs;
}

std::vector<MixedVariableProblem> generate_synthetic_suite(const SuiteConfig& config, std::uint64_t seed)
{
    std::vector<MixedVariableProblem> out;
    for (const auto& spec : plan_synthetic_suite(config, seed)) {
        out.push_back(make_synthetic_problem(spec));
    }
    return out;
}

// JSON ------------------------------------------------------------------------

nlohmann::json to_json(const VariableSpec& spec)
{
    nlohmann::json j;
    j["name"] = spec.name;
    j["kind"] = to_string(spec.kind);
    if (spec.numeric()) {
        j["lower"] = spec.lower;
        j["upper"] = spec.upper;
    } else {
        j["categories"] = spec.categories;
    }
    if (spec.activation) {
        j["activation"] = {{"parent", spec.activation->parent}, {"values", spec.activation->values}};
    }
    return j;
}

VariableSpec variable_from_json(const nlohmann::json& j)
{
    VariableSpec v;
    v.name = j.at("name").get<std::string>();
    v.kind = parse_variable_kind(j.at("kind").get<std::string>());
    if (v.numeric()) {
        v.lower = j.at("lower").get<double>();
        v.upper = j.at("upper").get<double>();
    } else {
        v.categories = j.at("categories").get<std::vector<std::string>>();
    }
    if (j.contains("activation")) {
        const auto& a = j.at("activation");
        v.activation = Activation{a.at("parent").get<std::string>(), a.at("values").get<std::vector<std::string>>()};
    }
    return v;
}

nlohmann::json to_json(const SuiteTemplate& t)
{
    return {{"continuous", t.n_continuous}, {"integer", t.n_integer}, {"categorical", t.n_categorical},
            {"levels", t.n_levels},         {"hierarchical", t.hierarchical}, {"count", t.count}};
}

SuiteTemplate template_from_json(const nlohmann::json& j)
{
    SuiteTemplate t;
    t.n_continuous = j.value("continuous", std::size_t{0});
    t.n_integer = j.value("integer", std::size_t{0});
    t.n_categorical = j.value("categorical", std::size_t{0});
    t.n_levels = j.value("levels", std::size_t{3});
    t.hierarchical = j.value("hierarchical", false);
    t.count = j.value("count", std::size_t{1});
    return t;
}

nlohmann::json to_json(const SuiteConfig& config)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : config.templates) {
        arr.push_back(to_json(t));
    }
    return {{"templates", arr}};
}

SuiteConfig suite_config_from_json(const nlohmann::json& j)
{
    SuiteConfig c;
    for (const auto& t : j.at("templates")) {
        c.templates.push_back(template_from_json(t));
    }
    return c;
}

nlohmann::json suite_manifest(const std::vector<SyntheticProblemSpec>& specs)
{
    nlohmann::json problems = nlohmann::json::array();
    for (const auto& s : specs) {
        const auto problem = make_synthetic_problem(s);
        nlohmann::json vars = nlohmann::json::array();
        for (const auto& v : problem.variables()) {
            vars.push_back(to_json(v));
        }
        nlohmann::json shape = to_json(s.shape);
        shape.erase("count");
        problems.push_back({{"instance_id", s.instance_id},
                            {"seed", s.seed},
                            {"template", shape},
                            {"landscape", to_string(landscape_of(s))},
                            {"variables", vars}});
    }
    return {{"format", "mvela-suite"}, {"version", 1}, {"problems", problems}};
}

std::vector<SyntheticProblemSpec> specs_from_manifest(const nlohmann::json& manifest)
{
    std::vector<SyntheticProblemSpec> specs;
    for (const auto& p : manifest.at("problems")) {
        SyntheticProblemSpec s;
        s.instance_id = p.at("instance_id").get<std::string>();
        s.seed = p.at("seed").get<std::uint64_t>();
        s.shape = template_from_json(p.at("template"));
        s.shape.count = 1;
        specs.push_back(std::move(s));
    }
    return specs;
}

std::vector<MixedVariableProblem> suite_from_manifest(const nlohmann::json& manifest)
{
    std::vector<MixedVariableProblem> out;
    const auto specs = specs_from_manifest(manifest);
    const auto& entries = manifest.at("problems");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        auto problem = make_synthetic_problem(specs[i]);
        const auto& recorded = entries[i].at("variables");
        if (recorded.size() != problem.dimension()) {
            throw DataError("manifest entry '" + specs[i].instance_id + "' does not match its template");
        }
        for (std::size_t v = 0; v < problem.dimension(); ++v) {
            if (!(variable_from_json(recorded[v]) == problem.variables()[v])) {
                throw DataError("manifest entry '" + specs[i].instance_id + "' variable " +
                                problem.variables()[v].name + " does not match its template");
            }
        }
        out.push_back(std::move(problem));
    }
    return out;
}

} // namespace mvela
