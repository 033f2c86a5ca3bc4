#include <doctest.h>

#include <cmath>
#include <set>

#include "mvela/core.hpp"
#include "mvela/problem.hpp"

using namespace mvela;

namespace {

MixedVariableProblem small_problem()
{
    std::vector<VariableSpec> vars{
        VariableSpec::continuous("x", -1.0, 3.0),
        VariableSpec::integer("n", 0, 5),
        VariableSpec::categorical("kernel", {"rbf", "poly", "linear"}),
        VariableSpec::integer("degree", 2, 5).active_when("kernel", {"poly"}),
    };
    return MixedVariableProblem("toy", std::move(vars), [](std::span<const double> c) {
        return c[0] * c[0] + c[1] + 10.0 * c[2] + c[3];
    });
}

} // namespace

TEST_CASE("default codes")
{
    CHECK(VariableSpec::continuous("a", -1.0, 3.0).default_code() == 1.0);
    CHECK(VariableSpec::integer("b", 0, 5).default_code() == 2.0);
    CHECK(VariableSpec::integer("c", -3, 0).default_code() == -2.0);
    CHECK(VariableSpec::categorical("d", {"u", "v"}).default_code() == 0.0);
}

TEST_CASE("invalid variables")
{
    CHECK_THROWS_AS(VariableSpec::continuous("a", 1.0, 1.0).validate(), ConfigError);
    CHECK_THROWS_AS(VariableSpec::categorical("a", {}).validate(), ConfigError);
    CHECK_THROWS_AS(VariableSpec::categorical("a", {"u", "u"}).validate(), ConfigError);
    std::vector<VariableSpec> dup{VariableSpec::continuous("a", 0, 1), VariableSpec::continuous("a", 0, 1)};
    CHECK_THROWS_AS(MixedVariableProblem("p", dup, [](std::span<const double>) { return 0.0; }), ConfigError);
    std::vector<VariableSpec> orphan{VariableSpec::continuous("a", 0, 1).active_when("missing", {"x"})};
    CHECK_THROWS_AS(MixedVariableProblem("p", orphan, [](std::span<const double>) { return 0.0; }), ConfigError);
}

TEST_CASE("encode and decode round trip")
{
    const auto p = small_problem();
    Assignment a;
    a.set("x", 0.5).set("n", std::int64_t{3}).set("kernel", std::string("poly")).set("degree", std::int64_t{4});
    const auto codes = p.encode(a);
    REQUIRE(codes.size() == 4);
    CHECK(codes[2] == 1.0);
    const auto back = p.decode(codes);
    CHECK(std::get<std::string>(back.at("kernel")) == "poly");
    CHECK(std::get<std::int64_t>(back.at("degree")) == 4);
    CHECK(std::get<double>(back.at("x")) == 0.5);
}

TEST_CASE("bounds are enforced")
{
    const auto p = small_problem();
    CHECK_THROWS_AS(p.check_bounds(std::vector<double>{4.0, 0, 0, 2}), DomainError);
    CHECK_THROWS_AS(p.check_bounds(std::vector<double>{0.0, 1.5, 0, 2}), DomainError);
    CHECK_THROWS_AS(p.check_bounds(std::vector<double>{0.0, 1, 3, 2}), DomainError);
    CHECK_THROWS_AS(p.check_bounds(std::vector<double>{0.0, 1, 0}), DimensionError);
    CHECK_NOTHROW(p.check_bounds(std::vector<double>{3.0, 5, 2, 5}));
    Assignment bad;
    bad.set("x", 0.0).set("n", std::int64_t{0}).set("kernel", std::string("sigmoid")).set("degree", std::int64_t{2});
    CHECK_THROWS_AS(p.encode(bad), DomainError);
}

TEST_CASE("inactive variables are canonicalized")
{
    const auto p = small_problem();
    const std::vector<double> rbf{1.0, 2, 0, 5};
    const auto mask = p.active_mask(rbf);
    CHECK_FALSE(mask[3]);
    CHECK(p.canonicalize(rbf)[3] == 3.0);
    // degree does not matter unless kernel is poly
    CHECK(p.evaluate_relaxed(rbf) == p.evaluate_relaxed(std::vector<double>{1.0, 2, 0, 2}));
    CHECK(p.evaluate_relaxed(std::vector<double>{1.0, 2, 1, 5}) == doctest::Approx(1 + 2 + 10 + 5));
}

namespace {

std::vector<double> midpoint(const MixedVariableProblem& p)
{
    std::vector<double> x;
    for (const auto& v : p.variables()) {
        x.push_back(v.kind == VariableKind::categorical ? 1.0 : v.default_code());
    }
    return x;
}

} // namespace

TEST_CASE("synthetic suite")
{
    SuiteConfig cfg;
    cfg.templates = {{2, 1, 1, 3, false, 4}, {2, 0, 1, 3, true, 3}};
    const auto specs = plan_synthetic_suite(cfg, 11);
    REQUIRE(specs.size() == 7);
    std::set<std::string> ids;
    for (const auto& s : specs) {
        ids.insert(s.instance_id);
    }
    CHECK(ids.size() == 7);
    CHECK(specs.front().instance_id.rfind("c2i1k1_", 0) == 0);

    const auto a = generate_synthetic_suite(cfg, 11);
    const auto b = generate_synthetic_suite(cfg, 11);
    const auto c = generate_synthetic_suite(cfg, 12);
    // Variables are ordered categorical, continuous, integer.
    CHECK(a[0].variables()[0].kind == VariableKind::categorical);
    CHECK(a[0].variables()[3].kind == VariableKind::integer);
    const auto probe = midpoint(a[0]);
    CHECK(a[0].evaluate_relaxed(probe) == b[0].evaluate_relaxed(probe));
    bool differs = false;
    for (std::size_t i = 0; i < 4; ++i) {
        differs = differs || a[i].evaluate_relaxed(probe) != c[i].evaluate_relaxed(probe);
    }
    CHECK(differs);

    // Hierarchical instances carry an activation condition.
    bool has_activation = false;
    for (const auto& v : a[4].variables()) {
        has_activation = has_activation || v.activation.has_value();
    }
    CHECK(has_activation);
}

TEST_CASE("suite manifest round trip")
{
    SuiteConfig cfg;
    cfg.templates = {{1, 1, 2, 4, false, 2}};
    const auto specs = plan_synthetic_suite(cfg, 3);
    const auto manifest = suite_manifest(specs);
    const auto rebuilt = suite_from_manifest(nlohmann::json::parse(manifest.dump()));
    const auto original = generate_synthetic_suite(cfg, 3);
    REQUIRE(rebuilt.size() == original.size());
    for (std::size_t i = 0; i < rebuilt.size(); ++i) {
        CHECK(rebuilt[i].instance_id() == original[i].instance_id());
        CHECK(rebuilt[i].variables() == original[i].variables());
        const auto probe = midpoint(original[i]);
        CHECK(rebuilt[i].evaluate_relaxed(probe) == original[i].evaluate_relaxed(probe));
    }
}

TEST_CASE("suite config json")
{
    const auto j = nlohmann::json::parse(R"({"templates": [{"continuous": 2, "categorical": 1, "count": 3}]})");
    const auto cfg = suite_config_from_json(j);
    REQUIRE(cfg.templates.size() == 1);
    CHECK(cfg.templates[0].n_continuous == 2);
    CHECK(cfg.templates[0].n_integer == 0);
    CHECK(cfg.templates[0].count == 3);
    CHECK(suite_config_from_json(to_json(cfg)).templates == cfg.templates);
    CHECK_THROWS_AS(SuiteConfig{}.validate(), ConfigError);
}
