#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>

#include "mvela/design.hpp"

using namespace mvela;

namespace {

MixedVariableProblem sample_problem()
{
    SuiteConfig cfg;
    cfg.templates = {{2, 1, 1, 3, false, 1}};
    return generate_synthetic_suite(cfg, 5).front();
}

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("mvela_test_design_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("initial design size and domain")
{
    const auto p = sample_problem();
    const auto d = sample_initial_design(p, 42);
    CHECK(d.rows() == 50 * p.dimension());
    CHECK(d.dimension() == p.dimension());
    CHECK(d.has_categorical());
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto row = row_span(d.X, static_cast<Eigen::Index>(r));
        CHECK_NOTHROW(p.check_bounds(row));
        CHECK(d.Y[r] == p.evaluate_relaxed(row));
    }
    CHECK(sample_initial_design(p, 42, 10).rows() == 10 * p.dimension());
    CHECK_THROWS_AS(sample_initial_design(p, 42, 0), ConfigError);
}

TEST_CASE("initial design is seeded")
{
    const auto p = sample_problem();
    const auto a = sample_initial_design(p, 1);
    const auto b = sample_initial_design(p, 1);
    const auto c = sample_initial_design(p, 2);
    CHECK(a.X == b.X);
    CHECK(a.Y == b.Y);
    CHECK(a.X != c.X);
}

TEST_CASE("min-max scaling")
{
    const std::vector<double> v{2.0, 4.0, 3.0};
    const auto s = min_max_scale(v);
    CHECK(s == std::vector<double>{0.0, 1.0, 0.5});
    CHECK(min_max_scale(std::vector<double>{7.0, 7.0}) == std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(min_max_scale(std::vector<double>{1.0, std::nan("")}), DataError);
}

TEST_CASE("normalize scales every column")
{
    NumericDesign d;
    d.feature_names = {"a", "b"};
    d.X.resize(3, 2);
    d.X << 1, 10, 2, 10, 3, 30;
    d.Y = {-1.0, 1.0, 0.0};
    const auto n = normalize(d);
    CHECK(n.X(0, 0) == 0.0);
    CHECK(n.X(2, 0) == 1.0);
    CHECK(n.X(1, 1) == 0.0);
    CHECK(n.Y == std::vector<double>{0.0, 1.0, 0.5});
    d.feature_names.pop_back();
    CHECK_THROWS_AS(normalize(d), DimensionError);
}

TEST_CASE("design files round trip")
{
    const auto p = sample_problem();
    const auto d = sample_initial_design(p, 9);
    const auto stem = scratch("design");
    write_design(d, stem);
    const auto back = read_design(stem);
    CHECK(back.problem_id == d.problem_id);
    CHECK(back.columns == d.columns);
    CHECK(back.seed == d.seed);
    CHECK(back.X == d.X);
    CHECK(back.Y == d.Y);

    NumericDesign nd;
    nd.problem_id = "x";
    nd.feature_names = {"u", "v"};
    nd.X = d.X.leftCols(2);
    nd.Y = d.Y;
    nd.encoding = EncodingTag::target;
    write_numeric_design(nd, scratch("numeric"));
    const auto nback = read_numeric_design(scratch("numeric"));
    CHECK(nback.X == nd.X);
    CHECK(nback.Y == nd.Y);
    CHECK(nback.encoding == EncodingTag::target);
    CHECK(nback.feature_names == nd.feature_names);
    std::filesystem::remove_all(stem.parent_path());
}

TEST_CASE("encoding tags")
{
    for (auto tag : {EncodingTag::raw, EncodingTag::onehot, EncodingTag::target, EncodingTag::shap}) {
        CHECK(parse_encoding_tag(to_string(tag)) == tag);
    }
    CHECK_THROWS(parse_encoding_tag("hash"));
}
