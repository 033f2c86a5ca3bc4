#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mvela/encoding.hpp"

using namespace mvela;

namespace {

// One categorical column (levels a, b, c) and one continuous column.
Design hand_design(std::vector<double> levels, std::vector<double> y)
{
    Design d;
    d.problem_id = "hand";
    d.columns = {{"k", VariableKind::categorical, {"a", "b", "c"}}, {"x", VariableKind::continuous, {}}};
    d.X.resize(static_cast<Eigen::Index>(levels.size()), 2);
    for (std::size_t r = 0; r < levels.size(); ++r) {
        d.X(static_cast<Eigen::Index>(r), 0) = levels[r];
        d.X(static_cast<Eigen::Index>(r), 1) = 0.1 * static_cast<double>(r);
    }
    d.Y = std::move(y);
    return d;
}

Design synthetic_design(std::uint64_t seed)
{
    SuiteConfig cfg;
    cfg.templates = {{2, 1, 2, 3, false, 1}};
    return sample_initial_design(generate_synthetic_suite(cfg, seed).front(), seed, 20);
}

} // namespace

TEST_CASE("target encoding by hand")
{
    // Two rows: level a -> 0, level b -> 1; global mean 0.5.
    const auto d = hand_design({0, 1}, {0.0, 1.0});
    const auto m10 = target_encoding_levels(d, 10.0);
    CHECK(std::abs(m10[0][0] - 5.0 / 11.0) < 1e-12);
    CHECK(std::abs(m10[0][1] - 6.0 / 11.0) < 1e-12);
    CHECK(std::isnan(m10[0][2]));
    CHECK(m10[1].empty());
    const auto m0 = target_encoding_levels(d, 0.0);
    CHECK(std::abs(m0[0][0] - 0.0) < 1e-12);
    CHECK(std::abs(m0[0][1] - 1.0) < 1e-12);

    // a: {1, 3}, b: {8}, c: {0, 0, 0}; global mean 12 / 6 = 2.
    const auto e = hand_design({0, 0, 1, 2, 2, 2}, {1.0, 3.0, 8.0, 0.0, 0.0, 0.0});
    const auto lv = target_encoding_levels(e, 10.0);
    CHECK(std::abs(lv[0][0] - 2.0) < 1e-12);
    CHECK(std::abs(lv[0][1] - (8.0 / 11.0 + 20.0 / 11.0)) < 1e-12);
    CHECK(std::abs(lv[0][2] - (0.0 * 3.0 / 13.0 + 2.0 * 10.0 / 13.0)) < 1e-12);

    const auto enc = target_encode(e, 10.0);
    CHECK(enc.encoding == EncodingTag::target);
    CHECK(std::abs(enc.X(2, 0) - 28.0 / 11.0) < 1e-12);
    CHECK(enc.X(2, 1) == e.X(2, 1));
    CHECK_THROWS_AS(target_encoding_levels(e, -1.0), ConfigError);
}

TEST_CASE("target-encoded levels lie between category and global mean")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto d = synthetic_design(seed);
        const double global = std::accumulate(d.Y.begin(), d.Y.end(), 0.0) / static_cast<double>(d.rows());
        for (double m : {0.0, 1.0, 10.0, 100.0}) {
            const auto levels = target_encoding_levels(d, m);
            for (std::size_t c = 0; c < d.dimension(); ++c) {
                if (d.columns[c].kind != VariableKind::categorical) {
                    continue;
                }
                for (std::size_t l = 0; l < levels[c].size(); ++l) {
                    double sum = 0.0;
                    double n = 0.0;
                    for (std::size_t r = 0; r < d.rows(); ++r) {
                        if (d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == static_cast<double>(l)) {
                            sum += d.Y[r];
                            n += 1.0;
                        }
                    }
                    if (n == 0.0) {
                        continue;
                    }
                    const double cat = sum / n;
                    CHECK(levels[c][l] >= std::min(cat, global));
                    CHECK(levels[c][l] <= std::max(cat, global));
                }
            }
        }
    }
}

TEST_CASE("one-hot encoding")
{
    const auto d = hand_design({0, 2, 1}, {1.0, 2.0, 3.0});
    const auto oh = one_hot_encode(d);
    REQUIRE(oh.dimension() == 4);
    CHECK(oh.feature_names[0] == "k=a");
    CHECK(oh.feature_names[2] == "k=c");
    CHECK(oh.X(1, 2) == 1.0);
    CHECK(oh.X(1, 0) == 0.0);
    for (Eigen::Index r = 0; r < 3; ++r) {
        CHECK(oh.X(r, 0) + oh.X(r, 1) + oh.X(r, 2) == 1.0);
    }
}

TEST_CASE("SHAP encoding")
{
    const auto d = synthetic_design(3);
    EncoderConfig cfg;
    cfg.shap_n_permutations = 3;
    cfg.shap_background_cap = 20;
    cfg.shap_forest.n_trees = 15;
    cfg.seed = 17;
    const auto enc = shap_encode_detailed(d, cfg);
    REQUIRE(enc.attributions.size() == d.rows());
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto& a = enc.attributions[r];
        CHECK(a.efficiency_gap() < 1e-9);
        const auto x = row_span(d.X, static_cast<Eigen::Index>(r));
        CHECK(std::abs(a.full_value - enc.surrogate.predict(x)) < 1e-9);
        for (std::size_t c = 0; c < d.dimension(); ++c) {
            const double expected = d.columns[c].kind == VariableKind::categorical ? a.phi[c] : x[c];
            CHECK(enc.design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) == expected);
        }
    }

    auto threaded = cfg;
    threaded.jobs = 3;
    CHECK(shap_encode(d, threaded).X == enc.design.X);
    auto reseeded = cfg;
    reseeded.seed = 18;
    CHECK(shap_encode(d, reseeded).X != enc.design.X);
}

TEST_CASE("encoder config json")
{
    EncoderConfig cfg;
    cfg.te_weight = 3.0;
    cfg.shap_n_permutations = 7;
    const auto back = EncoderConfig::from_json(cfg.to_json());
    CHECK(back.te_weight == 3.0);
    CHECK(back.shap_n_permutations == 7);
    CHECK(back.to_json() == cfg.to_json());
}
