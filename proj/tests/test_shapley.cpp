#include <doctest.h>

#include <cmath>
#include <random>

#include "mvela/random.hpp"
#include "mvela/shapley.hpp"

using namespace mvela;

namespace {

Matrix uniform_matrix(std::size_t n, std::size_t d, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) {
            X(r, c) = u(rng);
        }
    }
    return X;
}

double g(std::size_t i, double v)
{
    return static_cast<double>(i + 1) * v * v + std::sin(v * static_cast<double>(i));
}

} // namespace

TEST_CASE("two player game by hand")
{
    // v({}) = 0, v({0}) = 1, v({1}) = 2, v({0, 1}) = 5
    CoalitionValueFn v = [](const CoalitionMask& m) {
        const double table[4] = {0.0, 1.0, 2.0, 5.0};
        return table[(m.contains(0) ? 1 : 0) + (m.contains(1) ? 2 : 0)];
    };
    const auto a = exact_shapley(v, 2);
    CHECK(a.base_value == 0.0);
    CHECK(a.full_value == 5.0);
    CHECK(std::abs(a.phi[0] - 2.0) < 1e-12);
    CHECK(std::abs(a.phi[1] - 3.0) < 1e-12);
    // Two players: one permutation and its reverse cover both orders.
    const auto p = permutation_shapley(v, 2, 1, 4);
    CHECK(std::abs(p.phi[0] - 2.0) < 1e-12);
    CHECK(std::abs(p.phi[1] - 3.0) < 1e-12);
}

TEST_CASE("symmetry, dummy and efficiency")
{
    // Players 0 and 1 are interchangeable, player 2 never contributes.
    CoalitionValueFn v = [](const CoalitionMask& m) {
        const double k = (m.contains(0) ? 1.0 : 0.0) + (m.contains(1) ? 1.0 : 0.0);
        return k * k + (m.contains(3) ? 0.5 : 0.0) * k;
    };
    const auto a = exact_shapley(v, 4);
    CHECK(std::abs(a.phi[0] - a.phi[1]) < 1e-12);
    CHECK(std::abs(a.phi[2]) < 1e-12);
    CHECK(a.efficiency_gap() < 1e-12);
}

TEST_CASE("coalition masks")
{
    const auto m = CoalitionMask::from_bits(4, 0b1010);
    CHECK_FALSE(m.contains(0));
    CHECK(m.contains(1));
    CHECK(m.contains(3));
    CHECK(m.count() == 2);
    CoalitionMask full(3, true);
    CHECK(full.count() == 3);
}

TEST_CASE("additive models are attributed exactly")
{
    for (std::size_t M = 1; M <= 6; ++M) {
        const auto background = uniform_matrix(12, M, M);
        const auto xs = uniform_matrix(3, M, 100 + M);
        PredictFn model = [](std::span<const double> x) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                s += g(i, x[i]);
            }
            return s;
        };
        for (Eigen::Index r = 0; r < xs.rows(); ++r) {
            const auto x = row_span(xs, r);
            const auto exact = exact_shapley(model, x, background);
            const auto sampled = permutation_shapley(model, x, background, 1, 7 + static_cast<std::uint64_t>(r));
            for (std::size_t i = 0; i < M; ++i) {
                double mean_g = 0.0;
                for (Eigen::Index b = 0; b < background.rows(); ++b) {
                    mean_g += g(i, background(b, static_cast<Eigen::Index>(i)));
                }
                mean_g /= static_cast<double>(background.rows());
                CHECK(std::abs(exact.phi[i] - (g(i, x[i]) - mean_g)) < 1e-12);
                CHECK(std::abs(sampled.phi[i] - exact.phi[i]) < 1e-12);
            }
            CHECK(std::abs(exact.full_value - model(x)) < 1e-12);
        }
    }
}

TEST_CASE("forest value function matches the generic one")
{
    const auto X = uniform_matrix(60, 4, 21);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        y[i] = X(r, 0) * X(r, 1) + X(r, 2);
    }
    auto p = ForestParams::regression_defaults(2);
    p.n_trees = 8;
    const auto forest = fit_regression(X, y, p);
    const auto background = X.topRows(15);
    const Matrix bg = background;
    const auto x = row_span(X, 30);
    ForestInterventionalValue fast(forest, x, bg);
    InterventionalValue slow([&](std::span<const double> z) { return forest.predict(z); }, x, bg);
    for (std::uint64_t bits = 0; bits < 16; ++bits) {
        const auto m = CoalitionMask::from_bits(4, bits);
        CHECK(std::abs(fast(m) - slow(m)) < 1e-12);
    }
}

TEST_CASE("permutation estimate converges for a forest")
{
    const auto X = uniform_matrix(100, 5, 31);
    std::vector<double> y(100);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        y[i] = X(r, 0) * X(r, 1) + std::abs(X(r, 2)) - X(r, 3) * X(r, 4);
    }
    auto p = ForestParams::regression_defaults(5);
    p.n_trees = 10;
    const auto forest = fit_regression(X, y, p);
    const Matrix bg = X.topRows(25);
    const auto x = row_span(X, 50);
    ForestInterventionalValue value(forest, x, bg);
    const auto exact = exact_shapley(std::cref(value), 5);
    const auto sampled = permutation_shapley(std::cref(value), 5, 3000, 3);
    CHECK(sampled.efficiency_gap() < 1e-9);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(sampled.phi[i] - exact.phi[i]) <= std::max(0.05 * std::abs(exact.phi[i]), 1e-3));
    }
}

TEST_CASE("antithetic pairs are exact for quadratic games")
{
    // Forward and reversed walks of one order already average to the exact value.
    CoalitionValueFn v = [](const CoalitionMask& m) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            s += m.contains(i) ? static_cast<double>(i + 1) : 0.0;
        }
        return s * s;
    };
    const auto exact = exact_shapley(v, 5);
    const auto sampled = permutation_shapley(v, 5, 1, 9);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(sampled.phi[i] - exact.phi[i]) < 1e-12);
    }
}

TEST_CASE("permutation sampling is seeded")
{
    CoalitionValueFn v = [](const CoalitionMask& m) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            s += m.contains(i) ? static_cast<double>(i) : 0.0;
        }
        return s * s * s;
    };
    const auto a = permutation_shapley(v, 6, 3, 1);
    const auto b = permutation_shapley(v, 6, 3, 1);
    const auto c = permutation_shapley(v, 6, 3, 2);
    CHECK(a.phi == b.phi);
    CHECK(a.phi != c.phi);
    CHECK(a.efficiency_gap() < 1e-9);
}

TEST_CASE("enumeration limit")
{
    CoalitionValueFn v = [](const CoalitionMask&) { return 0.0; };
    CHECK_THROWS_AS(exact_shapley(v, kExactShapleyMaxFeatures + 1), CapabilityError);
}
