#ifndef MVELA_ELA_HPP
#define MVELA_ELA_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvela/design.hpp"

namespace mvela {

inline constexpr std::size_t kMetaFeatureCount = 9;
inline constexpr std::size_t kDistributionFeatureCount = 3;
inline constexpr std::size_t kDispersionFeatureCount = 16;
inline constexpr std::size_t kInformationContentFeatureCount = 5;
inline constexpr std::size_t kNbcFeatureCount = 5;
inline constexpr std::size_t kFeatureCount = kMetaFeatureCount + kDistributionFeatureCount + kDispersionFeatureCount +
                                             kInformationContentFeatureCount + kNbcFeatureCount;

const std::array<std::string_view, kFeatureCount>& feature_names();

struct FeatureVector {
    std::string problem_id;
    std::size_t repetition = 0;
    EncodingTag encoding = EncodingTag::raw;
    std::array<double, kFeatureCount> values{};
    // Some meta-model fit was rank deficient and used the minimum-norm solution.
    bool rank_deficient = false;

    bool all_finite() const;
};

// Meta model ----------------------------------------------------------------

struct MetaModelFeatures {
    // lin_simple.adj_r2, lin_simple.intercept, lin_simple.coef.min,
    // lin_simple.coef.max, lin_simple.coef.max_by_min, lin_w_interact.adj_r2,
    // quad_simple.adj_r2, quad_simple.cond, quad_w_interact.adj_r2
    std::array<double, kMetaFeatureCount> values{};
    bool rank_deficient = false;
};

// Least-squares fits of linear / linear+interactions / quadratic /
// quadratic+interactions models. Requires n > D^2 + 2D + 2.
MetaModelFeatures ela_meta(const NumericDesign& d);

// y-distribution --------------------------------------------------------------

// Skewness (biased), excess kurtosis, number of strict local maxima of a
// Gaussian KDE (Silverman normal reference bandwidth) on a 512-point grid spanning the range of the values.
std::array<double, kDistributionFeatureCount> ela_distribution(const NumericDesign& d);

// Density of a Gaussian KDE of `y` on the grid used by ela_distribution.
struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
};
KdeCurve gaussian_kde(std::span<const double> y, std::size_t points = 512);
std::size_t count_strict_peaks(std::span<const double> density);

// Dispersion ----------------------------------------------------------------

inline constexpr std::array<double, 4> kDispersionQuantiles{0.02, 0.05, 0.10, 0.25};

// Ratio and difference of the mean and median pairwise distance among the
// ceil(q n) best points against the whole sample, for every q. Output order:
// ratio_mean(q...), ratio_median(q...), diff_mean(q...), diff_median(q...).
std::vector<double> dispersion(const NumericDesign& d, std::span<const double> quantiles = kDispersionQuantiles);

// Information content -------------------------------------------------------

struct InformationContentParams {
    double settling_sensitivity = 0.05;
    double info_sensitivity = 0.5;
    std::size_t grid_points = 1000;
    double log10_eps_low = -5.0;
    double log10_eps_high = 15.0;
};

// Entropy and partial information of a symbol sequence (symbols in {-1, 0, 1}).
double ic_entropy(std::span<const int> symbols);
double ic_partial_information(std::span<const int> symbols);

// Walk visiting the design points by repeated nearest-unvisited-neighbour
// steps from a seeded start; returns the visiting order.
std::vector<std::size_t> nearest_neighbour_tour(const Matrix& X, std::uint64_t seed);

// h_max, eps_s, eps_max, eps_ratio, m0
std::array<double, kInformationContentFeatureCount> information_content(const NumericDesign& d, std::uint64_t seed,
                                                                        const InformationContentParams& params = {});

// Nearest-better clustering ---------------------------------------------------

struct NearestBetterDistances {
    std::vector<double> nn;
    std::vector<double> nb;
    // Index of the nearest better point, or -1 for the best point(s).
    std::vector<std::ptrdiff_t> nb_index;
};

NearestBetterDistances nearest_better_distances(const NumericDesign& d);

// sd(nn)/sd(nb), mean(nn)/mean(nb), cor(nn, nb), coefficient of variation of
// nb/nn, cor(indegree, y). Undefined ratios are reported as 1 and undefined
// correlations as 0; with all y equal the vector is (1, 1, 0, 0, 0).
std::array<double, kNbcFeatureCount> nearest_better_clustering(const NumericDesign& d);

// All 38 features in fixed order (meta, distribution, dispersion, information
// content, nearest-better clustering).
FeatureVector compute_feature_vector(const NumericDesign& d, std::uint64_t seed, std::size_t repetition = 0);

void write_feature_table(const std::vector<FeatureVector>& rows, const std::filesystem::path& path);
std::vector<FeatureVector> read_feature_table(const std::filesystem::path& path);

} // namespace mvela

#endif
