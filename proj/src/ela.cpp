#include "mvela/ela.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "mvela/csv.hpp"
#include "mvela/random.hpp"
#include "mvela/stats.hpp"

namespace mvela {

const std::array<std::string_view, kFeatureCount>& feature_names()
{
    static const std::array<std::string_view, kFeatureCount> names{
        "ela_meta.lin_simple.adj_r2",
        "ela_meta.lin_simple.intercept",
        "ela_meta.lin_simple.coef.min",
        "ela_meta.lin_simple.coef.max",
        "ela_meta.lin_simple.coef.max_by_min",
        "ela_meta.lin_w_interact.adj_r2",
        "ela_meta.quad_simple.adj_r2",
        "ela_meta.quad_simple.cond",
        "ela_meta.quad_w_interact.adj_r2",
        "ela_distr.skewness",
        "ela_distr.kurtosis",
        "ela_distr.number_of_peaks",
        "disp.ratio_mean_02",
        "disp.ratio_mean_05",
        "disp.ratio_mean_10",
        "disp.ratio_mean_25",
        "disp.ratio_median_02",
        "disp.ratio_median_05",
        "disp.ratio_median_10",
        "disp.ratio_median_25",
        "disp.diff_mean_02",
        "disp.diff_mean_05",
        "disp.diff_mean_10",
        "disp.diff_mean_25",
        "disp.diff_median_02",
        "disp.diff_median_05",
        "disp.diff_median_10",
        "disp.diff_median_25",
        "ic.h_max",
        "ic.eps_s",
        "ic.eps_max",
        "ic.eps_ratio",
        "ic.m0",
        "nbc.nn_nb.sd_ratio",
        "nbc.nn_nb.mean_ratio",
        "nbc.nn_nb.cor",
        "nbc.dist_ratio.coeff_var",
        "nbc.nb_fitness.cor",
    };
    return names;
}

bool FeatureVector::all_finite() const
{
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void check_design(const NumericDesign& d, std::size_t min_rows, const char* what)
{
    if (static_cast<std::size_t>(d.X.rows()) != d.Y.size()) {
        throw DimensionError(std::string(what) + ": X and Y row counts differ");
    }
    if (d.rows() < min_rows) {
        throw DataError(std::string(what) + " needs at least " + std::to_string(min_rows) + " rows, got " +
                        std::to_string(d.rows()));
    }
    if (!d.X.allFinite() || !std::all_of(d.Y.begin(), d.Y.end(), [](double v) { return std::isfinite(v); })) {
        throw DataError(std::string(what) + ": design contains non-finite values");
    }
}

// Ratio with the conventions used throughout the feature sets.
double safe_ratio(double num, double den)
{
    if (den == 0.0) {
        return 1.0;
    }
    return num / den;
}

double euclidean(const Matrix& X, Eigen::Index a, Eigen::Index b)
{
    return (X.row(a) - X.row(b)).norm();
}

// Row order by (y, then x lexicographically); makes tie handling independent
// of the order rows are stored in.
std::vector<std::size_t> canonical_order(const NumericDesign& d)
{
    std::vector<std::size_t> order(d.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (d.Y[a] != d.Y[b]) {
            return d.Y[a] < d.Y[b];
        }
        for (Eigen::Index c = 0; c < d.X.cols(); ++c) {
            const double xa = d.X(static_cast<Eigen::Index>(a), c);
            const double xb = d.X(static_cast<Eigen::Index>(b), c);
            if (xa != xb) {
                return xa < xb;
            }
        }
        return false;
    });
    return order;
}

struct LinearFit {
    Eigen::VectorXd coef;
    double adj_r2 = 0.0;
    bool rank_deficient = false;
};

LinearFit fit_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& y)
{
    LinearFit fit;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    fit.coef = cod.solve(y);
    fit.rank_deficient = cod.rank() < A.cols();
    const double n = static_cast<double>(A.rows());
    const double p = static_cast<double>(A.cols() - 1);
    const double ss_res = (y - A * fit.coef).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).square().sum();
    const double r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    fit.adj_r2 = 1.0 - (1.0 - r2) * (n - 1.0) / (n - p - 1.0);
    return fit;
}

Eigen::MatrixXd regressors(const Matrix& X, bool squares, bool interactions)
{
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    Eigen::Index width = 1 + d;
    if (squares) {
        width += d;
    }
    if (interactions) {
        width += d * (d - 1) / 2;
    }
    Eigen::MatrixXd A(n, width);
    A.col(0).setOnes();
    A.middleCols(1, d) = X;
    Eigen::Index c = 1 + d;
    if (squares) {
        for (Eigen::Index j = 0; j < d; ++j) {
            A.col(c++) = X.col(j).array().square();
        }
    }
    if (interactions) {
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i + 1; j < d; ++j) {
                A.col(c++) = X.col(i).array() * X.col(j).array();
            }
        }
    }
    return A;
}

} // namespace

MetaModelFeatures ela_meta(const NumericDesign& d)
{
    const std::size_t dim = d.dimension();
    check_design(d, dim * dim + 2 * dim + 3, "ela_meta");
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(d.Y.data(), static_cast<Eigen::Index>(d.Y.size()));

    const auto lin = fit_least_squares(regressors(d.X, false, false), y);
    const auto lin_inter = fit_least_squares(regressors(d.X, false, true), y);
    const auto quad = fit_least_squares(regressors(d.X, true, false), y);
    const auto quad_inter = fit_least_squares(regressors(d.X, true, true), y);

    const auto d_idx = static_cast<Eigen::Index>(dim);
    const Eigen::ArrayXd slopes = lin.coef.segment(1, d_idx).cwiseAbs().array();
    const Eigen::ArrayXd quad_terms = quad.coef.segment(1 + d_idx, d_idx).cwiseAbs().array();

    MetaModelFeatures out;
    out.values = {lin.adj_r2,
                  lin.coef(0),
                  slopes.minCoeff(),
                  slopes.maxCoeff(),
                  safe_ratio(slopes.maxCoeff(), slopes.minCoeff()),
                  lin_inter.adj_r2,
                  quad.adj_r2,
                  safe_ratio(quad_terms.maxCoeff(), quad_terms.minCoeff()),
                  quad_inter.adj_r2};
    out.rank_deficient = lin.rank_deficient || lin_inter.rank_deficient || quad.rank_deficient ||
                         quad_inter.rank_deficient;
    return out;
}

// ---------------------------------------------------------------------------

KdeCurve gaussian_kde(std::span<const double> y, std::size_t points)
{
    if (y.size() < 2 || points < 3) {
        throw DataError("kernel density estimate needs at least two values and three grid points");
    }
    double spread = stats::sd(y);
    if (spread == 0.0) {
        spread = std::abs(y.front());
    }
    if (spread == 0.0) {
        spread = 1.0;
    }
    KdeCurve curve;
    // Silverman's normal reference rule.
    curve.bandwidth = 1.06 * spread * std::pow(static_cast<double>(y.size()), -0.2);

    const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    curve.grid.resize(points);
    curve.density.assign(points, 0.0);
    const double norm = 1.0 / (static_cast<double>(y.size()) * curve.bandwidth * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t g = 0; g < points; ++g) {
        const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(points - 1);
        curve.grid[g] = x;
        double sum = 0.0;
        for (double v : y) {
            const double z = (x - v) / curve.bandwidth;
            sum += std::exp(-0.5 * z * z);
        }
        curve.density[g] = sum * norm;
    }
    return curve;
}

std::size_t count_strict_peaks(std::span<const double> density)
{
    std::size_t peaks = 0;
    for (std::size_t i = 1; i + 1 < density.size(); ++i) {
        if (density[i] > density[i - 1] && density[i] > density[i + 1]) {
            ++peaks;
        }
    }
    return peaks;
}

std::array<double, kDistributionFeatureCount> ela_distribution(const NumericDesign& d)
{
    check_design(d, 4, "ela_distribution");
    const double n = static_cast<double>(d.rows());
    const double mean = stats::mean(d.Y);
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double y : d.Y) {
        const double c = y - mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 == 0.0) {
        return {0.0, 0.0, 1.0};
    }
    const double skewness = m3 / std::pow(m2, 1.5);
    const double kurtosis = m4 / (m2 * m2) - 3.0;
    const auto kde = gaussian_kde(d.Y);
    return {skewness, kurtosis, static_cast<double>(std::max<std::size_t>(1, count_strict_peaks(kde.density)))};
}

// ---------------------------------------------------------------------------

namespace {

struct DistanceSummary {
    double mean = 0.0;
    double median = 0.0;
};

DistanceSummary pairwise_summary(const Matrix& X, std::span<const std::size_t> rows)
{
    std::vector<double> dist;
    dist.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            dist.push_back(euclidean(X, static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(rows[j])));
        }
    }
    DistanceSummary s;
    s.mean = stats::mean(dist);
    s.median = stats::median(std::move(dist));
    return s;
}

} // namespace

std::vector<double> dispersion(const NumericDesign& d, std::span<const double> quantiles)
{
    check_design(d, 2, "dispersion");
    const std::size_t n = d.rows();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto full = pairwise_summary(d.X, all);
    const auto order = canonical_order(d);

    const std::size_t k = quantiles.size();
    std::vector<double> out(4 * k);
    for (std::size_t qi = 0; qi < k; ++qi) {
        const double q = quantiles[qi];
        if (!(q > 0.0 && q <= 1.0)) {
            throw DataError("dispersion quantile must lie in (0, 1]");
        }
        auto size = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
        size = std::clamp<std::size_t>(size, 2, n);
        std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
        std::sort(subset.begin(), subset.end());
        const auto sub = pairwise_summary(d.X, subset);
        out[qi] = safe_ratio(sub.mean, full.mean);
        out[k + qi] = safe_ratio(sub.median, full.median);
        out[2 * k + qi] = sub.mean - full.mean;
        out[3 * k + qi] = sub.median - full.median;
    }
    return out;
}

// ---------------------------------------------------------------------------

double ic_entropy(std::span<const int> symbols)
{
    if (symbols.size() < 2) {
        return 0.0;
    }
    // counts[a+1][b+1] of consecutive pairs (a, b)
    std::array<std::array<double, 3>, 3> counts{};
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        counts[static_cast<std::size_t>(symbols[i] + 1)][static_cast<std::size_t>(symbols[i + 1] + 1)] += 1.0;
    }
    const double total = static_cast<double>(symbols.size() - 1);
    const double log6 = std::log(6.0);
    double h = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            if (a == b || counts[a][b] == 0.0) {
                continue;
            }
            const double p = counts[a][b] / total;
            h -= p * std::log(p) / log6;
        }
    }
    return h;
}

double ic_partial_information(std::span<const int> symbols)
{
    if (symbols.empty()) {
        return 0.0;
    }
    std::size_t changes = 0;
    int previous = 0;
    for (int s : symbols) {
        if (s != 0 && s != previous) {
            ++changes;
            previous = s;
        }
    }
    return static_cast<double>(changes) / static_cast<double>(symbols.size());
}

std::vector<std::size_t> nearest_neighbour_tour(const Matrix& X, std::uint64_t seed)
{
    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> tour;
    if (n == 0) {
        return tour;
    }
    Rng rng(seed);
    std::size_t current = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::vector<bool> visited(n, false);
    tour.reserve(n);
    tour.push_back(current);
    visited[current] = true;
    for (std::size_t step = 1; step < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (visited[j]) {
                continue;
            }
            const double dist = (X.row(static_cast<Eigen::Index>(current)) - X.row(static_cast<Eigen::Index>(j))).squaredNorm();
            if (dist < best) {
                best = dist;
                next = j;
            }
        }
        visited[next] = true;
        tour.push_back(next);
        current = next;
    }
    return tour;
}

std::array<double, kInformationContentFeatureCount> information_content(const NumericDesign& d, std::uint64_t seed,
                                                                        const InformationContentParams& params)
{
    check_design(d, 3, "information_content");
    const auto tour = nearest_neighbour_tour(d.X, seed);
    std::vector<double> slopes;
    slopes.reserve(tour.size());
    for (std::size_t i = 0; i + 1 < tour.size(); ++i) {
        const double dist =
            euclidean(d.X, static_cast<Eigen::Index>(tour[i]), static_cast<Eigen::Index>(tour[i + 1]));
        if (dist == 0.0) {
            continue;
        }
        slopes.push_back((d.Y[tour[i + 1]] - d.Y[tour[i]]) / dist);
    }

    double scale = 0.0;
    for (double s : slopes) {
        scale = std::max(scale, std::abs(s));
    }
    if (scale == 0.0) {
        scale = 1.0;
    }

    std::vector<int> symbols(slopes.size());
    auto evaluate = [&](double eps) {
        for (std::size_t i = 0; i < slopes.size(); ++i) {
            symbols[i] = slopes[i] < -eps ? -1 : (slopes[i] > eps ? 1 : 0);
        }
        return std::pair{ic_entropy(symbols), ic_partial_information(symbols)};
    };

    const auto [h0, m0] = evaluate(0.0);
    double h_max = h0;
    double eps_at_h_max = std::numeric_limits<double>::quiet_NaN();
    double h_max_positive = -1.0;
    double eps_s = std::numeric_limits<double>::quiet_NaN();
    double eps_ratio = std::numeric_limits<double>::quiet_NaN();
    double last_log = 0.0;
    const std::size_t g = params.grid_points;
    for (std::size_t k = 0; k < g; ++k) {
        const double log_eps = params.log10_eps_low + (params.log10_eps_high - params.log10_eps_low) *
                                                          static_cast<double>(k) / static_cast<double>(g - 1);
        const double log_scaled = log_eps + std::log10(scale);
        last_log = log_scaled;
        const auto [h, m] = evaluate(scale * std::pow(10.0, log_eps));
        h_max = std::max(h_max, h);
        if (h > h_max_positive) {
            h_max_positive = h;
            eps_at_h_max = log_scaled;
        }
        if (std::isnan(eps_s) && h < params.settling_sensitivity) {
            eps_s = log_scaled;
        }
        if (std::isnan(eps_ratio) && m < params.info_sensitivity * m0) {
            eps_ratio = log_scaled;
        }
    }
    // Thresholds never crossed on the grid (e.g. constant y) report the top of the grid.
    if (std::isnan(eps_s)) {
        eps_s = last_log;
    }
    if (std::isnan(eps_ratio)) {
        eps_ratio = last_log;
    }
    return {h_max, eps_s, eps_at_h_max, eps_ratio, m0};
}

// ---------------------------------------------------------------------------

NearestBetterDistances nearest_better_distances(const NumericDesign& d)
{
    check_design(d, 2, "nearest_better_distances");
    const std::size_t n = d.rows();
    const auto order = canonical_order(d);
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        rank[order[i]] = i;
    }

    NearestBetterDistances out;
    out.nn.assign(n, std::numeric_limits<double>::infinity());
    out.nb.assign(n, std::numeric_limits<double>::infinity());
    out.nb_index.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            const double dist = euclidean(d.X, static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            out.nn[i] = std::min(out.nn[i], dist);
            if (d.Y[j] < d.Y[i]) {
                const bool closer = dist < out.nb[i];
                const bool tie_better_rank = dist == out.nb[i] && out.nb_index[i] >= 0 &&
                                             rank[j] < rank[static_cast<std::size_t>(out.nb_index[i])];
                if (closer || tie_better_rank) {
                    out.nb[i] = dist;
                    out.nb_index[i] = static_cast<std::ptrdiff_t>(j);
                }
            }
        }
    }
    double max_nb = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.nb_index[i] >= 0) {
            max_nb = std::max(max_nb, out.nb[i]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (out.nb_index[i] < 0) {
            out.nb[i] = max_nb;
        }
    }
    return out;
}

std::array<double, kNbcFeatureCount> nearest_better_clustering(const NumericDesign& d)
{
    check_design(d, 3, "nearest_better_clustering");
    const auto dist = nearest_better_distances(d);
    if (std::none_of(dist.nb_index.begin(), dist.nb_index.end(), [](std::ptrdiff_t j) { return j >= 0; })) {
        return {1.0, 1.0, 0.0, 0.0, 0.0};
    }
    const std::size_t n = d.rows();

    std::vector<double> ratio;
    ratio.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (dist.nn[i] > 0.0) {
            ratio.push_back(dist.nb[i] / dist.nn[i]);
        }
    }
    double coeff_var = 0.0;
    if (ratio.size() >= 2) {
        coeff_var = safe_ratio(stats::sd(ratio), stats::mean(ratio));
    }

    std::vector<double> indegree(n, 0.0);
    for (auto j : dist.nb_index) {
        if (j >= 0) {
            indegree[static_cast<std::size_t>(j)] += 1.0;
        }
    }
    return {safe_ratio(stats::sd(dist.nn), stats::sd(dist.nb)), safe_ratio(stats::mean(dist.nn), stats::mean(dist.nb)),
            stats::pearson(dist.nn, dist.nb), coeff_var, stats::pearson(indegree, d.Y)};
}

// ---------------------------------------------------------------------------

FeatureVector compute_feature_vector(const NumericDesign& d, std::uint64_t seed, std::size_t repetition)
{
    FeatureVector fv;
    fv.problem_id = d.problem_id;
    fv.repetition = repetition;
    fv.encoding = d.encoding;

    auto out = fv.values.begin();
    const auto meta = ela_meta(d);
    fv.rank_deficient = meta.rank_deficient;
    out = std::copy(meta.values.begin(), meta.values.end(), out);
    const auto distr = ela_distribution(d);
    out = std::copy(distr.begin(), distr.end(), out);
    const auto disp = dispersion(d);
    out = std::copy(disp.begin(), disp.end(), out);
    const auto ic = information_content(d, seed);
    out = std::copy(ic.begin(), ic.end(), out);
    const auto nbc = nearest_better_clustering(d);
    std::copy(nbc.begin(), nbc.end(), out);
    return fv;
}

void write_feature_table(const std::vector<FeatureVector>& rows, const std::filesystem::path& path)
{
    csv::Table table;
    table.header = {"problem_id", "repetition", "encoding"};
    for (auto name : feature_names()) {
        table.header.emplace_back(name);
    }
    for (const auto& fv : rows) {
        csv::Row row{fv.problem_id, std::to_string(fv.repetition), std::string(to_string(fv.encoding))};
        for (double v : fv.values) {
            row.push_back(csv::format_double(v));
        }
        table.rows.push_back(std::move(row));
    }
    csv::write(path, table);
}

std::vector<FeatureVector> read_feature_table(const std::filesystem::path& path)
{
    const auto table = csv::read(path);
    if (table.header.size() != 3 + kFeatureCount) {
        throw DataError("feature table " + path.string() + " has the wrong number of columns");
    }
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (table.header[3 + i] != feature_names()[i]) {
            throw DataError("feature table " + path.string() + " has unexpected column '" + table.header[3 + i] + "'");
        }
    }
    std::vector<FeatureVector> out;
    for (const auto& row : table.rows) {
        FeatureVector fv;
        fv.problem_id = row[0];
        fv.repetition = static_cast<std::size_t>(std::stoull(row[1]));
        fv.encoding = parse_encoding_tag(row[2]);
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            fv.values[i] = csv::parse_double(row[3 + i]);
        }
        out.push_back(std::move(fv));
    }
    return out;
}

} // namespace mvela
