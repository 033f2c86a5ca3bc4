#include "mvela/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mvela/parallel.hpp"
#include "mvela/random.hpp"

namespace mvela {

void EncoderConfig::validate() const
{
    if (!(te_weight >= 0.0) || !std::isfinite(te_weight)) {
        throw ConfigError("target-encoding weight m must be a finite non-negative number");
    }
    if (shap_n_permutations < 1) {
        throw ConfigError("shap_n_permutations must be at least 1");
    }
    if (shap_background_cap < 1) {
        throw ConfigError("shap_background_cap must be at least 1");
    }
    shap_forest.validate();
}

nlohmann::json EncoderConfig::to_json() const
{
    return {{"te_weight", te_weight},
            {"shap_n_permutations", shap_n_permutations},
            {"shap_background_cap", shap_background_cap},
            {"shap_forest", shap_forest.to_json()},
            {"seed", seed}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j)
{
    EncoderConfig c;
    c.te_weight = j.value("te_weight", c.te_weight);
    c.shap_n_permutations = j.value("shap_n_permutations", c.shap_n_permutations);
    c.shap_background_cap = j.value("shap_background_cap", c.shap_background_cap);
    if (j.contains("shap_forest")) {
        c.shap_forest = ForestParams::from_json(j.at("shap_forest"));
    }
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

NumericDesign surrogate_input(const Design& design)
{
    NumericDesign out;
    out.problem_id = design.problem_id;
    for (const auto& c : design.columns) {
        out.feature_names.push_back(c.name);
    }
    out.X = design.X;
    out.Y = design.Y;
    out.encoding = EncodingTag::raw;
    return out;
}

NumericDesign one_hot_encode(const Design& design)
{
    NumericDesign out;
    out.problem_id = design.problem_id;
    out.Y = design.Y;
    out.encoding = EncodingTag::onehot;

    std::size_t width = 0;
    for (const auto& c : design.columns) {
        width += c.kind == VariableKind::categorical ? c.categories.size() : 1;
    }
    const auto n = static_cast<Eigen::Index>(design.rows());
    out.X = Matrix::Zero(n, static_cast<Eigen::Index>(width));

    Eigen::Index target = 0;
    for (std::size_t c = 0; c < design.dimension(); ++c) {
        const auto& col = design.columns[c];
        const auto src = static_cast<Eigen::Index>(c);
        if (col.kind != VariableKind::categorical) {
            out.feature_names.push_back(col.name);
            out.X.col(target) = design.X.col(src);
            ++target;
            continue;
        }
        for (const auto& level : col.categories) {
            out.feature_names.push_back(col.name + "=" + level);
        }
        for (Eigen::Index r = 0; r < n; ++r) {
            out.X(r, target + static_cast<Eigen::Index>(design.X(r, src))) = 1.0;
        }
        target += static_cast<Eigen::Index>(col.categories.size());
    }
    return out;
}

std::vector<std::vector<double>> target_encoding_levels(const Design& design, double m)
{
    if (!(m >= 0.0)) {
        throw ConfigError("target-encoding weight m must be non-negative");
    }
    if (design.rows() == 0) {
        throw DataError("cannot target-encode an empty design");
    }
    const double global_mean =
        std::accumulate(design.Y.begin(), design.Y.end(), 0.0) / static_cast<double>(design.rows());
    std::vector<std::vector<double>> levels(design.dimension());
    for (std::size_t c = 0; c < design.dimension(); ++c) {
        const auto& col = design.columns[c];
        if (col.kind != VariableKind::categorical) {
            continue;
        }
        std::vector<double> sums(col.categories.size(), 0.0);
        std::vector<double> counts(col.categories.size(), 0.0);
        for (std::size_t r = 0; r < design.rows(); ++r) {
            const auto level = static_cast<std::size_t>(design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            sums[level] += design.Y[r];
            counts[level] += 1.0;
        }
        auto& values = levels[c];
        values.assign(col.categories.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t l = 0; l < values.size(); ++l) {
            if (counts[l] == 0.0) {
                continue;
            }
            const double level_mean = sums[l] / counts[l];
            const double lambda = counts[l] / (counts[l] + m);
            const double blended = lambda * level_mean + (1.0 - lambda) * global_mean;
            values[l] = std::clamp(blended, std::min(level_mean, global_mean), std::max(level_mean, global_mean));
        }
    }
    return levels;
}

NumericDesign target_encode(const Design& design, double m)
{
    const auto levels = target_encoding_levels(design, m);
    NumericDesign out = surrogate_input(design);
    out.encoding = EncodingTag::target;
    for (std::size_t c = 0; c < design.dimension(); ++c) {
        if (design.columns[c].kind != VariableKind::categorical) {
            continue;
        }
        const auto col = static_cast<Eigen::Index>(c);
        for (Eigen::Index r = 0; r < out.X.rows(); ++r) {
            out.X(r, col) = levels[c][static_cast<std::size_t>(design.X(r, col))];
        }
    }
    return out;
}

namespace {

Matrix background_rows(const Matrix& X, std::size_t cap, std::uint64_t seed)
{
    const auto n = static_cast<std::size_t>(X.rows());
    if (n <= cap) {
        return X;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < cap; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    Matrix out(static_cast<Eigen::Index>(cap), X.cols());
    for (std::size_t i = 0; i < cap; ++i) {
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
}

} // namespace

ShapEncoding shap_encode_detailed(const Design& design, const EncoderConfig& config)
{
    config.validate();
    if (design.rows() == 0) {
        throw DataError("cannot SHAP-encode an empty design");
    }
    ShapEncoding out;
    out.design = surrogate_input(design);
    out.design.encoding = EncodingTag::shap;
    if (!design.has_categorical()) {
        return out;
    }

    ForestParams params = config.shap_forest;
    params.seed = derive_seed(config.seed, 1, config.shap_forest.seed);
    params.jobs = config.jobs;
    out.surrogate = fit_regression(design.X, design.Y, params);

    const Matrix background = background_rows(design.X, config.shap_background_cap, derive_seed(config.seed, 2));
    const std::size_t n = design.rows();
    const std::size_t dim = design.dimension();
    out.attributions.resize(n);
    parallel_for(n, config.jobs, [&](std::size_t r) {
        const auto x = row_span(design.X, static_cast<Eigen::Index>(r));
        ForestInterventionalValue value(out.surrogate, x, background);
        out.attributions[r] =
            permutation_shapley(std::cref(value), dim, config.shap_n_permutations, derive_seed(config.seed, 3, r));
    });

    for (std::size_t c = 0; c < dim; ++c) {
        if (design.columns[c].kind != VariableKind::categorical) {
            continue;
        }
        for (std::size_t r = 0; r < n; ++r) {
            out.design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = out.attributions[r].phi[c];
        }
    }
    return out;
}

NumericDesign shap_encode(const Design& design, const EncoderConfig& config)
{
    return shap_encode_detailed(design, config).design;
}

NumericDesign encode(const Design& design, EncodingTag tag, const EncoderConfig& config)
{
    switch (tag) {
    case EncodingTag::raw:
        return surrogate_input(design);
    case EncodingTag::onehot:
        return one_hot_encode(design);
    case EncodingTag::target:
        return target_encode(design, config.te_weight);
    case EncodingTag::shap:
        return shap_encode(design, config);
    }
    throw ConfigError("unknown encoding");
}

} // namespace mvela
