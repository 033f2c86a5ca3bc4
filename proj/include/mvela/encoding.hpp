#ifndef MVELA_ENCODING_HPP
#define MVELA_ENCODING_HPP

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "mvela/design.hpp"
#include "mvela/forest.hpp"
#include "mvela/shapley.hpp"

namespace mvela {

struct EncoderConfig {
    // m in lambda = n_j / (n_j + m).
    double te_weight = 10.0;
    std::size_t shap_n_permutations = 10;
    std::size_t shap_background_cap = 100;
    ForestParams shap_forest = ForestParams::regression_defaults();
    std::uint64_t seed = 0;
    // Worker threads for per-row attribution; results do not depend on it.
    std::size_t jobs = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
};

// Categorical cells as level indices, numeric cells unchanged.
NumericDesign surrogate_input(const Design& design);

// Each categorical column with k levels becomes k indicator columns named
// "<column>=<level>".
NumericDesign one_hot_encode(const Design& design);

// Per categorical column, the value substituted for each level (NaN for levels
// that never occur in the design).
std::vector<std::vector<double>> target_encoding_levels(const Design& design, double m);

// Every occurrence of level j becomes lambda * mean(Y_j) + (1 - lambda) * mean(Y).
NumericDesign target_encode(const Design& design, double m);

struct ShapEncoding {
    NumericDesign design;
    // One attribution over all D features per row.
    std::vector<ShapleyAttribution> attributions;
    RegressionForest surrogate;
};

// Fits a regression forest on the integer-coded design, explains every row
// with antithetic permutation sampling against a background drawn from the
// design, and replaces the categorical cells of the row by their phi values.
ShapEncoding shap_encode_detailed(const Design& design, const EncoderConfig& config);
NumericDesign shap_encode(const Design& design, const EncoderConfig& config);

NumericDesign encode(const Design& design, EncodingTag tag, const EncoderConfig& config);

} // namespace mvela

#endif
