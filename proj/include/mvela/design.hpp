#ifndef MVELA_DESIGN_HPP
#define MVELA_DESIGN_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvela/core.hpp"
#include "mvela/problem.hpp"

namespace mvela {

struct Column {
    std::string name;
    VariableKind kind = VariableKind::continuous;
    std::vector<std::string> categories;

    bool operator==(const Column&) const = default;
};

// Initial design: mixed-typed sample X (categorical cells hold level indices)
// and raw objective values Y.
struct Design {
    std::string problem_id;
    std::vector<Column> columns;
    Matrix X;
    std::vector<double> Y;
    std::uint64_t seed = 0;

    std::size_t rows() const noexcept { return Y.size(); }
    std::size_t dimension() const noexcept { return columns.size(); }
    bool has_categorical() const;
};

enum class EncodingTag { raw, onehot, target, shap };

std::string_view to_string(EncodingTag tag);
EncodingTag parse_encoding_tag(std::string_view text);

// Fully numeric design. `raw` marks the integer-coded surrogate input.
struct NumericDesign {
    std::string problem_id;
    std::vector<std::string> feature_names;
    Matrix X;
    std::vector<double> Y;
    EncodingTag encoding = EncodingTag::raw;

    std::size_t rows() const noexcept { return Y.size(); }
    std::size_t dimension() const noexcept { return feature_names.size(); }
};

inline constexpr std::size_t kDefaultDesignMultiplier = 50;

// Uniform sample of multiplier * D points over the relaxed domain (activation
// conditions ignored), evaluated with evaluate_relaxed.
Design sample_initial_design(const MixedVariableProblem& problem, std::uint64_t seed,
                             std::size_t multiplier = kDefaultDesignMultiplier);

// (v - min) / (max - min); constant input maps to 0.5.
std::vector<double> min_max_scale(std::span<const double> values);

// Scales every column of X and Y independently into [0, 1].
NumericDesign normalize(const NumericDesign& design);

// Files: <stem>.csv (header row, category labels in categorical cells, last
// column "y") and <stem>.json (columns, kinds, seed).
void write_design(const Design& design, const std::filesystem::path& stem);
Design read_design(const std::filesystem::path& stem);

void write_numeric_design(const NumericDesign& design, const std::filesystem::path& stem);
NumericDesign read_numeric_design(const std::filesystem::path& stem);

} // namespace mvela

#endif
