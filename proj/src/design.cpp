#include "mvela/design.hpp"

#include <algorithm>
#include <cmath>

#include "mvela/csv.hpp"
#include "mvela/random.hpp"

namespace mvela {

bool Design::has_categorical() const
{
    return std::any_of(columns.begin(), columns.end(),
                       [](const Column& c) { return c.kind == VariableKind::categorical; });
}

std::string_view to_string(EncodingTag tag)
{
    switch (tag) {
    case EncodingTag::raw:
        return "raw";
    case EncodingTag::onehot:
        return "onehot";
    case EncodingTag::target:
        return "target";
    case EncodingTag::shap:
        return "shap";
    }
    return "unknown";
}

EncodingTag parse_encoding_tag(std::string_view text)
{
    for (auto tag : {EncodingTag::raw, EncodingTag::onehot, EncodingTag::target, EncodingTag::shap}) {
        if (to_string(tag) == text) {
            return tag;
        }
    }
    throw DataError("unknown encoding tag '" + std::string(text) + "'");
}

Design sample_initial_design(const MixedVariableProblem& problem, std::uint64_t seed, std::size_t multiplier)
{
    if (multiplier < 1) {
        throw ConfigError("design multiplier must be at least 1");
    }
    const std::size_t dim = problem.dimension();
    const std::size_t n = multiplier * dim;

    Design design;
    design.problem_id = problem.instance_id();
    design.seed = seed;
    for (const auto& v : problem.variables()) {
        design.columns.push_back({v.name, v.kind, v.categories});
    }
    design.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    design.Y.resize(n);

    Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        auto row = row_span(design.X, static_cast<Eigen::Index>(r));
        for (std::size_t c = 0; c < dim; ++c) {
            const auto& v = problem.variables()[c];
            switch (v.kind) {
            case VariableKind::continuous:
                row[c] = std::uniform_real_distribution<double>(v.lower, v.upper)(rng);
                break;
            case VariableKind::integer:
                row[c] = static_cast<double>(std::uniform_int_distribution<std::int64_t>(
                    static_cast<std::int64_t>(v.lower), static_cast<std::int64_t>(v.upper))(rng));
                break;
            case VariableKind::categorical:
                row[c] = static_cast<double>(std::uniform_int_distribution<std::size_t>(0, v.categories.size() - 1)(rng));
                break;
            }
        }
        design.Y[r] = problem.evaluate_relaxed(std::span<const double>(row.data(), row.size()));
    }
    return design;
}

std::vector<double> min_max_scale(std::span<const double> values)
{
    if (values.empty()) {
        return {};
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw DataError("cannot normalize non-finite value");
        }
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    std::vector<double> out(values.size());
    if (*lo == *hi) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    const double low = *lo;
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - low) / range;
    }
    return out;
}

NumericDesign normalize(const NumericDesign& design)
{
    if (static_cast<std::size_t>(design.X.rows()) != design.Y.size() ||
        static_cast<std::size_t>(design.X.cols()) != design.feature_names.size()) {
        throw DimensionError("numeric design shape does not match its names / objective vector");
    }
    NumericDesign out = design;
    for (Eigen::Index c = 0; c < design.X.cols(); ++c) {
        const auto scaled = min_max_scale(column_copy(design.X, c));
        for (Eigen::Index r = 0; r < design.X.rows(); ++r) {
            out.X(r, c) = scaled[static_cast<std::size_t>(r)];
        }
    }
    out.Y = min_max_scale(design.Y);
    return out;
}

namespace {

nlohmann::json columns_json(const std::vector<Column>& columns)
{
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : columns) {
        nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}};
        if (c.kind == VariableKind::categorical) {
            j["categories"] = c.categories;
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext)
{
    auto p = stem;
    p += ext;
    return p;
}

} // namespace

void write_design(const Design& design, const std::filesystem::path& stem)
{
    csv::Table table;
    for (const auto& c : design.columns) {
        table.header.push_back(c.name);
    }
    table.header.emplace_back("y");
    for (std::size_t r = 0; r < design.rows(); ++r) {
        csv::Row row;
        for (std::size_t c = 0; c < design.dimension(); ++c) {
            const double v = design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            if (design.columns[c].kind == VariableKind::categorical) {
                row.push_back(design.columns[c].categories.at(static_cast<std::size_t>(v)));
            } else {
                row.push_back(csv::format_double(v));
            }
        }
        row.push_back(csv::format_double(design.Y[r]));
        table.rows.push_back(std::move(row));
    }
    csv::write(with_ext(stem, ".csv"), table);
    csv::write_json(with_ext(stem, ".json"),
                    {{"problem_id", design.problem_id}, {"seed", design.seed}, {"columns", columns_json(design.columns)}});
}

Design read_design(const std::filesystem::path& stem)
{
    const auto meta = csv::read_json(with_ext(stem, ".json"));
    const auto table = csv::read(with_ext(stem, ".csv"));
    Design design;
    design.problem_id = meta.at("problem_id").get<std::string>();
    design.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& c : meta.at("columns")) {
        Column col;
        col.name = c.at("name").get<std::string>();
        col.kind = parse_variable_kind(c.at("kind").get<std::string>());
        if (col.kind == VariableKind::categorical) {
            col.categories = c.at("categories").get<std::vector<std::string>>();
        }
        design.columns.push_back(std::move(col));
    }
    const std::size_t dim = design.columns.size();
    if (table.header.size() != dim + 1) {
        throw DataError("design csv width does not match sidecar for " + stem.string());
    }
    design.X.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            const auto& cell = table.rows[r][c];
            double v = 0.0;
            if (design.columns[c].kind == VariableKind::categorical) {
                const auto& cats = design.columns[c].categories;
                auto it = std::find(cats.begin(), cats.end(), cell);
                if (it == cats.end()) {
                    throw DataError("unknown category '" + cell + "' in " + stem.string());
                }
                v = static_cast<double>(it - cats.begin());
            } else {
                v = csv::parse_double(cell);
            }
            design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
        design.Y.push_back(csv::parse_double(table.rows[r][dim]));
    }
    return design;
}

void write_numeric_design(const NumericDesign& design, const std::filesystem::path& stem)
{
    csv::Table table;
    table.header = design.feature_names;
    table.header.emplace_back("y");
    for (std::size_t r = 0; r < design.rows(); ++r) {
        csv::Row row;
        for (std::size_t c = 0; c < design.dimension(); ++c) {
            row.push_back(csv::format_double(design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
        }
        row.push_back(csv::format_double(design.Y[r]));
        table.rows.push_back(std::move(row));
    }
    csv::write(with_ext(stem, ".csv"), table);
    csv::write_json(with_ext(stem, ".json"), {{"problem_id", design.problem_id},
                                             {"encoding_tag", to_string(design.encoding)},
                                             {"feature_names", design.feature_names}});
}

NumericDesign read_numeric_design(const std::filesystem::path& stem)
{
    const auto meta = csv::read_json(with_ext(stem, ".json"));
    const auto table = csv::read(with_ext(stem, ".csv"));
    NumericDesign design;
    design.problem_id = meta.at("problem_id").get<std::string>();
    design.encoding = parse_encoding_tag(meta.at("encoding_tag").get<std::string>());
    design.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    const std::size_t dim = design.feature_names.size();
    if (table.header.size() != dim + 1) {
        throw DataError("numeric design csv width does not match sidecar for " + stem.string());
    }
    design.X.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            design.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = csv::parse_double(table.rows[r][c]);
        }
        design.Y.push_back(csv::parse_double(table.rows[r][dim]));
    }
    return design;
}

} // namespace mvela
