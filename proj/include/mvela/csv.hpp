#ifndef MVELA_CSV_HPP
#define MVELA_CSV_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mvela::csv {

// Minimal CSV for the artifacts this library writes itself: no quoting, cells
// must not contain commas or newlines.
using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;

    std::size_t column(std::string_view name) const;
};

// Round-trippable decimal representation.
std::string format_double(double v);
double parse_double(std::string_view cell);

std::string join(const Row& row);
Row split(std::string_view line);

void write(const std::filesystem::path& path, const Table& table);
Table read(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

} // namespace mvela::csv

#endif
