#include "mvela/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "mvela/core.hpp"

namespace mvela::csv {

std::size_t Table::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw DataError("csv has no column '" + std::string(name) + "'");
}

std::string format_double(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) {
        throw DataError("cannot format number");
    }
    return std::string(buf, end);
}

double parse_double(std::string_view cell)
{
    if (cell == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (cell == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    if (cell == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || end != cell.data() + cell.size()) {
        throw DataError("not a number: '" + std::string(cell) + "'");
    }
    return v;
}

std::string join(const Row& row)
{
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += row[i];
    }
    return out;
}

Row split(std::string_view line)
{
    Row out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

void write(const std::filesystem::path& path, const Table& table)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << join(table.header) << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            throw DataError("csv row width does not match header in " + path.string());
        }
        out << join(row) << '\n';
    }
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

Table read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    Table table;
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("empty csv " + path.string());
    }
    table.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto row = split(line);
        if (row.size() != table.header.size()) {
            throw DataError("ragged csv row in " + path.string());
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed json in " + path.string() + ": " + e.what());
    }
}

} // namespace mvela::csv
