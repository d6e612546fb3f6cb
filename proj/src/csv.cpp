#include "monospde/csv.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace monospde {

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, end);
}

CsvTable::CsvTable(std::string schema, std::vector<std::string> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {}

void CsvTable::add_comment(std::string line) { comments_.push_back(std::move(line)); }

void CsvTable::add_row(std::vector<double> row) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double v : row) cells.push_back(format_double(v));
    add_row(std::move(cells));
}

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != columns_.size()) {
        throw std::invalid_argument("CsvTable: row has " + std::to_string(row.size()) +
                                    " cells, expected " + std::to_string(columns_.size()));
    }
    rows_.push_back(std::move(row));
}

void CsvTable::write(std::ostream& os) const {
    os << "# schema=" << schema_ << '\n';
    for (const auto& c : comments_) os << "# " << c << '\n';
    for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
    os << '\n';
    for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
}

void CsvTable::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write(out);
}

} // namespace monospde
