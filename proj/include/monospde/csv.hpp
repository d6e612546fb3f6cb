#pragma once

#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace monospde {

/// Shortest round-trip decimal form; identical bytes for identical doubles.
std::string format_double(double value);

/// Minimal CSV table: schema line, optional comment lines, header, rows.
class CsvTable {
public:
    CsvTable(std::string schema, std::vector<std::string> columns);

    void add_comment(std::string line);
    void add_row(std::vector<double> row);
    void add_row(std::vector<std::string> row);

    const std::vector<std::string>& columns() const noexcept { return columns_; }
    std::size_t row_count() const noexcept { return rows_.size(); }

    void write(std::ostream& os) const;
    void write(const std::filesystem::path& path) const;

private:
    std::string schema_;
    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace monospde
