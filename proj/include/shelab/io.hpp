#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace shelab {

using Json = nlohmann::ordered_json;

/// Shortest decimal that round-trips to the same double ("C" locale, no exponent padding).
std::string format_number(double value);

/// CSV with a fixed header; rows are written in the order given.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(const std::vector<double>& values);
    std::size_t rows() const { return rows_; }
    const std::vector<std::string>& header() const { return header_; }
    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::string body_;
    std::size_t rows_ = 0;
};

void write_json(const std::filesystem::path& path, const Json& doc);

}  // namespace shelab
