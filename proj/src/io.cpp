#include "shelab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "shelab/errors.hpp"
#include "shelab/parallel.hpp"

namespace shelab {

int& worker_count() {
    static int count = 0;
    return count;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0) value = 0;  // drop the sign of negative zero
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    require(!header_.empty(), "CsvTable: empty header");
}

void CsvTable::add_row(const std::vector<double>& values) {
    require(values.size() == header_.size(), "CsvTable: row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) body_ += ',';
        body_ += format_number(values[i]);
    }
    body_ += '\n';
    ++rows_;
}

std::string CsvTable::str() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i) out += ',';
        out += header_[i];
    }
    out += '\n';
    return out + body_;
}

void CsvTable::write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigurationError("cannot open " + path.string() + " for writing");
    out << str();
}

void write_json(const std::filesystem::path& path, const Json& doc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigurationError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

}  // namespace shelab
