#pragma once

// Numeric CSV tables with '#' comment headers. Numbers are written with 17
// significant digits so that a table read back reproduces every bit.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sasefel/config.hpp"
#include "sasefel/error.hpp"

namespace sasefel {

struct CsvTable {
    std::vector<std::string> comments;  ///< without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        return std::nullopt;
    }
    std::vector<double> column(std::string_view name) const {
        const auto i = find(name);
        if (!i) throw ConfigError("CSV has no column '" + std::string(name) + "'");
        std::vector<double> v;
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(r[*i]);
        return v;
    }
};

inline std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
    for (const auto& c : t.comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_number(r[i]);
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const CsvTable& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    write_csv(f, t);
    if (!f) throw ConfigError("error while writing " + path);
}

inline CsvTable read_csv(std::istream& in, const std::string& name = "input") {
    CsvTable t;
    std::string line;
    int line_no = 0;
    std::vector<std::string> errors;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            t.comments.push_back(line.size() > 2 && line[1] == ' ' ? line.substr(2) : line.substr(1));
            continue;
        }
        auto cells = detail::split_list(line);
        if (t.columns.empty()) {
            t.columns = std::move(cells);
            continue;
        }
        if (cells.size() != t.columns.size()) {
            errors.push_back(name + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(t.columns.size()) + " fields, got " + std::to_string(cells.size()));
            continue;
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            double v = 0.0;
            const auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc() || p != c.data() + c.size()) {
                errors.push_back(name + " line " + std::to_string(line_no) + ": '" + c + "' is not a number");
                v = std::nan("");
            }
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty()) errors.push_back(name + ": no header row");
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path);
    return read_csv(f, path);
}

/// Writes "<path>.status": "complete", or "partial" followed by one line per problem.
inline void write_status(const std::string& path, const std::vector<std::string>& problems) {
    std::ofstream f(path + ".status", std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path + ".status");
    f << (problems.empty() ? "complete" : "partial") << '\n';
    for (const auto& p : problems) f << p << '\n';
}

}  // namespace sasefel
