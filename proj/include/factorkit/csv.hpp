#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <system_error>
#include <vector>

#include "factorkit/errors.hpp"

namespace factorkit::csv {

// The file schemas used here never contain quoted fields or embedded commas.
inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::optional<int> parse_int(const std::string& s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline bool try_parse_int(const std::string& s, int& out) {
    auto v = parse_int(s);
    if (v) out = *v;
    return v.has_value();
}

inline bool try_parse_double(const std::string& s, double& out) {
    auto v = parse_double(s);
    if (v) out = *v;
    return v.has_value();
}

// Shortest representation that round-trips the exact double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string format_sig(double v, int digits) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

inline std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "INF" : "-INF";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

struct Row {
    std::size_t line_no = 0;  // 1-based, header is line 1
    std::vector<std::string> fields;
};

// Reads all data rows, checking the header verbatim.
inline std::vector<Row> read_table(const std::string& path, const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) raise(Errc::io_error, "cannot open " + path);
    std::string line;
    std::vector<Row> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != expected_header)
                raise(Errc::malformed_row,
                      path + ":1: expected header '" + expected_header + "', got '" + line + "'");
            continue;
        }
        if (line.empty()) continue;
        rows.push_back(Row{line_no, split(line)});
    }
    if (line_no == 0) raise(Errc::malformed_row, path + ": file is empty (missing header)");
    return rows;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out << contents;
    if (!out) raise(Errc::io_error, "write failed for " + path);
}

}  // namespace factorkit::csv
