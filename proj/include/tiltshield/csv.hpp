#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tiltshield/errors.hpp"

namespace tiltshield::csv {

// Shortest round-trip representation. Deterministic for a given value, and
// lossless on re-parse, which is what the byte-reproducibility and
// aggregation-recompute guarantees rest on.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_opt(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

inline double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("malformed number '" + std::string(s) + "' in " + context);
    }
    return v;
}

inline long parse_long(std::string_view s, const std::string& context) {
    long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw FormatError("malformed integer '" + std::string(s) + "' in " + context);
    }
    return v;
}

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path.string()), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open '" + path_ + "' for writing");
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
        if (!out_) throw IoError("write failed on '" + path_ + "'");
    }

    void raw_line(std::string_view line) {
        out_ << line << '\n';
        if (!out_) throw IoError("write failed on '" + path_ + "'");
    }

private:
    std::string path_;
    std::ofstream out_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name, const std::string& context) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ConfigError("missing column '" + name + "' in " + context);
    }
};

inline Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty CSV file '" + path.string() + "'");
    t.header = split_row(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_row(line));
    }
    return t;
}

}  // namespace tiltshield::csv
