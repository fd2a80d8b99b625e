#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/ingest.hpp"

namespace climcast::harness {

namespace fs = std::filesystem;

/// Raised when a run directory lacks an expected file; the message names the path.
class MissingArtifactError : public std::runtime_error {
public:
    explicit MissingArtifactError(const fs::path& path)
        : std::runtime_error("missing artifact: " + path.generic_string()), path_(path) {}
    [[nodiscard]] const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

/// Directory-safe form of a city or model name.
inline std::string sanitize_name(std::string_view name) {
    std::string out;
    for (char c : name) {
        const auto u = static_cast<unsigned char>(c);
        out += (std::isalnum(u) || c == '-' || c == '.') ? c : '_';
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

inline void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.generic_string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.generic_string());
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path.generic_string() + ": " + e.what());
    }
}

/// Stable pretty-printed JSON with a trailing newline.
inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(std::string_view name, const fs::path& source) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw std::runtime_error(source.generic_string() + ": no column '" + std::string(name) + "'");
    }

    /// Numeric column; empty cells become NaN.
    [[nodiscard]] std::vector<double> numbers(std::string_view name, const fs::path& source) const {
        const auto c = column(name, source);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) {
            const auto v = c < r.size() ? climcast::detail::parse_double(r[c]) : std::nullopt;
            out.push_back(v ? *v : NAN);
        }
        return out;
    }
};

inline CsvTable read_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    if (!climcast::detail::getline_stripped(in, line)) return t;
    climcast::detail::strip_bom(line);
    t.header = climcast::detail::split_csv_line(line);
    while (climcast::detail::getline_stripped(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(climcast::detail::split_csv_line(line));
    }
    return t;
}

}  // namespace climcast::harness
