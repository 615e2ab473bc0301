#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vi2d/matrix.hpp"

namespace vi2d::io {

/// Raised for unreadable files and malformed content; the CLI maps it to its
/// I/O exit code.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal form that round-trips a double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view token, const std::string& context) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw IoError(context + ": cannot parse '" + std::string(token) + "' as a real number");
    return value;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// ---------------------------------------------------------------------------
// Flat `key = value` documents (system files, configs). '#' starts a comment.
// ---------------------------------------------------------------------------

class KeyValueDoc {
public:
    void set(const std::string& key, const std::string& value) {
        for (auto& e : entries_)
            if (e.first == key) {
                e.second = value;
                return;
            }
        entries_.emplace_back(key, value);
    }

    void set_double(const std::string& key, double v) { set(key, format_double(v)); }
    void set_count(const std::string& key, std::size_t v) { set(key, std::to_string(v)); }

    void set_values(const std::string& key, std::span<const double> values) {
        std::string s;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) s += ' ';
            s += format_double(values[i]);
        }
        set(key, s);
    }

    void set_matrix(const std::string& key, const Matrix& m) {
        set_values(key, {m.data(), m.size()});
    }

    bool has(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.first == key) return true;
        return false;
    }

    const std::string& get(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.first == key) return e.second;
        throw IoError("missing key '" + key + "'");
    }

    double get_double(const std::string& key) const { return parse_double(trim(get(key)), key); }

    std::size_t get_count(const std::string& key) const {
        const double v = get_double(key);
        if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
            throw IoError("key '" + key + "' is not a non-negative integer");
        return static_cast<std::size_t>(v);
    }

    std::vector<double> get_values(const std::string& key) const {
        std::vector<double> out;
        std::istringstream in{get(key)};
        std::string token;
        while (in >> token) out.push_back(parse_double(token, key));
        return out;
    }

    Matrix get_matrix(const std::string& key, std::size_t rows, std::size_t cols) const {
        const auto values = get_values(key);
        if (values.size() != rows * cols)
            throw IoError("key '" + key + "': expected " + std::to_string(rows * cols) +
                          " values, found " + std::to_string(values.size()));
        Matrix m(rows, cols);
        std::copy(values.begin(), values.end(), m.data());
        return m;
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    std::string serialize() const {
        std::string out;
        for (const auto& [key, value] : entries_) {
            out += key;
            out += " = ";
            out += value;
            out += '\n';
        }
        return out;
    }

    static KeyValueDoc parse(std::string_view text, const std::string& origin = "document") {
        KeyValueDoc doc;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t nl = text.find('\n', pos);
            std::string_view line =
                text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
            pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
            ++line_no;
            const std::size_t hash = line.find('#');
            if (hash != std::string_view::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw IoError(origin + " line " + std::to_string(line_no) + ": expected 'key = value'");
            const std::string key{trim(line.substr(0, eq))};
            const std::string value{trim(line.substr(eq + 1))};
            if (key.empty())
                throw IoError(origin + " line " + std::to_string(line_no) + ": empty key");
            doc.set(key, value);
        }
        return doc;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// CSV series: rows are time steps, columns are variables, LF line endings,
// '.' decimal point, optional header row of variable names.
// ---------------------------------------------------------------------------

struct CsvSeries {
    std::vector<std::string> names;  // empty when the file had no header
    MultivariateSeries series;       // variables x time
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.emplace_back(trim(line.substr(start)));
            break;
        }
        cells.emplace_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

inline CsvSeries parse_csv_series(std::string_view text, const std::string& origin = "csv") {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = (nl == std::string_view::npos) ? text.size() : nl + 1;
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw IoError(origin + ": no data rows");

    CsvSeries out;
    std::size_t first_data = 0;
    {
        // Header detection: a first row whose cells are not all numeric.
        bool numeric = true;
        for (const auto& cell : rows[0]) {
            double v = 0.0;
            const char* b = cell.data();
            const char* e = b + cell.size();
            auto [p, ec] = std::from_chars(b, e, v);
            if (ec != std::errc{} || p != e) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            out.names = rows[0];
            first_data = 1;
        }
    }
    if (first_data >= rows.size()) throw IoError(origin + ": header but no data rows");

    const std::size_t num_vars = rows[first_data].size();
    const std::size_t num_steps = rows.size() - first_data;
    out.series = MultivariateSeries(num_vars, num_steps);
    for (std::size_t t = 0; t < num_steps; ++t) {
        const auto& row = rows[first_data + t];
        const std::size_t line_no = first_data + t + 1;
        if (row.size() != num_vars)
            throw IoError(origin + " line " + std::to_string(line_no) + ": expected " +
                          std::to_string(num_vars) + " cells, found " + std::to_string(row.size()));
        for (std::size_t c = 0; c < num_vars; ++c) {
            const double v =
                parse_double(row[c], origin + " line " + std::to_string(line_no));
            if (!std::isfinite(v))
                throw IoError(origin + " line " + std::to_string(line_no) + ": non-finite value");
            out.series(c, t) = v;
        }
    }
    return out;
}

inline CsvSeries read_csv_series(const std::string& path) {
    return parse_csv_series(read_file(path), path);
}

inline std::string format_csv_series(const MultivariateSeries& series,
                                     const std::vector<std::string>& names = {}) {
    std::string out;
    if (!names.empty()) {
        if (names.size() != series.rows())
            throw IoError("csv write: header size does not match variable count");
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (c) out += ',';
            out += names[c];
        }
        out += '\n';
    }
    for (std::size_t t = 0; t < series.cols(); ++t) {
        for (std::size_t c = 0; c < series.rows(); ++c) {
            if (c) out += ',';
            out += format_double(series(c, t));
        }
        out += '\n';
    }
    return out;
}

inline void write_csv_series(const std::string& path, const MultivariateSeries& series,
                             const std::vector<std::string>& names = {}) {
    write_file(path, format_csv_series(series, names));
}

// Generic comma-separated tables (string cells) for report files that mix
// text and numeric columns.

using CsvTable = std::vector<std::vector<std::string>>;

inline CsvTable parse_csv_table(std::string_view text) {
    CsvTable rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = (nl == std::string_view::npos) ? text.size() : nl + 1;
        if (trim(line).empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

inline std::string format_csv_table(const CsvTable& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += row[c];
        }
        out += '\n';
    }
    return out;
}

}  // namespace vi2d::io
