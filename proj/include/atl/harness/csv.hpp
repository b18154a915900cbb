#pragma once

// Learning-curve CSV files: per-seed record files, cross-seed aggregates and
// plot-ready tables. Comma separated, one header row, '.' decimal separator.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "atl/record.hpp"

namespace atl::harness {

inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string record_header() {
    std::string out;
    for (std::size_t i = 0; i < kRecordColumns.size(); ++i) {
        if (i) out += ',';
        out += kRecordColumns[i];
    }
    return out;
}

inline std::string record_row(const ExperimentRecord& r) {
    std::ostringstream os;
    os << r.iteration << ',' << r.episodes_so_far << ',' << r.env_steps_so_far << ',' << format_double(r.mean_env_return)
       << ',' << format_double(r.mean_intrinsic_log_return) << ',' << format_double(r.mean_intrinsic_exp_return) << ','
       << format_double(r.beta) << ',' << r.seed << ',' << format_double(r.wallclock_ms);
    return os.str();
}

/// Streams records to a CSV file; the header is written on construction so
/// an interrupted run still leaves a well-formed prefix.
class RecordWriter {
public:
    explicit RecordWriter(const std::string& path) : out_(path), path_(path) {
        if (!out_) throw std::runtime_error("cannot write '" + path + "'");
        out_ << record_header() << '\n';
        out_.flush();
    }
    void write(const ExperimentRecord& r) {
        out_ << record_row(r) << '\n';
        out_.flush();
    }
    const std::string& path() const { return path_; }

private:
    std::ofstream out_;
    std::string path_;
};

inline void write_records(const std::string& path, const std::vector<ExperimentRecord>& records) {
    RecordWriter w(path);
    for (const auto& r : records) w.write(r);
}

/// Generic numeric table.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }

    std::vector<double> column(const std::string& name) const {
        const int c = column_index(name);
        if (c < 0) throw std::invalid_argument("no column '" + name + "'");
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
        return out;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.columns = split_csv_line(line);
    for (int lineno = 2; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != t.columns.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": wrong number of cells");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) {
            char* end = nullptr;
            const double v = std::strtod(c.c_str(), &end);
            if (end == c.c_str()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": non-numeric cell");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_table(const std::string& path, const Table& t) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << '\n';
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << format_double(r[i]);
        out << '\n';
    }
}

/// Per-iteration mean, population std, min and max across seed files for every
/// numeric column except `iteration` and `seed`. Shorter runs are padded with
/// their last row; the `padded` column counts padded seeds per row.
inline Table aggregate(const std::vector<Table>& per_seed) {
    if (per_seed.empty()) throw std::invalid_argument("aggregate: no input files");
    const auto& cols = per_seed.front().columns;
    for (const auto& t : per_seed)
        if (t.columns != cols) throw std::invalid_argument("aggregate: column mismatch between files");
    std::size_t rows = 0;
    for (const auto& t : per_seed) rows = std::max(rows, t.rows.size());

    Table out;
    out.columns.push_back("iteration");
    std::vector<std::size_t> value_cols;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c] == "iteration" || cols[c] == "seed") continue;
        value_cols.push_back(c);
        for (const char* suffix : {"_mean", "_std", "_min", "_max"}) out.columns.push_back(cols[c] + suffix);
    }
    out.columns.push_back("n_seeds");
    out.columns.push_back("padded");
    const int iter_col = per_seed.front().column_index("iteration");

    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row;
        int padded = 0;
        std::vector<const std::vector<double>*> src;
        for (const auto& t : per_seed) {
            if (t.rows.empty()) continue;
            if (r >= t.rows.size()) ++padded;
            src.push_back(&t.rows[std::min(r, t.rows.size() - 1)]);
        }
        row.push_back(iter_col >= 0 && r < per_seed.front().rows.size()
                          ? per_seed.front().rows[r][static_cast<std::size_t>(iter_col)]
                          : static_cast<double>(r));
        const double n = static_cast<double>(src.size());
        for (std::size_t c : value_cols) {
            double sum = 0.0;
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto* s : src) {
                const double v = (*s)[c];
                sum += v;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const double mean = sum / n;
            double ss = 0.0;
            for (const auto* s : src) ss += ((*s)[c] - mean) * ((*s)[c] - mean);
            double sd = std::sqrt(ss / n);
            if (std::isnan(mean)) lo = hi = sd = std::numeric_limits<double>::quiet_NaN();
            row.insert(row.end(), {mean, sd, lo, hi});
        }
        row.push_back(n);
        row.push_back(padded);
        out.rows.push_back(std::move(row));
    }
    return out;
}

inline Table aggregate_files(const std::vector<std::string>& paths) {
    std::vector<Table> tables;
    tables.reserve(paths.size());
    for (const auto& p : paths) tables.push_back(read_table(p));
    return aggregate(tables);
}

/// x = env_steps_so_far_mean, y = <quantity>_mean, band = <quantity>_std.
inline Table plot_data(const Table& aggregate_table, const std::string& quantity) {
    const int y = aggregate_table.column_index(quantity + "_mean");
    const int band = aggregate_table.column_index(quantity + "_std");
    const int x = aggregate_table.column_index("env_steps_so_far_mean");
    if (y < 0 || band < 0) throw std::invalid_argument("unknown quantity '" + quantity + "'");
    if (x < 0) throw std::invalid_argument("aggregate table lacks env_steps_so_far_mean");
    Table out;
    out.columns = {"x", "y", "band"};
    for (const auto& r : aggregate_table.rows)
        out.rows.push_back({r[static_cast<std::size_t>(x)], r[static_cast<std::size_t>(y)], r[static_cast<std::size_t>(band)]});
    return out;
}

}  // namespace atl::harness
