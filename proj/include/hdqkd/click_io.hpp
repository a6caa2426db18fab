#pragma once

#include "hdqkd/core.hpp"
#include "hdqkd/completion.hpp"
#include "hdqkd/measurement.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hdqkd {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim spaces
        size_t a = field.find_first_not_of(" \t\r");
        size_t b = field.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& file, int line) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw data_error(file + ":" + std::to_string(line) + ": cannot parse number '" + s + "'");
    }
}

inline long parse_index(const std::string& s, const std::string& file, int line) {
    try {
        size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw data_error(file + ":" + std::to_string(line) + ": cannot parse index '" + s + "'");
    }
}

inline bool looks_numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

} // namespace detail

struct ClickIngestInfo {
    double tt_total = 0.0;         // raw count mass before normalization
    int ss_settings = 0;
    std::vector<std::string> warnings;
    std::string normalization = "tt: global; ss: per-setting, scaled to the ToA window mass";
};

// TT file: header then rows "i,j,count-or-probability".
inline RealMatrix load_tt_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open TT file: " + path);
    std::string line;
    int lineno = 0;
    std::vector<std::tuple<long, long, double>> rows;
    long dmax = -1;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            if (!fields.empty() && detail::looks_numeric(fields[0]))
                throw data_error(path + ":1: missing header line");
            header_seen = true;
            continue;
        }
        if (fields.size() != 3)
            throw data_error(path + ":" + std::to_string(lineno) + ": expected 3 columns i,j,value");
        const long i = detail::parse_index(fields[0], path, lineno);
        const long j = detail::parse_index(fields[1], path, lineno);
        const double v = detail::parse_double(fields[2], path, lineno);
        if (i < 0 || j < 0) throw data_error(path + ":" + std::to_string(lineno) + ": negative index");
        if (v < 0) throw data_error(path + ":" + std::to_string(lineno) + ": negative count");
        rows.emplace_back(i, j, v);
        dmax = std::max({dmax, i, j});
    }
    if (!header_seen) throw data_error(path + ": empty file (missing header)");
    if (dmax < 1) throw data_error(path + ": needs at least bins 0 and 1");
    RealMatrix tt = RealMatrix::Zero(dmax + 1, dmax + 1);
    for (auto& [i, j, v] : rows) tt(i, j) += v;
    return tt;
}

// SS file: header then rows "a,b,i,j,phiA,phiB,value".
inline std::map<SSKey, double> load_ss_csv(const std::string& path, Eigen::Index d) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open SS file: " + path);
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    std::map<SSKey, double> ss;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            if (!fields.empty() && detail::looks_numeric(fields[0]))
                throw data_error(path + ":1: missing header line");
            header_seen = true;
            continue;
        }
        if (fields.size() != 7)
            throw data_error(path + ":" + std::to_string(lineno) +
                             ": expected 7 columns a,b,i,j,phiA,phiB,value");
        SSKey key;
        key.a = int(detail::parse_index(fields[0], path, lineno));
        key.b = int(detail::parse_index(fields[1], path, lineno));
        key.i = detail::parse_index(fields[2], path, lineno);
        key.j = detail::parse_index(fields[3], path, lineno);
        key.phi_a = detail::parse_double(fields[4], path, lineno);
        key.phi_b = detail::parse_double(fields[5], path, lineno);
        const double v = detail::parse_double(fields[6], path, lineno);
        if (key.a < 1 || key.a > 2 || key.b < 1 || key.b > 2)
            throw data_error(path + ":" + std::to_string(lineno) + ": outcome labels must be 1 or 2");
        if (key.i < 1 || key.i >= d || key.j < 1 || key.j >= d)
            throw data_error(path + ":" + std::to_string(lineno) + ": bins must satisfy 1 <= i,j <= d-1");
        if (v < 0) throw data_error(path + ":" + std::to_string(lineno) + ": negative count");
        ss[key] += v;
    }
    if (!header_seen) throw data_error(path + ": empty file (missing header)");
    return ss;
}

// Ingest raw click counts. TT is normalized globally; each SS setting is
// rescaled so its four outcomes carry the mass of the corresponding 2x2 ToA
// window, which is the convention the simulated tables satisfy exactly.
inline ClickTables load_click_csv(const std::string& tt_path,
                                  const std::optional<std::string>& ss_path,
                                  ClickIngestInfo* info = nullptr) {
    ClickIngestInfo local;
    ClickTables t;
    t.tt = load_tt_csv(tt_path);
    t.dim = t.tt.rows();
    local.tt_total = t.tt.sum();
    if (local.tt_total <= 0) throw data_error(tt_path + ": total count is zero");
    t.tt /= local.tt_total;

    if (ss_path) {
        auto raw = load_ss_csv(*ss_path, t.dim);
        // group outcomes per setting
        std::map<std::tuple<Eigen::Index, Eigen::Index, double, double>, double> group_mass;
        for (const auto& [k, v] : raw) group_mass[{k.i, k.j, k.phi_a, k.phi_b}] += v;
        for (const auto& [k, v] : raw) {
            const double mass = group_mass[{k.i, k.j, k.phi_a, k.phi_b}];
            const double window = t.tt(k.i, k.j) + t.tt(k.i, k.j - 1) + t.tt(k.i - 1, k.j) +
                                  t.tt(k.i - 1, k.j - 1);
            if (mass <= 0) {
                if (window > 0)
                    local.warnings.push_back("SS setting with zero counts inside a populated window");
                t.ss[k] = 0.0;
            } else {
                t.ss[k] = v / mass * window;
            }
        }
        std::map<std::tuple<Eigen::Index, Eigen::Index, double, double>, int> seen;
        for (const auto& [k, v] : t.ss) seen[{k.i, k.j, k.phi_a, k.phi_b}]++;
        local.ss_settings = int(seen.size());
    }
    if (info) *info = local;
    return t;
}

inline void save_tt_csv(const std::string& path, const RealMatrix& tt) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "i,j,value\n";
    char buf[64];
    for (Eigen::Index i = 0; i < tt.rows(); ++i)
        for (Eigen::Index j = 0; j < tt.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g\n", long(i), long(j), tt(i, j));
            out << buf;
        }
}

inline void save_ss_csv(const std::string& path, const ClickTables& tables) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "a,b,i,j,phiA,phiB,value\n";
    char buf[160];
    for (const auto& [k, v] : tables.ss) {
        std::snprintf(buf, sizeof buf, "%d,%d,%ld,%ld,%.17g,%.17g,%.17g\n", k.a, k.b, long(k.i),
                      long(k.j), k.phi_a, k.phi_b, v);
        out << buf;
    }
}

// Partial-matrix CSV, same schema in and out: "j,l,lo,hi,status".
inline PartialRealSymmetric load_partial_csv(const std::string& path, Eigen::Index dim) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open partial-matrix file: " + path);
    PartialRealSymmetric r(dim);
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            if (!fields.empty() && detail::looks_numeric(fields[0]))
                throw data_error(path + ":1: missing header line");
            header_seen = true;
            continue;
        }
        if (fields.size() != 5)
            throw data_error(path + ":" + std::to_string(lineno) + ": expected j,l,lo,hi,status");
        const long j = detail::parse_index(fields[0], path, lineno);
        const long l = detail::parse_index(fields[1], path, lineno);
        if (j < 0 || j >= dim || l < 0 || l >= dim)
            throw data_error(path + ":" + std::to_string(lineno) + ": index outside 0..dim-1");
        const std::string& status = fields[4];
        if (status == "unknown") continue;
        const double lo = detail::parse_double(fields[2], path, lineno);
        const double hi = detail::parse_double(fields[3], path, lineno);
        if (status == "known") {
            if (lo != hi)
                throw data_error(path + ":" + std::to_string(lineno) + ": known entry needs lo == hi");
            r.set_known(j, l, lo);
        } else if (status == "interval") {
            if (lo > hi) throw data_error(path + ":" + std::to_string(lineno) + ": interval lo > hi");
            r.set_interval(j, l, lo, hi);
        } else {
            throw data_error(path + ":" + std::to_string(lineno) + ": status must be known|interval|unknown");
        }
    }
    if (!header_seen) throw data_error(path + ": empty file (missing header)");
    return r;
}

inline void save_partial_csv(const std::string& path, const PartialRealSymmetric& r) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "j,l,lo,hi,status\n";
    char buf[160];
    for (Eigen::Index j = 0; j < r.dim(); ++j)
        for (Eigen::Index l = j; l < r.dim(); ++l) {
            const EntryStatus st = r.status(j, l);
            const Interval iv = r.interval(j, l);
            if (st == EntryStatus::Unknown) {
                std::snprintf(buf, sizeof buf, "%ld,%ld,,,unknown\n", long(j), long(l));
            } else {
                std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%s\n", long(j), long(l), iv.lo,
                              iv.hi, to_string(st).c_str());
            }
            out << buf;
        }
}

} // namespace hdqkd
