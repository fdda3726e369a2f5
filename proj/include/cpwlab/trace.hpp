#pragma once

// Complex transmission trace and its CSV form:
//
//   # power_dbm=-50
//   # temperature_k=0.05
//   freq_hz,re_s21,im_s21
//   4.4e9,0.99,0.01
//
// Metadata comment lines are optional and precede the header. Rows are
// sorted by frequency on ingest; duplicate frequencies are rejected.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cpwlab/errors.hpp"

namespace cpwlab {

struct TraceMetadata {
    std::optional<double> power_dbm;
    std::optional<double> temperature_k;
};

struct Trace {
    std::vector<double> freqs;                // Hz, strictly increasing
    std::vector<std::complex<double>> s21;    // same length
    TraceMetadata meta;

    std::size_t size() const { return freqs.size(); }

    void validate(std::size_t min_points = 2) const {
        if (freqs.size() != s21.size())
            throw std::invalid_argument("trace freqs/s21 length mismatch");
        if (freqs.size() < min_points)
            throw std::invalid_argument("trace has " + std::to_string(freqs.size()) +
                                        " points, need >= " + std::to_string(min_points));
        for (std::size_t i = 1; i < freqs.size(); ++i)
            if (!(freqs[i] > freqs[i - 1]))
                throw std::invalid_argument("trace frequencies must be strictly increasing");
    }

    // Sorted copy; throws on duplicate frequencies.
    Trace sorted() const {
        if (freqs.size() != s21.size())
            throw std::invalid_argument("trace freqs/s21 length mismatch");
        std::vector<std::size_t> idx(freqs.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return freqs[a] < freqs[b]; });
        Trace out;
        out.meta = meta;
        out.freqs.reserve(freqs.size());
        out.s21.reserve(s21.size());
        for (std::size_t i : idx) {
            if (!out.freqs.empty() && !(freqs[i] > out.freqs.back()))
                throw std::invalid_argument("duplicate frequency " + std::to_string(freqs[i]) +
                                            " Hz in trace");
            out.freqs.push_back(freqs[i]);
            out.s21.push_back(s21[i]);
        }
        return out;
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, int line_no, const char* what) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw SchemaError("line " + std::to_string(line_no) + ": non-numeric " + what + " '" + s + "'");
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size())
        throw SchemaError("line " + std::to_string(line_no) + ": trailing junk in " + what + " '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

inline void write_trace_csv(std::ostream& os, const Trace& t) {
    if (t.meta.power_dbm)
        os << "# power_dbm=" << detail::format_double(*t.meta.power_dbm) << "\n";
    if (t.meta.temperature_k)
        os << "# temperature_k=" << detail::format_double(*t.meta.temperature_k) << "\n";
    os << "freq_hz,re_s21,im_s21\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << detail::format_double(t.freqs[i]) << ','
           << detail::format_double(t.s21[i].real()) << ','
           << detail::format_double(t.s21[i].imag()) << "\n";
    }
}

inline void write_trace_csv(const std::string& path, const Trace& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_trace_csv(os, t);
}

inline Trace read_trace_csv(std::istream& is) {
    Trace t;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (header_seen)
                throw SchemaError("line " + std::to_string(line_no) +
                                  ": metadata comments must precede the header");
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;  // free-form comment
            const std::string key = detail::trim(line.substr(1, eq - 1));
            const std::string val = detail::trim(line.substr(eq + 1));
            if (key == "power_dbm")
                t.meta.power_dbm = detail::parse_double(val, line_no, "power_dbm");
            else if (key == "temperature_k")
                t.meta.temperature_k = detail::parse_double(val, line_no, "temperature_k");
            // unknown metadata keys are carried past silently
            continue;
        }
        if (!header_seen) {
            if (detail::trim(line) != "freq_hz,re_s21,im_s21")
                throw SchemaError("line " + std::to_string(line_no) +
                                  ": expected header 'freq_hz,re_s21,im_s21', got '" + line + "'");
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv(line);
        if (fields.size() != 3)
            throw SchemaError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                              std::to_string(fields.size()));
        t.freqs.push_back(detail::parse_double(fields[0], line_no, "freq_hz"));
        t.s21.emplace_back(detail::parse_double(fields[1], line_no, "re_s21"),
                           detail::parse_double(fields[2], line_no, "im_s21"));
    }
    if (!header_seen && !t.freqs.empty())
        throw SchemaError("trace file has data but no header");
    return t.sorted();
}

inline Trace read_trace_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_trace_csv(is);
}

}  // namespace cpwlab
