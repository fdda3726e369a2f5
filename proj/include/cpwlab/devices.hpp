#pragma once

// Device-table ingestion and per-fabrication-group statistics. The CSV
// schema (header is bit-exact):
//
//   device,f_ghz,q_lp_e6,q_hp_e6,wet_etch_al,rie_al,bosch_si,iso_etch_si,
//   us_microcut,feedline_bridges,resonator_bridges
//
// Flag cells are 'x' or empty. Q columns are in units of 1e6 and stored
// as absolute values. Group labels are the device-id prefix before the
// dot.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpwlab/errors.hpp"
#include "cpwlab/trace.hpp"  // detail::split_csv / trim / parse_double

namespace cpwlab {

struct DeviceRecord {
    std::string device_id;
    std::string group_label;
    double f_ghz = 0.0;
    double q_lp = 0.0;  // absolute (table value x 1e6)
    double q_hp = 0.0;
    bool wet_etch_al = false;
    bool rie_al = false;
    bool bosch_si = false;
    bool iso_etch_si = false;
    bool us_microcut = false;
    bool feedline_bridges = false;
    bool resonator_bridges = false;
};

enum class DeviceFlag {
    wet_etch_al,
    rie_al,
    bosch_si,
    iso_etch_si,
    us_microcut,
    feedline_bridges,
    resonator_bridges,
};

inline const char* to_string(DeviceFlag f) {
    switch (f) {
        case DeviceFlag::wet_etch_al: return "wet_etch_al";
        case DeviceFlag::rie_al: return "rie_al";
        case DeviceFlag::bosch_si: return "bosch_si";
        case DeviceFlag::iso_etch_si: return "iso_etch_si";
        case DeviceFlag::us_microcut: return "us_microcut";
        case DeviceFlag::feedline_bridges: return "feedline_bridges";
        case DeviceFlag::resonator_bridges: return "resonator_bridges";
    }
    return "?";
}

inline std::optional<DeviceFlag> flag_from_string(const std::string& s) {
    static const std::pair<const char*, DeviceFlag> names[] = {
        {"wet_etch_al", DeviceFlag::wet_etch_al},
        {"rie_al", DeviceFlag::rie_al},
        {"bosch_si", DeviceFlag::bosch_si},
        {"iso_etch_si", DeviceFlag::iso_etch_si},
        {"us_microcut", DeviceFlag::us_microcut},
        {"feedline_bridges", DeviceFlag::feedline_bridges},
        {"resonator_bridges", DeviceFlag::resonator_bridges},
    };
    for (const auto& [name, flag] : names)
        if (s == name) return flag;
    return std::nullopt;
}

inline bool has_flag(const DeviceRecord& r, DeviceFlag f) {
    switch (f) {
        case DeviceFlag::wet_etch_al: return r.wet_etch_al;
        case DeviceFlag::rie_al: return r.rie_al;
        case DeviceFlag::bosch_si: return r.bosch_si;
        case DeviceFlag::iso_etch_si: return r.iso_etch_si;
        case DeviceFlag::us_microcut: return r.us_microcut;
        case DeviceFlag::feedline_bridges: return r.feedline_bridges;
        case DeviceFlag::resonator_bridges: return r.resonator_bridges;
    }
    return false;
}

struct RowIssue {
    int line_no = 0;
    std::string message;
};

struct DeviceTable {
    std::vector<DeviceRecord> records;
    std::vector<RowIssue> issues;  // malformed rows, skipped
};

inline constexpr const char* device_csv_header =
    "device,f_ghz,q_lp_e6,q_hp_e6,wet_etch_al,rie_al,bosch_si,iso_etch_si,us_microcut,"
    "feedline_bridges,resonator_bridges";

inline DeviceTable parse_device_table(std::istream& is) {
    DeviceTable table;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (detail::trim(line) != device_csv_header)
                throw SchemaError("line " + std::to_string(line_no) +
                                  ": device table header does not match schema");
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv(line);
        if (fields.size() != 11) {
            table.issues.push_back({line_no, "expected 11 fields, got " +
                                                 std::to_string(fields.size())});
            continue;
        }
        DeviceRecord r;
        r.device_id = detail::trim(fields[0]);
        if (r.device_id.empty()) {
            table.issues.push_back({line_no, "empty device id"});
            continue;
        }
        const auto dot = r.device_id.find('.');
        r.group_label = dot == std::string::npos ? r.device_id : r.device_id.substr(0, dot);
        try {
            r.f_ghz = detail::parse_double(fields[1], line_no, "f_ghz");
            r.q_lp = detail::parse_double(fields[2], line_no, "q_lp_e6") * 1e6;
            r.q_hp = detail::parse_double(fields[3], line_no, "q_hp_e6") * 1e6;
        } catch (const SchemaError& e) {
            table.issues.push_back({line_no, e.what()});
            continue;
        }
        bool bad_flag = false;
        bool* flags[] = {&r.wet_etch_al,  &r.rie_al,           &r.bosch_si,
                         &r.iso_etch_si,  &r.us_microcut,      &r.feedline_bridges,
                         &r.resonator_bridges};
        for (int i = 0; i < 7; ++i) {
            const std::string cell = detail::trim(fields[4 + i]);
            if (cell.empty())
                *flags[i] = false;
            else if (cell == "x" || cell == "X")
                *flags[i] = true;
            else {
                table.issues.push_back({line_no, "flag cell must be 'x' or empty, got '" +
                                                     cell + "'"});
                bad_flag = true;
                break;
            }
        }
        if (bad_flag) continue;

        // Record invariants; violating rows are reported and skipped.
        if (r.wet_etch_al == r.rie_al) {
            table.issues.push_back(
                {line_no, "device " + r.device_id + ": exactly one of wet_etch_al/rie_al must be set"});
            continue;
        }
        if (r.bosch_si && r.iso_etch_si) {
            table.issues.push_back(
                {line_no, "device " + r.device_id + ": bosch_si and iso_etch_si are exclusive"});
            continue;
        }
        if (r.resonator_bridges && !r.feedline_bridges) {
            table.issues.push_back(
                {line_no, "device " + r.device_id + ": resonator_bridges requires feedline_bridges"});
            continue;
        }
        if (!(r.q_hp >= r.q_lp)) {
            table.issues.push_back({line_no, "device " + r.device_id + ": q_hp < q_lp"});
            continue;
        }
        table.records.push_back(std::move(r));
    }
    return table;
}

inline DeviceTable parse_device_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return parse_device_table(is);
}

enum class QColumn { low_power, high_power };

struct GroupFilter {
    std::optional<double> f_min_ghz;
    std::optional<double> f_max_ghz;
    std::vector<DeviceFlag> require;
    std::vector<DeviceFlag> exclude;
    std::optional<std::string> group_prefix;
};

// Frequency window and bridge exclusion used for the headline group
// comparison: 4-5 GHz, no airbridges.
inline GroupFilter paper_groups_filter() {
    GroupFilter f;
    f.f_min_ghz = 4.0;
    f.f_max_ghz = 5.0;
    f.exclude = {DeviceFlag::feedline_bridges, DeviceFlag::resonator_bridges};
    return f;
}

inline bool passes(const DeviceRecord& r, const GroupFilter& f) {
    if (f.f_min_ghz && r.f_ghz < *f.f_min_ghz) return false;
    if (f.f_max_ghz && r.f_ghz > *f.f_max_ghz) return false;
    for (DeviceFlag fl : f.require)
        if (!has_flag(r, fl)) return false;
    for (DeviceFlag fl : f.exclude)
        if (has_flag(r, fl)) return false;
    if (f.group_prefix && r.group_label != *f.group_prefix) return false;
    return true;
}

struct GroupStats {
    std::string group;
    int n = 0;
    double mean = 0.0;
    double std_dev = 0.0;  // sample (n-1); 0 for a single record
    double min = 0.0;
    double max = 0.0;
};

// Aggregates of the selected Q column over filtered records, one entry
// per surviving group, sorted by group label. Groups emptied by the
// filter are absent.
inline std::vector<GroupStats> group_stats(std::span<const DeviceRecord> records,
                                           const GroupFilter& filter,
                                           QColumn column = QColumn::low_power) {
    if (filter.f_min_ghz && filter.f_max_ghz && *filter.f_min_ghz > *filter.f_max_ghz)
        throw std::invalid_argument("f_min_ghz > f_max_ghz");
    std::map<std::string, std::vector<double>> by_group;
    for (const auto& r : records)
        if (passes(r, filter))
            by_group[r.group_label].push_back(column == QColumn::low_power ? r.q_lp : r.q_hp);

    std::vector<GroupStats> out;
    out.reserve(by_group.size());
    for (const auto& [group, values] : by_group) {
        GroupStats g;
        g.group = group;
        g.n = static_cast<int>(values.size());
        double sum = 0.0;
        g.min = values.front();
        g.max = values.front();
        for (double v : values) {
            sum += v;
            g.min = std::min(g.min, v);
            g.max = std::max(g.max, v);
        }
        g.mean = sum / g.n;
        if (g.n > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - g.mean) * (v - g.mean);
            g.std_dev = std::sqrt(ss / (g.n - 1));
        }
        out.push_back(std::move(g));
    }
    return out;
}

struct RatioReport {
    double ratio = 0.0;            // mean_b / mean_a
    double rel_uncertainty = 0.0;  // propagated standard error of the ratio
};

inline RatioReport ratio_report(const GroupStats& a, const GroupStats& b) {
    if (!(a.mean > 0.0 && b.mean > 0.0))
        throw std::invalid_argument("ratio_report requires positive group means");
    RatioReport r;
    r.ratio = b.mean / a.mean;
    const double ea = a.std_dev / (a.mean * std::sqrt(static_cast<double>(a.n)));
    const double eb = b.std_dev / (b.mean * std::sqrt(static_cast<double>(b.n)));
    r.rel_uncertainty = std::sqrt(ea * ea + eb * eb);
    return r;
}

// Record with the largest value in the selected Q column; nullptr when empty.
inline const DeviceRecord* best_device(std::span<const DeviceRecord> records,
                                       QColumn column = QColumn::low_power) {
    const DeviceRecord* best = nullptr;
    for (const auto& r : records) {
        const double v = column == QColumn::low_power ? r.q_lp : r.q_hp;
        if (!best || v > (column == QColumn::low_power ? best->q_lp : best->q_hp)) best = &r;
    }
    return best;
}

}  // namespace cpwlab
