// cpwlab: design, synthesize, fit, calibrate and aggregate CPW resonator
// data from the command line. All flags take SI base units (meters, Hz,
// farads); dBm/dB appear only for powers and attenuation.
//
// Exit codes: 0 success; 1 fit failure or unreachable design target;
// 2 flag, I/O or schema error; 3 partial batch failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cpwlab/cpwlab.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_fit_failure = 1;
constexpr int exit_usage = 2;
constexpr int exit_partial = 3;

// --config on the command line wins over CPWLAB_CONFIG; both are loaded
// before the option defaults are built so that explicit flags override
// config values.
std::optional<std::string> prescan_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return std::nullopt;
}

void emit(const nlohmann::json& j) { std::cout << cpwlab::record_line(j); }

struct DesignLineArgs {
    double w = 0.0, gap = 0.0, eps_r = 11.45, trench_depth = 0.0;
    double target_z0 = 0.0;
    bool have_w = false, have_target = false;
};

int run_design_line(const DesignLineArgs& a) {
    using namespace cpwlab;
    if (a.have_target) {
        const double w = width_for_impedance(a.target_z0, a.gap, a.eps_r, a.trench_depth);
        const LineParams lp = line_params({w, a.gap, a.trench_depth, a.eps_r});
        nlohmann::json j = to_record(lp);
        j["w_m"] = w;
        j["gap_m"] = a.gap;
        j["trench_depth_m"] = a.trench_depth;
        j["eps_r"] = a.eps_r;
        emit(j);
        return exit_ok;
    }
    const LineParams lp = line_params({a.w, a.gap, a.trench_depth, a.eps_r});
    nlohmann::json j = to_record(lp);
    j["w_m"] = a.w;
    j["gap_m"] = a.gap;
    j["trench_depth_m"] = a.trench_depth;
    j["eps_r"] = a.eps_r;
    emit(j);
    return exit_ok;
}

struct DesignResonatorArgs {
    double w = 0.0, gap = 0.0, eps_r = 11.45, trench_depth = 0.0;
    double f0 = 0.0, length = 0.0;
    bool have_f0 = false, have_length = false;
};

int run_design_resonator(const DesignResonatorArgs& a) {
    using namespace cpwlab;
    const CpwGeometry g{a.w, a.gap, a.trench_depth, a.eps_r};
    double length = a.length, f0 = a.f0;
    if (a.have_f0)
        length = length_for_frequency(a.f0, g);
    else
        f0 = resonator_frequency(g, a.length);
    const LineParams lp = line_params(g);
    nlohmann::json j = to_record(lp);
    j["length_m"] = length;
    j["f0_hz"] = a.have_f0 ? a.f0 : f0;
    j["w_m"] = a.w;
    j["gap_m"] = a.gap;
    j["trench_depth_m"] = a.trench_depth;
    j["eps_r"] = a.eps_r;
    emit(j);
    return exit_ok;
}

struct DesignCouplingArgs {
    double f0 = 0.0, z_res = 50.0, z_feed = 50.0;
    double target_qc = 0.0, c_kappa = 0.0;
    bool have_target = false, have_ck = false;
};

int run_design_coupling(const DesignCouplingArgs& a) {
    using namespace cpwlab;
    nlohmann::json j;
    if (a.have_target) {
        const double ck = coupling_for_qc(a.target_qc, a.f0, a.z_res, a.z_feed);
        j["c_kappa_f"] = ck;
        j["q_c"] = qc_capacitive(ck, a.f0, a.z_res, a.z_feed);
    } else {
        j["c_kappa_f"] = a.c_kappa;
        j["q_c"] = qc_capacitive(a.c_kappa, a.f0, a.z_res, a.z_feed);
    }
    j["f0_hz"] = a.f0;
    j["z_res_ohm"] = a.z_res;
    j["z_feed_ohm"] = a.z_feed;
    emit(j);
    return exit_ok;
}

struct SynthArgs {
    cpwlab::NotchParams p;
    double center = 0.0, span = 0.0, noise = 0.0;
    int points = 201;
    std::uint64_t seed = 1;
    double power_dbm = 0.0;
    bool have_center = false, have_power = false;
    std::string out = "-";
};

int run_synth(const SynthArgs& a) {
    using namespace cpwlab;
    const double center = a.have_center ? a.center : a.p.f0;
    Trace t = synth_trace(a.p, center, a.span, a.points, a.noise, a.seed);
    if (a.have_power) t.meta.power_dbm = a.power_dbm;
    if (a.out == "-")
        write_trace_csv(std::cout, t);
    else
        write_trace_csv(a.out, t);
    return exit_ok;
}

struct FitArgs {
    std::vector<std::string> files;
    int jobs = 1;
    cpwlab::FitOptions options;
};

int run_fit(const FitArgs& a) {
    using namespace cpwlab;
    const std::size_t n = a.files.size();
    std::vector<BatchEntry> entries(n);
    std::vector<Trace> readable;
    std::vector<std::size_t> readable_idx;
    std::vector<bool> io_failed(n, false);
    readable.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        try {
            readable.push_back(a.files[i] == "-" ? read_trace_csv(std::cin)
                                                 : read_trace_csv(a.files[i]));
            readable_idx.push_back(i);
        } catch (const std::exception& e) {
            entries[i].error = e.what();
            entries[i].stage = "io";
            io_failed[i] = true;
        }
    }
    const auto fitted = batch_fit(readable, a.options, a.jobs);
    for (std::size_t k = 0; k < fitted.size(); ++k) entries[readable_idx[k]] = fitted[k];

    std::size_t ok = 0, io_bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        nlohmann::json j;
        if (entries[i].ok()) {
            ++ok;
            j = to_record(*entries[i].result);
        } else {
            if (io_failed[i]) ++io_bad;
            j["error"] = entries[i].error;
            if (!entries[i].stage.empty()) j["stage"] = entries[i].stage;
            std::cerr << a.files[i] << ": " << entries[i].error << "\n";
        }
        j["file"] = a.files[i];
        emit(j);
    }
    if (ok == n) return exit_ok;
    if (ok > 0) return exit_partial;
    return io_bad == n ? exit_usage : exit_fit_failure;
}

struct PhotonsArgs {
    double p_vna_dbm = 0.0, atten_db = 90.0, f0 = 0.0, q_l = 0.0, q_c_mag = 0.0;
};

int run_photons(const PhotonsArgs& a) {
    using namespace cpwlab;
    const PowerPoint pp = PowerPoint::from_source(a.p_vna_dbm, a.atten_db, a.f0, a.q_l, a.q_c_mag);
    nlohmann::json j = to_record(pp);
    j["f0_hz"] = a.f0;
    j["q_l"] = a.q_l;
    j["q_c_mag"] = a.q_c_mag;
    emit(j);
    return exit_ok;
}

struct TlsFitArgs {
    std::string file;
    double f0 = 0.0, temp_k = 0.05;
    cpwlab::FitOptions options;
};

int run_tls_fit(const TlsFitArgs& a) {
    using namespace cpwlab;
    std::ifstream is(a.file, std::ios::binary);
    if (!is) throw SchemaError("cannot open " + a.file);
    const auto pts = read_points_csv(is);
    const TlsFitResult res = fit_tls(pts, a.f0, a.temp_k, a.options);
    if (res.ill_posed) std::cerr << "warning: " << res.warning << "\n";
    nlohmann::json j = to_record(res);
    j["f0_hz"] = a.f0;
    emit(j);
    return exit_ok;
}

struct StatsArgs {
    std::string file;
    bool paper_groups = false;
    bool use_qhp = false;
    bool best = false;
    std::optional<double> f_min, f_max;
    std::vector<std::string> require, exclude;
    std::optional<std::string> group;
    std::optional<std::string> ratio;  // "A:B" -> mean_B/mean_A
};

int run_stats(const StatsArgs& a) {
    using namespace cpwlab;
    const DeviceTable table = parse_device_table(a.file);
    for (const auto& issue : table.issues)
        std::cerr << a.file << " line " << issue.line_no << ": " << issue.message << "\n";

    GroupFilter filter = a.paper_groups ? paper_groups_filter() : GroupFilter{};
    if (a.f_min) filter.f_min_ghz = a.f_min;
    if (a.f_max) filter.f_max_ghz = a.f_max;
    if (a.group) filter.group_prefix = a.group;
    for (const auto& name : a.require) {
        const auto f = flag_from_string(name);
        if (!f) throw SchemaError("unknown flag name '" + name + "'");
        filter.require.push_back(*f);
    }
    for (const auto& name : a.exclude) {
        const auto f = flag_from_string(name);
        if (!f) throw SchemaError("unknown flag name '" + name + "'");
        filter.exclude.push_back(*f);
    }
    const QColumn col = a.use_qhp ? QColumn::high_power : QColumn::low_power;
    const auto stats = group_stats(table.records, filter, col);
    for (const auto& g : stats) emit(to_record(g));

    if (a.best) {
        const DeviceRecord* b = best_device(table.records, col);
        if (b) {
            nlohmann::json j = to_record(*b);
            j["role"] = "best_device";
            emit(j);
        }
    }
    if (a.ratio) {
        const auto colon = a.ratio->find(':');
        if (colon == std::string::npos)
            throw SchemaError("--ratio expects GROUP_A:GROUP_B");
        const std::string ga = a.ratio->substr(0, colon);
        const std::string gb = a.ratio->substr(colon + 1);
        const GroupStats *sa = nullptr, *sb = nullptr;
        for (const auto& g : stats) {
            if (g.group == ga) sa = &g;
            if (g.group == gb) sb = &g;
        }
        if (!sa || !sb)
            throw SchemaError("--ratio groups not present after filtering: " + *a.ratio);
        const RatioReport r = ratio_report(*sa, *sb);
        nlohmann::json j{{"ratio_of", gb + "/" + ga},
                         {"ratio", r.ratio},
                         {"rel_uncertainty", r.rel_uncertainty}};
        emit(j);
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    cpwlab::Config cfg;
    try {
        cfg = cpwlab::resolve_config(prescan_config_path(argc, argv));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }

    CLI::App app{"CPW resonator design and measurement analysis toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // --config may appear after the subcommand
    std::string config_path;
    app.add_option("--config", config_path,
                   "key=value config file (default: $CPWLAB_CONFIG)");

    // design
    auto* design = app.add_subcommand("design", "line, resonator and coupling design math");
    design->require_subcommand(1);
    design->fallthrough();

    DesignLineArgs dl;
    dl.eps_r = cfg.eps_r;
    auto* line = design->add_subcommand("line", "CPW line parameters from geometry");
    auto* dl_w = line->add_option("--w", dl.w, "center-trace width, m");
    line->add_option("--gap", dl.gap, "trace-to-ground gap, m")->required();
    line->add_option("--eps-r", dl.eps_r, "substrate relative permittivity");
    line->add_option("--trench-depth", dl.trench_depth, "substrate etch depth, m");
    auto* dl_t = line->add_option("--target-z0", dl.target_z0,
                                  "solve for the width giving this impedance, ohm");
    dl_t->excludes(dl_w);

    DesignResonatorArgs dr;
    dr.eps_r = cfg.eps_r;
    auto* reso = design->add_subcommand("resonator", "quarter-wave resonator length/frequency");
    reso->add_option("--w", dr.w, "center-trace width, m")->required();
    reso->add_option("--gap", dr.gap, "trace-to-ground gap, m")->required();
    reso->add_option("--eps-r", dr.eps_r, "substrate relative permittivity");
    reso->add_option("--trench-depth", dr.trench_depth, "substrate etch depth, m");
    auto* dr_f = reso->add_option("--f0", dr.f0, "target resonance, Hz");
    auto* dr_l = reso->add_option("--length", dr.length, "resonator length, m");
    dr_f->excludes(dr_l);

    DesignCouplingArgs dc;
    auto* coup = design->add_subcommand("coupling", "elbow-coupler capacitance for a target Q_c");
    coup->add_option("--f0", dc.f0, "resonance, Hz")->required();
    coup->add_option("--z-res", dc.z_res, "resonator impedance, ohm");
    coup->add_option("--z-feed", dc.z_feed, "feedline impedance, ohm");
    auto* dc_t = coup->add_option("--target-qc", dc.target_qc, "coupling Q to synthesize");
    auto* dc_c = coup->add_option("--c-kappa", dc.c_kappa, "coupling capacitance, F");
    dc_t->excludes(dc_c);

    // synth
    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "generate a synthetic notch trace CSV");
    synth->add_option("--f0", sy.p.f0, "resonance, Hz")->required();
    synth->add_option("--ql", sy.p.q_l, "loaded quality factor")->required();
    synth->add_option("--qc", sy.p.q_c_mag, "|Q_c|")->required();
    synth->add_option("--phi", sy.p.phi, "impedance-mismatch angle, rad");
    synth->add_option("--a", sy.p.env_a, "amplitude scale");
    synth->add_option("--alpha", sy.p.env_alpha, "global phase, rad");
    synth->add_option("--tau", sy.p.env_tau, "cable delay, s");
    auto* sy_c = synth->add_option("--center", sy.center, "sweep center, Hz (default: f0)");
    synth->add_option("--span", sy.span, "sweep span, Hz")->required();
    synth->add_option("--points", sy.points, "number of samples (>= 16)");
    synth->add_option("--noise", sy.noise, "complex noise sigma per quadrature");
    synth->add_option("--seed", sy.seed, "RNG seed");
    auto* sy_p = synth->add_option("--power-dbm", sy.power_dbm, "stamp power metadata, dBm");
    synth->add_option("-o,--output", sy.out, "output file, '-' for stdout");

    // fit
    FitArgs ft;
    ft.options.max_iterations = cfg.fit_max_iterations;
    ft.options.step_tol = cfg.fit_step_tol;
    auto* fit = app.add_subcommand("fit", "extract notch parameters from trace CSVs");
    fit->add_option("files", ft.files, "trace CSV files ('-' for stdin)")->required()->expected(-1);
    fit->add_option("--jobs", ft.jobs, "fit files concurrently (results order-preserved)");

    // photons
    PhotonsArgs phn;
    phn.atten_db = cfg.atten_db;
    auto* photons = app.add_subcommand("photons", "photon number from source power and Qs");
    photons->add_option("--p-vna", phn.p_vna_dbm, "source power, dBm")->required();
    photons->add_option("--atten", phn.atten_db, "total line attenuation, dB");
    photons->add_option("--f0", phn.f0, "resonance, Hz")->required();
    photons->add_option("--ql", phn.q_l, "loaded quality factor")->required();
    photons->add_option("--qc", phn.q_c_mag, "|Q_c|")->required();

    // tls-fit
    TlsFitArgs tf;
    tf.temp_k = cfg.temp_k;
    tf.options.max_iterations = cfg.fit_max_iterations;
    tf.options.step_tol = cfg.fit_step_tol;
    auto* tls = app.add_subcommand("tls-fit", "fit the TLS power-dependence model");
    tls->add_option("file", tf.file, "points CSV (n_photons,q_i)")->required();
    tls->add_option("--f0", tf.f0, "resonance, Hz")->required();
    tls->add_option("--temp-k", tf.temp_k, "device temperature, K");

    // stats
    StatsArgs st;
    double st_fmin = 0.0, st_fmax = 0.0;
    std::string st_group, st_ratio;
    auto* stats = app.add_subcommand("stats", "group statistics over a device table CSV");
    stats->add_option("file", st.file, "device table CSV")->required();
    stats->add_flag("--paper-groups", st.paper_groups,
                    "apply the 4-5 GHz / no-airbridge selection");
    stats->add_flag("--use-qhp", st.use_qhp, "aggregate Q_HP instead of Q_LP");
    stats->add_flag("--best", st.best, "also report the best device");
    auto* st_fmin_o = stats->add_option("--f-min", st_fmin, "minimum frequency, GHz");
    auto* st_fmax_o = stats->add_option("--f-max", st_fmax, "maximum frequency, GHz");
    stats->add_option("--require", st.require, "only devices with this flag (repeatable)");
    stats->add_option("--exclude", st.exclude, "drop devices with this flag (repeatable)");
    auto* st_group_o = stats->add_option("--group", st_group, "restrict to one group label");
    auto* st_ratio_o =
        stats->add_option("--ratio", st_ratio, "report mean ratio GROUP_A:GROUP_B (B/A)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (app.got_subcommand(design)) {
            if (design->got_subcommand(line)) {
                dl.have_w = dl_w->count() > 0;
                dl.have_target = dl_t->count() > 0;
                if (!dl.have_w && !dl.have_target)
                    throw CLI::RequiredError("design line: one of --w / --target-z0");
                return run_design_line(dl);
            }
            if (design->got_subcommand(reso)) {
                dr.have_f0 = dr_f->count() > 0;
                dr.have_length = dr_l->count() > 0;
                if (!dr.have_f0 && !dr.have_length)
                    throw CLI::RequiredError("design resonator: one of --f0 / --length");
                return run_design_resonator(dr);
            }
            dc.have_target = dc_t->count() > 0;
            dc.have_ck = dc_c->count() > 0;
            if (!dc.have_target && !dc.have_ck)
                throw CLI::RequiredError("design coupling: one of --target-qc / --c-kappa");
            return run_design_coupling(dc);
        }
        if (app.got_subcommand(synth)) {
            sy.have_center = sy_c->count() > 0;
            sy.have_power = sy_p->count() > 0;
            return run_synth(sy);
        }
        if (app.got_subcommand(fit)) return run_fit(ft);
        if (app.got_subcommand(photons)) return run_photons(phn);
        if (app.got_subcommand(tls)) return run_tls_fit(tf);
        if (app.got_subcommand(stats)) {
            if (st_fmin_o->count()) st.f_min = st_fmin;
            if (st_fmax_o->count()) st.f_max = st_fmax;
            if (st_group_o->count()) st.group = st_group;
            if (st_ratio_o->count()) st.ratio = st_ratio;
            return run_stats(st);
        }
    } catch (const CLI::RequiredError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const cpwlab::NoSolutionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_fit_failure;
    } catch (const cpwlab::FitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_fit_failure;
    } catch (const cpwlab::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_ok;
}
