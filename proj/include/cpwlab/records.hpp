#pragma once

// Line-oriented JSON records for every result type the CLI emits. Keys
// are sorted by the serializer, doubles round-trip exactly, so identical
// inputs always produce identical bytes.

#include <string>

#include <json.hpp>

#include "cpwlab/cpw.hpp"
#include "cpwlab/devices.hpp"
#include "cpwlab/notch_fit.hpp"
#include "cpwlab/power_tls.hpp"

namespace cpwlab {

inline nlohmann::json to_record(const LineParams& p) {
    return {{"z0_ohm", p.z0},
            {"eps_eff", p.eps_eff},
            {"v_ph_m_per_s", p.v_ph},
            {"c_per_len_f_per_m", p.c_per_len},
            {"l_per_len_h_per_m", p.l_per_len}};
}

inline nlohmann::json to_record(const FitResult& r) {
    return {{"f0_hz", r.params.f0},
            {"q_l", r.params.q_l},
            {"q_c_mag", r.params.q_c_mag},
            {"phi_rad", r.params.phi},
            {"q_i", r.q_i},
            {"env_a", r.params.env_a},
            {"env_alpha_rad", r.params.env_alpha},
            {"env_tau_s", r.params.env_tau},
            {"rms_residual", r.rms_residual},
            {"converged", r.converged}};
}

inline FitResult fit_result_from_record(const nlohmann::json& j) {
    FitResult r;
    r.params.f0 = j.at("f0_hz").get<double>();
    r.params.q_l = j.at("q_l").get<double>();
    r.params.q_c_mag = j.at("q_c_mag").get<double>();
    r.params.phi = j.at("phi_rad").get<double>();
    r.params.env_a = j.at("env_a").get<double>();
    r.params.env_alpha = j.at("env_alpha_rad").get<double>();
    r.params.env_tau = j.at("env_tau_s").get<double>();
    r.q_i = j.at("q_i").get<double>();
    r.rms_residual = j.at("rms_residual").get<double>();
    r.converged = j.at("converged").get<bool>();
    return r;
}

inline nlohmann::json to_record(const TlsFitResult& r) {
    nlohmann::json j{{"f_delta0", r.params.f_delta0},
                     {"n_c", r.params.n_c},
                     {"beta", r.params.beta},
                     {"q_other", r.params.q_other},
                     {"temp_k", r.params.temp_k},
                     {"f_delta0_err", r.std_err.f_delta0},
                     {"n_c_err", r.std_err.n_c},
                     {"beta_err", r.std_err.beta},
                     {"q_other_err", r.std_err.q_other},
                     {"rms_residual", r.rms_residual},
                     {"converged", r.converged}};
    if (r.ill_posed) j["warning"] = r.warning;
    return j;
}

inline nlohmann::json to_record(const GroupStats& g) {
    return {{"group", g.group}, {"n", g.n},     {"mean", g.mean},
            {"std", g.std_dev}, {"min", g.min}, {"max", g.max}};
}

inline nlohmann::json to_record(const DeviceRecord& r) {
    return {{"device", r.device_id},
            {"group", r.group_label},
            {"f_ghz", r.f_ghz},
            {"q_lp", r.q_lp},
            {"q_hp", r.q_hp}};
}

inline nlohmann::json to_record(const PowerPoint& p) {
    return {{"p_vna_dbm", p.p_vna_dbm},
            {"atten_db", p.atten_db},
            {"p_applied_w", p.p_applied_w},
            {"n_photons", p.n_photons}};
}

// One record per line.
inline std::string record_line(const nlohmann::json& j) { return j.dump() + "\n"; }

}  // namespace cpwlab
