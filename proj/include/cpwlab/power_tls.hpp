#pragma once

// Photon-number calibration from applied power and the saturable TLS loss
// model for the power dependence of the internal quality factor:
//
//   <n>     = 2 Q_l^2 P_applied / (hbar w0^2 |Q_c|)
//   1/Q_i(n) = F d0 tanh(hbar w0 / (2 kB T)) (1 + n/n_c)^(-beta) + 1/Q_other

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cpwlab/constants.hpp"
#include "cpwlab/errors.hpp"
#include "cpwlab/least_squares.hpp"
#include "cpwlab/notch_fit.hpp"

namespace cpwlab {

// dBm source power through a lossy chain to watts at the device.
inline double applied_power(double p_vna_dbm, double atten_db) {
    if (!(atten_db >= 0.0)) throw std::invalid_argument("attenuation must be >= 0 dB");
    return std::pow(10.0, (p_vna_dbm - atten_db - 30.0) / 10.0);
}

// Mean intracavity photon number for a notch-coupled resonator. The
// prefactor convention 2 Q_l^2/(hbar w0^2 Q_c) is pinned here; all
// downstream numbers use it consistently.
inline double photon_number(double p_applied_w, double f0, double q_l, double q_c_mag) {
    if (!(p_applied_w > 0.0 && f0 > 0.0 && q_l > 0.0 && q_c_mag > 0.0))
        throw std::invalid_argument("photon_number requires positive arguments");
    const double w0 = 2.0 * pi * f0;
    return 2.0 / (hbar * w0 * w0) * (q_l * q_l / q_c_mag) * p_applied_w;
}

struct PowerPoint {
    double p_vna_dbm = 0.0;
    double atten_db = 0.0;
    double p_applied_w = 0.0;
    double n_photons = 0.0;

    static PowerPoint from_source(double p_vna_dbm, double atten_db, double f0, double q_l,
                                  double q_c_mag) {
        PowerPoint pp;
        pp.p_vna_dbm = p_vna_dbm;
        pp.atten_db = atten_db;
        pp.p_applied_w = applied_power(p_vna_dbm, atten_db);
        pp.n_photons = photon_number(pp.p_applied_w, f0, q_l, q_c_mag);
        return pp;
    }
};

struct TlsParams {
    double f_delta0 = 0.0;  // intrinsic TLS loss F * delta0_TLS
    double n_c = 1.0;       // critical photon number
    double beta = 0.5;      // saturation exponent, (0, 2]
    double q_other = 0.0;   // power-independent residual quality factor
    double temp_k = 0.05;

    void validate() const {
        if (!(f_delta0 > 0.0)) throw std::invalid_argument("f_delta0 must be > 0");
        if (!(n_c > 0.0)) throw std::invalid_argument("n_c must be > 0");
        if (!(beta > 0.0 && beta <= 2.0)) throw std::invalid_argument("beta must be in (0, 2]");
        if (!(q_other > 0.0)) throw std::invalid_argument("q_other must be > 0");
        if (!(temp_k > 0.0)) throw std::invalid_argument("temp_k must be > 0");
    }
};

inline double tls_qi(double n, const TlsParams& p, double f0) {
    p.validate();
    if (!(n >= 0.0)) throw std::invalid_argument("photon number must be >= 0");
    if (!(f0 > 0.0)) throw std::invalid_argument("f0 must be > 0");
    const double w0 = 2.0 * pi * f0;
    const double thermal = std::tanh(hbar * w0 / (2.0 * boltzmann * p.temp_k));
    const double inv_q =
        p.f_delta0 * thermal * std::pow(1.0 + n / p.n_c, -p.beta) + 1.0 / p.q_other;
    return 1.0 / inv_q;
}

struct TlsStdErr {
    double f_delta0 = 0.0, n_c = 0.0, beta = 0.0, q_other = 0.0;
};

struct TlsFitResult {
    TlsParams params;
    TlsStdErr std_err;
    double rms_residual = 0.0;  // on log(1/q_i)
    int n_iterations = 0;
    bool converged = false;
    bool ill_posed = false;     // photon range spans fewer than 3 decades
    std::string warning;
};

// Damped least squares of the TLS model on log(1/q_i) residuals.
// Points are (n_photons, q_i) pairs; needs at least 5 of them, and flags
// the fit as ill-posed when the positive photon numbers span fewer than
// three decades.
inline TlsFitResult fit_tls(std::span<const std::pair<double, double>> points, double f0,
                            double temp_k, const FitOptions& opt = {}) {
    if (points.size() < 5)
        throw std::invalid_argument("fit_tls needs >= 5 points, got " +
                                    std::to_string(points.size()));
    for (const auto& [n, qi] : points)
        if (!(n >= 0.0) || !(qi > 0.0))
            throw std::invalid_argument("fit_tls points need n >= 0 and q_i > 0");

    TlsFitResult out;
    double n_min_pos = std::numeric_limits<double>::infinity();
    double n_max = 0.0;
    double qi_min = std::numeric_limits<double>::infinity();
    double qi_max = 0.0;
    for (const auto& [n, qi] : points) {
        if (n > 0.0) n_min_pos = std::min(n_min_pos, n);
        n_max = std::max(n_max, n);
        qi_min = std::min(qi_min, qi);
        qi_max = std::max(qi_max, qi);
    }
    if (!(n_max > 0.0 && std::isfinite(n_min_pos)) ||
        std::log10(n_max / n_min_pos) < 3.0) {
        out.ill_posed = true;
        out.warning = "photon numbers span fewer than 3 decades; fit may be ill-posed";
    }

    const double w0 = 2.0 * pi * f0;
    const double thermal = std::tanh(hbar * w0 / (2.0 * boltzmann * temp_k));

    // Initial guesses: plateau from the highest-power point, TLS loss from
    // the low-power excess, n_c at the geometric middle of the sweep.
    const double q_other0 = 1.05 * qi_max;
    const double loss0 = std::max(1.0 / qi_min - 1.0 / q_other0, 1e-12) / thermal;
    const double nc0 = std::sqrt(std::max(n_min_pos, 1e-3) * std::max(n_max, 1.0));

    Eigen::VectorXd p(4);
    p << loss0, nc0, 0.5, q_other0;
    Eigen::VectorXd scale(4);
    scale << std::max(loss0, 1e-9), std::max(nc0, 1.0), 0.1, q_other0;

    const auto inv_q = [&](const Eigen::VectorXd& v, double n) {
        return v[0] * thermal * std::pow(1.0 + n / v[1], -v[2]) + 1.0 / v[3];
    };
    const auto residual = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd r(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            r[i] = std::log(inv_q(v, points[i].first)) - std::log(1.0 / points[i].second);
        return r;
    };
    const auto valid = [](const Eigen::VectorXd& v) {
        return v[0] > 0.0 && v[1] > 0.0 && v[2] > 0.0 && v[2] <= 2.0 && v[3] > 0.0;
    };

    LsqOptions lo;
    lo.max_iterations = opt.max_iterations;
    lo.step_tol = opt.step_tol;
    const LsqResult res = levenberg_marquardt(residual, p, scale, lo, valid);
    if (!res.converged && opt.throw_on_nonconvergence) {
        std::ostringstream msg;
        msg << "TLS fit hit the iteration cap; best so far f_delta0=" << res.params[0]
            << " n_c=" << res.params[1] << " beta=" << res.params[2]
            << " q_other=" << res.params[3];
        throw FitFailureError("tls", msg.str());
    }

    out.params.f_delta0 = res.params[0];
    out.params.n_c = res.params[1];
    out.params.beta = res.params[2];
    out.params.q_other = res.params[3];
    out.params.temp_k = temp_k;
    out.std_err.f_delta0 = std::sqrt(std::max(0.0, res.covariance(0, 0)));
    out.std_err.n_c = std::sqrt(std::max(0.0, res.covariance(1, 1)));
    out.std_err.beta = std::sqrt(std::max(0.0, res.covariance(2, 2)));
    out.std_err.q_other = std::sqrt(std::max(0.0, res.covariance(3, 3)));
    out.rms_residual = std::sqrt(res.ssr / static_cast<double>(points.size()));
    out.n_iterations = res.iterations;
    out.converged = res.converged;
    return out;
}

// CSV `n_photons,q_i` reader for TLS fits.
inline std::vector<std::pair<double, double>> read_points_csv(std::istream& is) {
    std::vector<std::pair<double, double>> pts;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (detail::trim(line) != "n_photons,q_i")
                throw SchemaError("line " + std::to_string(line_no) +
                                  ": expected header 'n_photons,q_i', got '" + line + "'");
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv(line);
        if (fields.size() != 2)
            throw SchemaError("line " + std::to_string(line_no) + ": expected 2 fields");
        pts.emplace_back(detail::parse_double(fields[0], line_no, "n_photons"),
                         detail::parse_double(fields[1], line_no, "q_i"));
    }
    return pts;
}

inline void write_points_csv(std::ostream& os,
                             std::span<const std::pair<double, double>> pts) {
    os << "n_photons,q_i\n";
    for (const auto& [n, qi] : pts)
        os << detail::format_double(n) << ',' << detail::format_double(qi) << "\n";
}

}  // namespace cpwlab
