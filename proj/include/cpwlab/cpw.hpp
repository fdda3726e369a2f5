#pragma once

// Conformal-mapping parameters of a coplanar waveguide on a (possibly
// trenched) substrate, and the design inverses used when laying out
// quarter-wave resonators: width for a target impedance, length for a
// target frequency, coupling capacitance for a target Q_c.

#include <cmath>
#include <string>

#include "cpwlab/constants.hpp"
#include "cpwlab/elliptic.hpp"
#include "cpwlab/errors.hpp"

namespace cpwlab {

struct CpwGeometry {
    double trace_width = 0.0;   // center-trace width w, meters
    double gap = 0.0;           // trace-to-ground gap, meters
    double trench_depth = 0.0;  // substrate removal depth d, meters
    double eps_r = 11.45;       // substrate relative permittivity

    void validate() const {
        if (!(trace_width > 0.0)) throw std::invalid_argument("trace_width must be > 0");
        if (!(gap > 0.0)) throw std::invalid_argument("gap must be > 0");
        if (!(trench_depth >= 0.0)) throw std::invalid_argument("trench_depth must be >= 0");
        if (!(eps_r >= 1.0)) throw std::invalid_argument("eps_r must be >= 1");
    }

    // k0 = w/(w + 2 gap), strictly inside (0, 1) for positive w and gap.
    double k0() const { return trace_width / (trace_width + 2.0 * gap); }
};

struct LineParams {
    double z0 = 0.0;         // characteristic impedance, ohm
    double eps_eff = 1.0;    // effective permittivity
    double v_ph = 0.0;       // phase velocity, m/s
    double c_per_len = 0.0;  // F/m
    double l_per_len = 0.0;  // H/m
};

struct ResonatorDesign {
    CpwGeometry geometry;
    double length = 0.0;  // meters
    double f0 = 0.0;      // Hz, quarter-wave mode
};

// Effective permittivity with a trench of depth d etched into the gaps:
// the removed material is a surface layer treated by partial
// capacitances, eps_eff(d) = 1 + (eps_r - 1) (1/2 - q(d)) with filling
// factor q(d) built from the sinh-mapped modulus of the layer. q(0) = 0
// recovers the semi-infinite half-space value (eps_r + 1)/2; q -> 1/2 as
// d -> infinity leaves bare vacuum. Lateral undercut beneath the metal is
// not modeled.
inline double eps_eff_trenched(const CpwGeometry& g) {
    g.validate();
    if (g.eps_r == 1.0) return 1.0;
    if (g.trench_depth == 0.0) return 0.5 * (g.eps_r + 1.0);

    const double w = g.trace_width;
    const double b = g.trace_width + 2.0 * g.gap;
    const double xa = pi * w / (4.0 * g.trench_depth);
    const double xb = pi * b / (4.0 * g.trench_depth);

    // ln k_d = ln sinh(xa) - ln sinh(xb), evaluated in log space once the
    // arguments would overflow sinh.
    double log_kd;
    if (xb < 300.0) {
        log_kd = std::log(std::sinh(xa) / std::sinh(xb));
    } else {
        log_kd = (xa - xb) + std::log1p(-std::exp(-2.0 * xa)) - std::log1p(-std::exp(-2.0 * xb));
    }

    const double q = 0.5 * detail::k_ratio_from_log(log_kd) / k_ratio(g.k0());
    return 1.0 + (g.eps_r - 1.0) * (0.5 - q);
}

// Impedance and secondary line constants. Kinetic inductance is neglected
// (thick-film limit); c/l per length are derived from z0 and v_ph.
inline LineParams line_params(const CpwGeometry& g) {
    g.validate();
    LineParams p;
    p.eps_eff = eps_eff_trenched(g);
    p.z0 = 30.0 * pi / (std::sqrt(p.eps_eff) * k_ratio(g.k0()));
    p.v_ph = speed_of_light / std::sqrt(p.eps_eff);
    p.c_per_len = 1.0 / (p.z0 * p.v_ph);
    p.l_per_len = p.z0 / p.v_ph;
    return p;
}

// Quarter-wave resonance of a shorted line of the given length.
inline double resonator_frequency(const CpwGeometry& g, double length) {
    if (!(length > 0.0)) throw std::invalid_argument("length must be > 0");
    return speed_of_light / (4.0 * length * std::sqrt(eps_eff_trenched(g)));
}

inline double length_for_frequency(double f0, const CpwGeometry& g) {
    if (!(f0 > 0.0)) throw std::invalid_argument("f0 must be > 0");
    return speed_of_light / (4.0 * f0 * std::sqrt(eps_eff_trenched(g)));
}

inline ResonatorDesign quarter_wave_design(const CpwGeometry& g, double length) {
    ResonatorDesign d;
    d.geometry = g;
    d.length = length;
    d.f0 = resonator_frequency(g, length);
    return d;
}

// Bisection for the trace width giving the target impedance at fixed gap.
// z0 is strictly decreasing in w, so the root is unique when bracketed.
inline double width_for_impedance(double target_z0, double gap, double eps_r,
                                  double trench_depth) {
    if (!(target_z0 > 0.0)) throw std::invalid_argument("target impedance must be > 0");
    double lo = 0.1e-6;
    double hi = 1e-3;
    const auto z_of = [&](double w) {
        return line_params({w, gap, trench_depth, eps_r}).z0;
    };
    const double z_lo = z_of(lo);  // narrow trace: high impedance
    const double z_hi = z_of(hi);
    if (target_z0 > z_lo || target_z0 < z_hi)
        throw NoSolutionError("target impedance " + std::to_string(target_z0) +
                                  " ohm outside achievable range [" + std::to_string(z_hi) +
                                  ", " + std::to_string(z_lo) + "] for w in [0.1 um, 1 mm]",
                              z_hi, z_lo);
    double w = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        w = 0.5 * (lo + hi);
        const double z = z_of(w);
        if (std::abs(z - target_z0) < 1e-6 && hi - lo < 1e-10) break;
        if (z > target_z0)
            lo = w;  // widen
        else
            hi = w;
    }
    return w;
}

// Coupling quality factor of a lumped elbow coupler (series c_kappa into a
// notch-type quarter-wave resonator shunting a matched feedline):
// Q_c = pi / (2 w0^2 C^2 Z_res Z_feed).
inline double qc_capacitive(double c_kappa, double f0, double z_res, double z_feed) {
    if (!(c_kappa > 0.0 && f0 > 0.0 && z_res > 0.0 && z_feed > 0.0))
        throw std::invalid_argument("qc_capacitive requires positive arguments");
    const double w0 = 2.0 * pi * f0;
    return pi / (2.0 * w0 * w0 * c_kappa * c_kappa * z_res * z_feed);
}

inline double coupling_for_qc(double target_qc, double f0, double z_res, double z_feed) {
    if (!(target_qc > 0.0 && f0 > 0.0 && z_res > 0.0 && z_feed > 0.0))
        throw std::invalid_argument("coupling_for_qc requires positive arguments");
    const double w0 = 2.0 * pi * f0;
    return std::sqrt(pi / (2.0 * w0 * w0 * target_qc * z_res * z_feed));
}

}  // namespace cpwlab
