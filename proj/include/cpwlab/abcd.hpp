#pragma once

// Chain-matrix circuit simulator for a notch-coupled quarter-wave
// resonator: a matched feedline with a shunt branch at its midpoint, the
// branch being the coupling capacitor in series with the input impedance
// of a shorted transmission line. Independent of the closed-form coupling
// expressions, so it can serve as their oracle.

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "cpwlab/constants.hpp"
#include "cpwlab/trace.hpp"

namespace cpwlab {

struct AbcdMatrix {
    std::complex<double> a{1.0}, b{0.0}, c{0.0}, d{1.0};

    AbcdMatrix cascade(const AbcdMatrix& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }

    static AbcdMatrix shunt_admittance(std::complex<double> y) {
        return {1.0, 0.0, y, 1.0};
    }

    // Lossless line segment of characteristic impedance z and electrical
    // length theta (radians).
    static AbcdMatrix line(double z, double theta) {
        const std::complex<double> i(0.0, 1.0);
        return {std::cos(theta), i * z * std::sin(theta),
                i * std::sin(theta) / z, std::cos(theta)};
    }

    // S21 with matched reference impedance z0 at both ports.
    std::complex<double> s21(double z0) const {
        return 2.0 / (a + b / z0 + c * z0 + d);
    }
};

struct NotchCircuit {
    double z_feed = 50.0;   // feedline impedance, ohm
    double z_res = 50.0;    // resonator line impedance, ohm
    double eps_line = 6.225;// effective permittivity of the resonator line
    double length = 0.0;    // resonator physical length, m
    double c_kappa = 0.0;   // coupling capacitance, F
    double q_internal = std::numeric_limits<double>::infinity();
    double feed_delay = 0.0;// total feedline delay, s (split around the tap)
};

// Input impedance of the shorted resonator line: Z tanh(gamma L), with
// alpha = beta/(2 Q_i) injecting the assumed internal loss.
inline std::complex<double> shorted_line_impedance(const NotchCircuit& c, double f) {
    const double w = 2.0 * pi * f;
    const double beta = w * std::sqrt(c.eps_line) / speed_of_light;
    const double alpha = std::isinf(c.q_internal) ? 0.0 : beta / (2.0 * c.q_internal);
    const std::complex<double> gamma(alpha, beta);
    return c.z_res * std::tanh(gamma * c.length);
}

inline std::complex<double> abcd_notch_s21(const NotchCircuit& c, double f) {
    const std::complex<double> i(0.0, 1.0);
    const double w = 2.0 * pi * f;

    std::complex<double> y_branch(0.0, 0.0);
    if (c.c_kappa > 0.0) {
        const std::complex<double> z_branch =
            1.0 / (i * w * c.c_kappa) + shorted_line_impedance(c, f);
        y_branch = 1.0 / z_branch;
    }

    AbcdMatrix total = AbcdMatrix::shunt_admittance(y_branch);
    if (c.feed_delay > 0.0) {
        const double theta = 0.5 * w * c.feed_delay;
        const AbcdMatrix seg = AbcdMatrix::line(c.z_feed, theta);
        total = seg.cascade(total).cascade(seg);
    }
    return total.s21(c.z_feed);
}

inline Trace abcd_notch_sim(const NotchCircuit& c, const std::vector<double>& freqs) {
    Trace t;
    t.freqs = freqs;
    t.s21.reserve(freqs.size());
    for (double f : freqs) t.s21.push_back(abcd_notch_s21(c, f));
    return t.sorted();
}

// Bare quarter-wave frequency of the resonator line (no coupling shift).
inline double quarter_wave_frequency(const NotchCircuit& c) {
    return speed_of_light / (4.0 * c.length * std::sqrt(c.eps_line));
}

}  // namespace cpwlab
