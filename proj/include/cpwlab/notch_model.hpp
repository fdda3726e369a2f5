#pragma once

// Forward model of a notch-port resonator seen through an imperfect
// environment:
//
//   S21(f) = a e^{i alpha} e^{-2 pi i f tau}
//            [1 - (Q_l/|Q_c|) e^{i phi} / (1 + 2 i Q_l (f/f0 - 1))]
//
// plus the diameter-corrected internal quality factor and a seeded
// synthetic-trace generator for fitter tests.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>

#include "cpwlab/constants.hpp"
#include "cpwlab/errors.hpp"
#include "cpwlab/trace.hpp"

namespace cpwlab {

struct NotchParams {
    double f0 = 0.0;        // Hz
    double q_l = 0.0;       // loaded quality factor
    double q_c_mag = 0.0;   // |Q_c|
    double phi = 0.0;       // impedance-mismatch angle, rad
    double env_a = 1.0;     // amplitude scale
    double env_alpha = 0.0; // global phase, rad
    double env_tau = 0.0;   // cable delay, s

    void validate() const {
        if (!(f0 > 0.0)) throw std::invalid_argument("f0 must be > 0");
        if (!(q_l > 0.0)) throw std::invalid_argument("q_l must be > 0");
        if (!(q_c_mag > 0.0)) throw std::invalid_argument("q_c_mag must be > 0");
        if (!(std::abs(phi) < 0.5 * pi))
            throw std::invalid_argument("|phi| must be < pi/2");
        if (!(env_a > 0.0)) throw std::invalid_argument("env_a must be > 0");
        if (!(1.0 / q_l - std::cos(phi) / q_c_mag > 0.0))
            throw std::invalid_argument("diameter correction gives non-positive Q_i");
    }
};

inline std::complex<double> notch_s21(const NotchParams& p, double f) {
    const std::complex<double> i(0.0, 1.0);
    const std::complex<double> env =
        p.env_a * std::exp(i * p.env_alpha) * std::exp(-2.0 * pi * i * f * p.env_tau);
    const std::complex<double> resonance =
        (p.q_l / p.q_c_mag) * std::exp(i * p.phi) /
        (1.0 + 2.0 * i * p.q_l * (f / p.f0 - 1.0));
    return env * (1.0 - resonance);
}

// Q_i = 1 / (1/Q_l - cos(phi)/|Q_c|). Throws when the mismatch-corrected
// denominator is not positive.
inline double qi_from_diameter_correction(double q_l, double q_c_mag, double phi) {
    if (!(q_l > 0.0 && q_c_mag > 0.0))
        throw std::invalid_argument("quality factors must be positive");
    const double denom = 1.0 / q_l - std::cos(phi) / q_c_mag;
    if (!(denom > 0.0))
        throw UnphysicalParamsError("1/q_l - cos(phi)/q_c_mag = " + std::to_string(denom) +
                                    " is not positive");
    return 1.0 / denom;
}

// Uniformly sampled model trace with independent complex Gaussian noise of
// standard deviation noise_sigma per quadrature. Deterministic per seed.
inline Trace synth_trace(const NotchParams& p, double f_center, double span, int n_points,
                         double noise_sigma, std::uint64_t seed) {
    p.validate();
    if (n_points < 16) throw std::invalid_argument("n_points must be >= 16");
    if (!(span > 0.0)) throw std::invalid_argument("span must be > 0");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");

    Trace t;
    t.freqs.reserve(n_points);
    t.s21.reserve(n_points);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    const double f_lo = f_center - 0.5 * span;
    const double df = span / (n_points - 1);
    for (int k = 0; k < n_points; ++k) {
        const double f = f_lo + k * df;
        std::complex<double> s = notch_s21(p, f);
        if (noise_sigma > 0.0) {
            const double nr = gauss(rng);
            const double ni = gauss(rng);
            s += std::complex<double>(nr, ni);
        }
        t.freqs.push_back(f);
        t.s21.push_back(s);
    }
    return t;
}

}  // namespace cpwlab
