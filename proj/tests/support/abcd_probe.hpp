#pragma once

// Shared helper for the coupling-oracle tests: locate the notch of an
// ABCD-simulated circuit, sample a window around it, and fit the notch
// model to extract quality factors.

#include <cmath>
#include <vector>

#include "cpwlab/abcd.hpp"
#include "cpwlab/cpw.hpp"
#include "cpwlab/notch_fit.hpp"

namespace abcd_probe {

// Frequency of minimum |S21| near the bare quarter-wave resonance.
inline double find_notch(const cpwlab::NotchCircuit& c) {
    const double f_bare = cpwlab::quarter_wave_frequency(c);
    double best_f = f_bare;
    double best_mag = 1e300;
    const int n = 20001;
    for (int i = 0; i < n; ++i) {
        const double f = f_bare * (0.99 + 0.02 * i / (n - 1));
        const double mag = std::abs(cpwlab::abcd_notch_s21(c, f));
        if (mag < best_mag) {
            best_mag = mag;
            best_f = f;
        }
    }
    return best_f;
}

// Simulate a window of the given number of linewidths around the notch
// (linewidth taken from the expected loaded Q) and fit it.
inline cpwlab::FitResult fit_simulated_notch(const cpwlab::NotchCircuit& c, double q_l_expected,
                                             double linewidths = 40.0, int n_points = 801) {
    const double f_notch = find_notch(c);
    const double span = linewidths * f_notch / q_l_expected;
    std::vector<double> freqs(n_points);
    for (int i = 0; i < n_points; ++i)
        freqs[i] = f_notch - 0.5 * span + span * i / (n_points - 1);
    const cpwlab::Trace t = cpwlab::abcd_notch_sim(c, freqs);
    cpwlab::FitOptions opt;
    opt.allow_nonpositive_qi = true;  // lossless circuits pin 1/q_i at zero
    return cpwlab::fit_notch(t, opt);
}

}  // namespace abcd_probe
