#pragma once

// Notch-port parameter extraction: delay removal, algebraic circle fit,
// phase-vs-frequency fit, environment normalization off the resonance
// circle, then a joint damped least-squares refinement of all seven model
// parameters on the complex residuals.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpwlab/errors.hpp"
#include "cpwlab/least_squares.hpp"
#include "cpwlab/notch_model.hpp"
#include "cpwlab/trace.hpp"

namespace cpwlab {

struct FitOptions {
    int max_iterations = 200;
    double step_tol = 1e-10;
    // Resonance detectability threshold: circle diameter must exceed this
    // multiple of the robust noise estimate.
    double no_resonance_snr = 5.0;
    // Map a non-positive diameter-correction denominator to Q_i = +inf
    // instead of throwing; used when fitting deliberately lossless data.
    bool allow_nonpositive_qi = false;
    // Return with converged=false instead of throwing on iteration cap.
    bool throw_on_nonconvergence = true;
};

struct ParamStdErr {
    double f0 = 0.0, q_l = 0.0, q_c_mag = 0.0, phi = 0.0;
    double env_a = 0.0, env_alpha = 0.0, env_tau = 0.0;
};

struct FitResult {
    NotchParams params;
    double q_i = 0.0;
    ParamStdErr std_err;
    double rms_residual = 0.0;  // sqrt(mean |s_model - s_data|^2)
    int n_iterations = 0;
    bool converged = false;
};

namespace detail {

inline std::vector<double> unwrap_phase(std::span<const std::complex<double>> pts) {
    std::vector<double> th(pts.size());
    double offset = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double raw = std::arg(pts[i]);
        if (i > 0) {
            double prev = th[i - 1];
            double cur = raw + offset;
            while (cur - prev > pi) {
                offset -= 2.0 * pi;
                cur -= 2.0 * pi;
            }
            while (cur - prev < -pi) {
                offset += 2.0 * pi;
                cur += 2.0 * pi;
            }
            th[i] = cur;
        } else {
            th[i] = raw;
        }
    }
    return th;
}

struct SlopeFit {
    double slope = 0.0;
    double weight = 0.0;  // sum of squared frequency deviations
};

inline SlopeFit phase_slope(std::span<const double> f, std::span<const std::complex<double>> s) {
    const auto th = unwrap_phase(s);
    double fm = 0.0, tm = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        fm += f[i];
        tm += th[i];
    }
    fm /= f.size();
    tm /= th.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        sxx += (f[i] - fm) * (f[i] - fm);
        sxy += (f[i] - fm) * (th[i] - tm);
    }
    return {sxx > 0.0 ? sxy / sxx : 0.0, sxx};
}

inline double wrap_to_pi(double a) {
    a = std::fmod(a + pi, 2.0 * pi);
    if (a < 0.0) a += 2.0 * pi;
    return a - pi;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + mid);
        return 0.5 * (lo + hi);
    }
    return hi;
}

}  // namespace detail

// Cable delay from the phase slope of the trace edges: independent linear
// regressions of unwrapped phase over the outer 20% of samples at each
// span edge, combined by their regression weights; tau = slope / (-2 pi).
// Assumes the resonance does not occupy more than half the span.
inline double estimate_delay(const Trace& trace) {
    trace.validate();
    const std::size_t n = trace.size();
    const std::size_t n_edge = static_cast<std::size_t>(0.2 * static_cast<double>(n));
    if (2 * n_edge < 8)
        throw InsufficientDataError("delay",
                                    "need >= 8 edge samples, have " + std::to_string(2 * n_edge));
    const std::span<const double> f(trace.freqs);
    const std::span<const std::complex<double>> s(trace.s21);
    const auto left = detail::phase_slope(f.first(n_edge), s.first(n_edge));
    const auto right = detail::phase_slope(f.last(n_edge), s.last(n_edge));
    const double w = left.weight + right.weight;
    const double slope = (left.slope * left.weight + right.slope * right.weight) / w;
    return slope / (-2.0 * pi);
}

struct CircleFitResult {
    std::complex<double> center;
    double radius = 0.0;
};

// Algebraic circle fit (Taubin): minimizes the algebraic distance via the
// moment matrix of the centered data; the characteristic root is taken by
// Newton iteration from zero, which lands on the smallest positive root.
inline CircleFitResult circle_fit(std::span<const std::complex<double>> pts) {
    const std::size_t n = pts.size();
    if (n < 8) throw std::invalid_argument("circle_fit needs >= 8 points");

    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p.real();
        my += p.imag();
    }
    mx /= n;
    my /= n;

    double mxx = 0.0, myy = 0.0, mxy = 0.0, mxz = 0.0, myz = 0.0, mzz = 0.0;
    for (const auto& p : pts) {
        const double x = p.real() - mx;
        const double y = p.imag() - my;
        const double z = x * x + y * y;
        mxx += x * x;
        myy += y * y;
        mxy += x * y;
        mxz += x * z;
        myz += y * z;
        mzz += z * z;
    }
    mxx /= n;
    myy /= n;
    mxy /= n;
    mxz /= n;
    myz /= n;
    mzz /= n;

    const double mz = mxx + myy;
    const double cov_xy = mxx * myy - mxy * mxy;
    const double var_z = mzz - mz * mz;
    if (!(mz > 0.0)) throw DegenerateGeometryError("all points coincide");

    const double a3 = 4.0 * mz;
    const double a2 = -3.0 * mz * mz - mzz;
    const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
    const double a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) -
                      var_z * cov_xy;

    double x = 0.0, y = a0;
    for (int iter = 0; iter < 64; ++iter) {
        const double dy = a1 + x * (2.0 * a2 + 3.0 * a3 * x);
        if (dy == 0.0) break;
        const double x_new = x - y / dy;
        if (!std::isfinite(x_new) || x_new == x) break;
        const double y_new = a0 + x_new * (a1 + x_new * (a2 + x_new * a3));
        if (std::abs(y_new) >= std::abs(y)) break;
        x = x_new;
        y = y_new;
    }

    const double det = x * x - x * mz + cov_xy;
    if (!(std::abs(det) > 1e-14 * mz * mz))
        throw DegenerateGeometryError("points are collinear or coincident");
    const double xc = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    const double yc = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    const double r2 = xc * xc + yc * yc + mz;
    if (!(r2 > 0.0) || !std::isfinite(r2))
        throw DegenerateGeometryError("circle radius is not finite");
    return {{xc + mx, yc + my}, std::sqrt(r2)};
}

struct PhaseFitResult {
    double f0 = 0.0;
    double q_l = 0.0;
    double theta0 = 0.0;  // phase of the resonance point about the center
};

// Least-squares fit of theta(f) = theta0 + 2 atan(2 q_l (1 - f/f0)) to the
// unwrapped phase of the trace translated by the circle center.
inline PhaseFitResult phase_fit(const Trace& trace, std::complex<double> center,
                                const FitOptions& opt = {}) {
    const Trace t = trace.sorted();
    t.validate();
    const std::size_t n = t.size();
    std::vector<std::complex<double>> rel(n);
    for (std::size_t i = 0; i < n; ++i) rel[i] = t.s21[i] - center;
    const auto theta = detail::unwrap_phase(rel);

    // Steepest-phase sample seeds f0; the center slope seeds q_l through
    // d theta/d f |_{f0} = -4 q_l / f0.
    std::size_t best = 1;
    double best_slope = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double sl = (theta[i + 1] - theta[i - 1]) / (t.freqs[i + 1] - t.freqs[i - 1]);
        if (std::abs(sl) > std::abs(best_slope)) {
            best_slope = sl;
            best = i;
        }
    }
    const double f0_init = t.freqs[best];
    const double ql_init = std::clamp(std::abs(best_slope) * f0_init / 4.0, 1.0, 1e9);
    const double th0_init = theta[best];

    Eigen::VectorXd p(3);
    p << f0_init, ql_init, th0_init;
    Eigen::VectorXd scale(3);
    scale << f0_init, std::max(1.0, ql_init), 1.0;

    const auto residual = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd r(n);
        for (std::size_t i = 0; i < n; ++i)
            r[i] = theta[i] - (v[2] + 2.0 * std::atan(2.0 * v[1] * (1.0 - t.freqs[i] / v[0])));
        return r;
    };
    const auto valid = [&](const Eigen::VectorXd& v) { return v[0] > 0.0 && v[1] > 0.0; };

    LsqOptions lo;
    lo.max_iterations = opt.max_iterations;
    lo.step_tol = opt.step_tol;
    const LsqResult res = levenberg_marquardt(residual, p, scale, lo, valid);
    if (!res.converged && opt.throw_on_nonconvergence) {
        std::ostringstream msg;
        msg << "phase fit hit the iteration cap; best so far f0=" << res.params[0]
            << " q_l=" << res.params[1] << " theta0=" << res.params[2];
        throw FitFailureError("phase", msg.str());
    }
    return {res.params[0], res.params[1], detail::wrap_to_pi(res.params[2])};
}

// Full extraction pipeline for a single-resonance trace.
inline FitResult fit_notch(const Trace& trace, const FitOptions& opt = {}) {
    const Trace t = trace.sorted();
    t.validate(16);
    const std::size_t n = t.size();

    // Stage 1: delay. Traces too short for edge regression fall back to a
    // zero initial delay; the joint refinement still fits tau.
    double tau = 0.0;
    try {
        tau = estimate_delay(t);
    } catch (const InsufficientDataError&) {
        tau = 0.0;
    }

    const auto remove_delay = [&](double tau_est) {
        std::vector<std::complex<double>> out(n);
        const std::complex<double> i(0.0, 1.0);
        for (std::size_t k = 0; k < n; ++k)
            out[k] = t.s21[k] * std::exp(i * (2.0 * pi * t.freqs[k] * tau_est));
        return out;
    };

    // Stages 2-4 for a given delay estimate: circle, phase, environment.
    // Returns the 7-parameter start vector for the joint refinement.
    FitOptions stage_opt = opt;
    stage_opt.throw_on_nonconvergence = false;
    const auto stage_init = [&](double tau0, bool check_resonance) {
        const auto plane = remove_delay(tau0);

        CircleFitResult circ;
        try {
            circ = circle_fit(plane);
        } catch (const DegenerateGeometryError& e) {
            throw NoResonanceError(std::string("no resonance found: ") + e.what());
        }

        if (check_resonance) {
            // Robust noise level from point-to-circle residuals; a
            // resonance must stand clear of it.
            std::vector<double> resid(n);
            for (std::size_t i = 0; i < n; ++i)
                resid[i] = std::abs(plane[i] - circ.center) - circ.radius;
            const double med = detail::median_of(resid);
            std::vector<double> absdev(n);
            for (std::size_t i = 0; i < n; ++i) absdev[i] = std::abs(resid[i] - med);
            const double noise = 1.4826 * detail::median_of(absdev);
            if (2.0 * circ.radius < opt.no_resonance_snr * noise)
                throw NoResonanceError("circle diameter " + std::to_string(2.0 * circ.radius) +
                                       " below " + std::to_string(opt.no_resonance_snr) +
                                       "x noise level " + std::to_string(noise));
        }

        // Phase fit is best-effort: it only seeds the refinement.
        Trace plane_trace;
        plane_trace.freqs = t.freqs;
        plane_trace.s21 = plane;
        const PhaseFitResult ph = phase_fit(plane_trace, circ.center, stage_opt);

        // Environment from the off-resonant anchor point, diametrically
        // opposite the resonance point on the circle.
        const std::complex<double> i1(0.0, 1.0);
        const std::complex<double> p_off =
            circ.center + circ.radius * std::exp(i1 * (ph.theta0 + pi));
        const double a0 = std::abs(p_off);
        const double alpha0 = std::arg(p_off);
        const double phi0 = detail::wrap_to_pi(ph.theta0 + pi - alpha0);
        const double qc0 = ph.q_l * a0 / (2.0 * circ.radius);

        Eigen::VectorXd p(7);
        p << ph.f0, ph.q_l, qc0, phi0, a0, alpha0, tau0;
        return p;
    };

    // Stage 5: joint refinement of (f0, q_l, |q_c|, phi, a, alpha, tau) on
    // the complex residuals of the full model. The environment phase is
    // referenced to the sweep center internally, alpha' = alpha - 2 pi
    // f_ref tau, which decorrelates the alpha and tau columns of the
    // Jacobian over a narrow span.
    const double f_ref = 0.5 * (t.freqs.front() + t.freqs.back());
    const auto model_at = [&](const Eigen::VectorXd& v, double f) {
        NotchParams np;
        np.f0 = v[0];
        np.q_l = v[1];
        np.q_c_mag = v[2];
        np.phi = v[3];
        np.env_a = v[4];
        np.env_alpha = v[5] + 2.0 * pi * f_ref * v[6];
        np.env_tau = v[6];
        return notch_s21(np, f);
    };
    const auto residual = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd r(2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::complex<double> d = model_at(v, t.freqs[k]) - t.s21[k];
            r[2 * k] = d.real();
            r[2 * k + 1] = d.imag();
        }
        return r;
    };
    const auto valid = [](const Eigen::VectorXd& v) {
        return v[0] > 0.0 && v[1] > 0.0 && v[2] > 0.0 && v[4] > 0.0;
    };
    LsqOptions lo;
    lo.max_iterations = opt.max_iterations;
    lo.step_tol = opt.step_tol;

    const auto refine = [&](Eigen::VectorXd p0) {
        // internal parameterization: alpha -> alpha' about f_ref
        p0[5] = detail::wrap_to_pi(p0[5] - 2.0 * pi * f_ref * p0[6]);
        Eigen::VectorXd scale(7);
        scale << p0[0], std::max(1.0, p0[1]), std::max(1.0, p0[2]), 0.1,
            std::max(0.01, p0[4]), 0.1, 1e-9;
        return levenberg_marquardt(residual, p0, scale, lo, valid);
    };

    LsqResult res = refine(stage_init(tau, true));

    // The edge-based delay estimate carries the resonance-tail slope as a
    // bias, which can strand the refinement in a neighboring valley. Each
    // refined delay gives a less biased rebuild of the geometric stages;
    // iterate the re-seeding until the optimum stops improving.
    for (int pass = 0; pass < 3; ++pass) {
        if (res.converged && res.ssr <= 1e-24 * static_cast<double>(n)) break;
        try {
            const LsqResult next = refine(stage_init(res.params[6], false));
            const bool better = next.ssr < res.ssr && (next.converged || !res.converged);
            const bool significant = next.ssr < 0.99 * res.ssr;
            if (better) res = next;
            if (!better || !significant) break;
        } catch (const FitError&) {
            break;
        }
    }

    FitResult fit;
    fit.params.f0 = res.params[0];
    fit.params.q_l = res.params[1];
    fit.params.q_c_mag = res.params[2];
    fit.params.phi = detail::wrap_to_pi(res.params[3]);
    fit.params.env_a = res.params[4];
    fit.params.env_alpha = detail::wrap_to_pi(res.params[5] + 2.0 * pi * f_ref * res.params[6]);
    fit.params.env_tau = res.params[6];
    fit.n_iterations = res.iterations;
    fit.converged = res.converged;
    fit.rms_residual = std::sqrt(res.ssr / static_cast<double>(n));

    if (!res.converged && opt.throw_on_nonconvergence) {
        std::ostringstream msg;
        msg << "refinement hit the iteration cap after " << res.iterations
            << " iterations; best so far f0=" << fit.params.f0 << " q_l=" << fit.params.q_l
            << " rms=" << fit.rms_residual;
        throw FitFailureError("refine", msg.str());
    }

    const auto& cov = res.covariance;
    fit.std_err.f0 = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.std_err.q_l = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.std_err.q_c_mag = std::sqrt(std::max(0.0, cov(2, 2)));
    fit.std_err.phi = std::sqrt(std::max(0.0, cov(3, 3)));
    fit.std_err.env_a = std::sqrt(std::max(0.0, cov(4, 4)));
    // alpha = alpha' + 2 pi f_ref tau: propagate the internal covariance.
    const double k = 2.0 * pi * f_ref;
    fit.std_err.env_alpha = std::sqrt(std::max(0.0, cov(5, 5) + k * k * cov(6, 6) +
                                                        2.0 * k * cov(5, 6)));
    fit.std_err.env_tau = std::sqrt(std::max(0.0, cov(6, 6)));

    const double denom = 1.0 / fit.params.q_l - std::cos(fit.params.phi) / fit.params.q_c_mag;
    if (denom > 0.0) {
        fit.q_i = 1.0 / denom;
    } else if (opt.allow_nonpositive_qi) {
        fit.q_i = std::numeric_limits<double>::infinity();
    } else {
        throw UnphysicalParamsError("fitted parameters give non-positive Q_i (denominator " +
                                    std::to_string(denom) + ")");
    }
    return fit;
}

struct BatchEntry {
    std::optional<FitResult> result;
    std::string error;      // empty on success
    std::string stage;      // failing pipeline stage, when known

    bool ok() const { return result.has_value(); }
};

// Independent fits, order preserved, failures recorded per trace. With
// jobs > 1 the members run on a thread pool; results are identical to the
// sequential order because each slot is written independently.
inline std::vector<BatchEntry> batch_fit(std::span<const Trace> traces,
                                         const FitOptions& opt = {}, int jobs = 1) {
    std::vector<BatchEntry> out(traces.size());
    const auto run_one = [&](std::size_t i) {
        try {
            out[i].result = fit_notch(traces[i], opt);
        } catch (const FitError& e) {
            out[i].error = e.what();
            out[i].stage = e.stage;
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    };
    if (jobs <= 1 || traces.size() <= 1) {
        for (std::size_t i = 0; i < traces.size(); ++i) run_one(i);
        return out;
    }
    const unsigned n_threads = std::min<std::size_t>(jobs, traces.size());
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::atomic<std::size_t> next{0};
    for (unsigned t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < traces.size(); i = next.fetch_add(1))
                run_one(i);
        });
    for (auto& th : pool) th.join();
    return out;
}

}  // namespace cpwlab
