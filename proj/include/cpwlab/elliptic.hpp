#pragma once

// Complete elliptic integrals by arithmetic-geometric-mean iteration.
// K(k) and E(k) converge quadratically; the K(k)/K(k') ratio switches to
// log-asymptotic forms near k = 0 and k = 1 where the direct quotient
// loses precision.

#include <cmath>
#include <string>

#include "cpwlab/constants.hpp"
#include "cpwlab/errors.hpp"

namespace cpwlab {

// Modulus in [0, 1] with a cancellation-free complementary modulus.
class EllipticModulus {
public:
    explicit EllipticModulus(double k) : k_(k) {
        if (!(k >= 0.0 && k <= 1.0))
            throw DomainError("elliptic modulus must lie in [0, 1], got " + std::to_string(k));
    }
    double value() const { return k_; }
    // sqrt((1-k)(1+k)) instead of sqrt(1-k^2): exact factors near k = 1.
    double complement() const { return std::sqrt((1.0 - k_) * (1.0 + k_)); }

private:
    double k_;
};

namespace detail {

inline double agm(double a, double b) {
    // Quadratic convergence: <= 8 iterations to 1e-16 relative.
    for (int i = 0; i < 64 && std::abs(a - b) > 1e-16 * a; ++i) {
        const double am = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = am;
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Complete elliptic integral of the first kind, K(k) = agm-based,
// relative accuracy ~1e-15. Diverges at k = 1.
inline double elliptic_k(double k) {
    const EllipticModulus m(k);
    if (k >= 1.0 - 1e-15)
        throw DivergenceError("K(k) diverges for k -> 1, got k = " + std::to_string(k));
    return pi / (2.0 * detail::agm(1.0, m.complement()));
}

inline double elliptic_k(const EllipticModulus& m) { return elliptic_k(m.value()); }

// Complete elliptic integral of the second kind. E(1) = 1 exactly.
inline double elliptic_e(double k) {
    const EllipticModulus m(k);
    if (k == 1.0) return 1.0;
    double a = 1.0;
    double b = m.complement();
    double c = k;
    double sum = 0.5 * c * c;
    double p = 0.5;
    for (int i = 0; i < 64 && std::abs(a - b) > 1e-16 * a; ++i) {
        c = 0.5 * (a - b);
        const double am = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = am;
        p *= 2.0;
        sum += p * c * c;
    }
    const double big_k = pi / (2.0 * a);
    return big_k * (1.0 - sum);
}

inline double elliptic_e(const EllipticModulus& m) { return elliptic_e(m.value()); }

// K(k)/K(k'), the quantity entering every CPW conformal-mapping formula.
// Computed as agm(1, k)/agm(1, k'): K(x) = pi/(2 agm(1, x')), so the
// quotient needs each modulus only as the *complement* of the other and
// never reconstructs a complement from an already-rounded value.
// Asymptotic substitution below k = 1e-7 (and mirrored above 1 - 1e-7)
// covers the extreme aspect ratios: K(k) -> pi/2, K(k') -> ln(4/k).
inline double k_ratio(double k) {
    const EllipticModulus m(k);
    if (k == 0.0 || k == 1.0)
        throw DivergenceError("K(k)/K(k') is 0 or infinite at k = " + std::to_string(k));
    if (k < 1e-7) return (0.5 * pi) / std::log(4.0 / k);
    if (k > 1.0 - 1e-7) return std::log(4.0 / m.complement()) / (0.5 * pi);
    return detail::agm(1.0, k) / detail::agm(1.0, m.complement());
}

inline double k_ratio(const EllipticModulus& m) { return k_ratio(m.value()); }

namespace detail {

// k_ratio evaluated from ln(k), for callers whose modulus underflows
// double range (deep sinh ratios in the trench model).
inline double k_ratio_from_log(double log_k) {
    if (!(log_k < 0.0)) throw DomainError("log-modulus must be negative");
    if (log_k < std::log(1e-7)) return (0.5 * pi) / (std::log(4.0) - log_k);
    return k_ratio(std::exp(log_k));
}

}  // namespace detail

}  // namespace cpwlab
