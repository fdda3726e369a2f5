#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "cpwlab/power_tls.hpp"

using namespace cpwlab;

namespace {
TlsParams demo_params() {
    // constructed so Q_i(0) = 2.1e6 with a 5.5e6 plateau
    TlsParams p;
    p.q_other = 5.5e6;
    p.temp_k = 0.05;
    const double w0 = 2.0 * pi * 4.5e9;
    const double thermal = std::tanh(hbar * w0 / (2.0 * boltzmann * p.temp_k));
    p.f_delta0 = (1.0 / 2.1e6 - 1.0 / p.q_other) / thermal;
    p.n_c = 1e4;
    p.beta = 0.5;
    return p;
}
}  // namespace

TEST_CASE("applied power follows the dBm definition", "[power_tls]") {
    CHECK(applied_power(0.0, 0.0) == Catch::Approx(1e-3).epsilon(1e-15));
    CHECK(applied_power(-50.0, 90.0) == Catch::Approx(1e-17).epsilon(1e-12));
    CHECK(applied_power(3.0103, 0.0) == Catch::Approx(2e-3).epsilon(1e-5));
    CHECK_THROWS_AS(applied_power(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("photon number magnitude and scaling laws", "[power_tls]") {
    const double n = photon_number(1e-17, 4.5e9, 1e5, 2e5);
    CHECK(n == Catch::Approx(11.8615).epsilon(1e-4));

    // linear in power, quadratic in q_l, inverse in q_c (exact)
    CHECK(photon_number(2e-17, 4.5e9, 1e5, 2e5) == 2.0 * n);
    CHECK(photon_number(1e-17, 4.5e9, 2e5, 2e5) == 4.0 * n);
    CHECK(photon_number(1e-17, 4.5e9, 1e5, 4e5) == 0.5 * n);

    // 70 dB of source power spans 7 decades of photon number
    const double lo = photon_number(applied_power(-135.0, 0.0), 4.5e9, 1e5, 2e5);
    const double hi = photon_number(applied_power(-65.0, 0.0), 4.5e9, 1e5, 2e5);
    CHECK(std::log10(hi / lo) == Catch::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("PowerPoint assembles the chain", "[power_tls]") {
    const PowerPoint pp = PowerPoint::from_source(-50.0, 90.0, 4.5e9, 1e5, 2e5);
    CHECK(pp.p_applied_w == Catch::Approx(1e-17).epsilon(1e-12));
    CHECK(pp.n_photons == Catch::Approx(11.8615).epsilon(1e-4));
}

TEST_CASE("TLS model limits", "[power_tls]") {
    const TlsParams p = demo_params();
    const double f0 = 4.5e9;

    // saturation: Q_i -> q_other
    CHECK(tls_qi(1e15, p, f0) == Catch::Approx(p.q_other).epsilon(1e-3));
    CHECK(tls_qi(1e15, p, f0) < p.q_other);

    // cold low-power limit: Q_i = 1/(f_delta0 + 1/q_other)
    TlsParams cold = p;
    cold.temp_k = 1e-6;  // tanh -> 1
    CHECK(tls_qi(0.0, cold, f0) ==
          Catch::Approx(1.0 / (p.f_delta0 + 1.0 / p.q_other)).epsilon(1e-9));

    // the constructed curve hits both paper-level endpoints
    CHECK(tls_qi(1.0, p, f0) >= 2.0e6);
    CHECK(tls_qi(1e7, p, f0) >= 5.0e6);
}

TEST_CASE("TLS quality factor is monotone in n and temperature", "[power_tls]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        TlsParams p;
        p.f_delta0 = std::pow(10.0, -7.5 + 2.0 * u(rng));
        p.n_c = std::pow(10.0, 4.0 * u(rng));
        p.beta = 0.1 + 1.9 * u(rng);
        p.q_other = std::pow(10.0, 5.5 + 2.0 * u(rng));
        p.temp_k = 0.01 + 0.3 * u(rng);
        const double f0 = 3e9 + 4e9 * u(rng);

        const double n1 = std::pow(10.0, 8.0 * u(rng));
        const double n2 = n1 * (1.0 + u(rng));
        CHECK(tls_qi(n2, p, f0) >= tls_qi(n1, p, f0));
        CHECK(tls_qi(n1, p, f0) <= p.q_other);

        TlsParams warmer = p;
        warmer.temp_k = p.temp_k * 1.5;
        CHECK(tls_qi(n1, warmer, f0) >= tls_qi(n1, p, f0));
    }
}

TEST_CASE("TLS fit: noiseless round trip to 1%", "[power_tls]") {
    const TlsParams truth = demo_params();
    const double f0 = 4.5e9;
    std::vector<std::pair<double, double>> pts;
    for (double logn = -1.0; logn <= 7.0; logn += 0.33)
        pts.emplace_back(std::pow(10.0, logn), tls_qi(std::pow(10.0, logn), truth, f0));

    const TlsFitResult fit = fit_tls(pts, f0, truth.temp_k);
    CHECK(fit.converged);
    CHECK_FALSE(fit.ill_posed);
    CHECK(fit.params.f_delta0 == Catch::Approx(truth.f_delta0).epsilon(0.01));
    CHECK(fit.params.n_c == Catch::Approx(truth.n_c).epsilon(0.01));
    CHECK(fit.params.beta == Catch::Approx(truth.beta).epsilon(0.01));
    CHECK(fit.params.q_other == Catch::Approx(truth.q_other).epsilon(0.01));
}

TEST_CASE("TLS fit: flat curve collapses to q_other", "[power_tls]") {
    std::vector<std::pair<double, double>> pts;
    const double q = 1.7e6;
    for (double logn = -1.0; logn <= 6.0; logn += 0.5) pts.emplace_back(std::pow(10.0, logn), q);
    const TlsFitResult fit = fit_tls(pts, 4.5e9, 0.05);
    CHECK(fit.params.q_other == Catch::Approx(q).epsilon(0.02));
    // TLS loss contributes under 2% of the total
    CHECK(fit.params.f_delta0 < 0.02 / q);
}

TEST_CASE("TLS fit: n_c under multiplicative noise", "[power_tls]") {
    const TlsParams truth = demo_params();
    const double f0 = 4.5e9;
    std::vector<double> nc_err;
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 0.05);
        std::vector<std::pair<double, double>> pts;
        for (double logn = -2.0; logn <= 8.0; logn += 0.15) {
            const double n = std::pow(10.0, logn);
            pts.emplace_back(n, tls_qi(n, truth, f0) * (1.0 + g(rng)));
        }
        const TlsFitResult fit = fit_tls(pts, f0, truth.temp_k);
        nc_err.push_back(std::abs(fit.params.n_c / truth.n_c - 1.0));
    }
    std::sort(nc_err.begin(), nc_err.end());
    CHECK(nc_err[nc_err.size() / 2] < 0.25);
}

TEST_CASE("TLS fit preconditions and warnings", "[power_tls]") {
    std::vector<std::pair<double, double>> few = {{1.0, 1e6}, {10.0, 1.1e6}, {100.0, 1.2e6},
                                                  {1000.0, 1.3e6}};
    CHECK_THROWS_AS(fit_tls(few, 4.5e9, 0.05), std::invalid_argument);

    // five points over two decades: fit runs (best effort) but warns
    std::vector<std::pair<double, double>> narrow;
    const TlsParams truth = demo_params();
    for (double logn = 2.0; logn <= 4.0; logn += 0.5)
        narrow.emplace_back(std::pow(10.0, logn), tls_qi(std::pow(10.0, logn), truth, 4.5e9));
    FitOptions best_effort;
    best_effort.throw_on_nonconvergence = false;
    const TlsFitResult fit = fit_tls(narrow, 4.5e9, 0.05, best_effort);
    CHECK(fit.ill_posed);
    CHECK_FALSE(fit.warning.empty());

    CHECK_THROWS_AS(tls_qi(-1.0, truth, 4.5e9), std::invalid_argument);
    TlsParams bad = truth;
    bad.beta = 2.5;
    CHECK_THROWS_AS(tls_qi(1.0, bad, 4.5e9), std::invalid_argument);
}
