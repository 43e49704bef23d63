#include "afcmem/dd.hpp"

#include "afcmem/config.hpp"
#include "afcmem/quadrature.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

using namespace afcmem;

namespace {

constexpr double kPi = std::numbers::pi;

dd::NoiseModel ou_noise(double sigma, double tau_c, std::uint64_t seed = 11) {
    dd::NoiseModel n;
    n.kind = dd::NoiseKind::ornstein_uhlenbeck;
    n.amplitude_rad_per_s = sigma;
    n.correlation_time_s = tau_c;
    n.rng_seed = seed;
    return n;
}

// Riemann-sum Fourier transform of the switching function, the oracle for
// the closed-form filter evaluation.
double filter_by_dft(const dd::DDSequence& seq, double omega) {
    const int n = 200000;
    const double dt = seq.total_duration_s / n;
    double re = 0.0, im = 0.0;
    std::size_t next_pulse = 0;
    double sign = 1.0;
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) * dt;
        while (next_pulse < seq.pulses.size() && t >= seq.pulses[next_pulse].time_s) {
            ++next_pulse;
            sign = -sign;
        }
        re += sign * std::cos(omega * t) * dt;
        im += sign * std::sin(omega * t) * dt;
    }
    return re * re + im * im;
}

}  // namespace

TEST_SUITE_BEGIN("dd");

TEST_CASE("sequence layouts: spacing, phases, and the Hahn special case") {
    const auto cpmg = dd::generate_sequence(dd::SequenceFamily::cpmg, 0.1, 4);
    REQUIRE(cpmg.pulses.size() == 4);
    CHECK(cpmg.total_duration_s == doctest::Approx(0.4).epsilon(1e-15));
    const double expected_times[] = {0.05, 0.15, 0.25, 0.35};
    for (int i = 0; i < 4; ++i) {
        CHECK(cpmg.pulses[i].time_s == doctest::Approx(expected_times[i]).epsilon(1e-15));
        CHECK(cpmg.pulses[i].phase_rad == cpmg.pulses[0].phase_rad);
    }

    const auto kdd = dd::generate_sequence(dd::SequenceFamily::kddx, 0.02, 5);
    const double knill[] = {kPi / 6.0, 0.0, kPi / 2.0, 0.0, kPi / 6.0};
    for (int i = 0; i < 5; ++i) {
        CHECK(kdd.pulses[i].phase_rad == doctest::Approx(knill[i]).epsilon(1e-15));
    }
    const auto kdd10 = dd::generate_sequence(dd::SequenceFamily::kddx, 0.02, 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(kdd10.pulses[i].phase_rad == doctest::Approx(knill[i % 5]).epsilon(1e-15));
    }
    CHECK_THROWS_AS(dd::generate_sequence(dd::SequenceFamily::kddx, 0.02, 7),
                    std::invalid_argument);

    // two-pulse echo layout: one refocusing pulse at T/2
    const auto hahn = dd::generate_sequence(dd::SequenceFamily::free, 1.0, 1);
    REQUIRE(hahn.pulses.size() == 1);
    CHECK(hahn.pulses[0].time_s == doctest::Approx(0.5).epsilon(1e-15));

    const auto ramsey = dd::generate_sequence(dd::SequenceFamily::free, 1.0, 0);
    CHECK(ramsey.pulses.empty());
    CHECK(ramsey.total_duration_s == 1.0);
}

TEST_CASE("filter function: pulse-free and Hahn closed forms") {
    const double T = 2.0;
    const auto ramsey = dd::generate_sequence(dd::SequenceFamily::free, T, 0);
    CHECK(dd::filter_function_value(ramsey, 0.0) == doctest::Approx(T * T).epsilon(1e-12));
    for (double w : {0.7, 3.1, 12.0}) {
        const double expected = 4.0 * std::pow(std::sin(0.5 * w * T), 2) / (w * w);
        CHECK(dd::filter_function_value(ramsey, w) == doctest::Approx(expected).epsilon(1e-10));
    }

    const auto hahn = dd::generate_sequence(dd::SequenceFamily::free, T, 1);
    CHECK(dd::filter_function_value(hahn, 0.0) == doctest::Approx(0.0).epsilon(1e-18));
    for (double w : {0.7, 3.1, 12.0}) {
        const double expected = 16.0 * std::pow(std::sin(0.25 * w * T), 4) / (w * w);
        CHECK(dd::filter_function_value(hahn, w) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("filter function: CPMG peak against a direct Fourier oracle") {
    const double tau = 0.2;
    const auto seq = dd::generate_sequence(dd::SequenceFamily::cpmg, tau, 8);
    // the pass band sits at the odd harmonics of pi/tau
    const double w_peak = kPi / tau;
    const double at_peak = dd::filter_function_value(seq, w_peak);
    CHECK(at_peak > dd::filter_function_value(seq, 0.6 * w_peak) * 10.0);
    CHECK(at_peak > dd::filter_function_value(seq, 1.7 * w_peak) * 10.0);

    for (double w : {0.3 * w_peak, w_peak, 1.9 * w_peak, 3.0 * w_peak}) {
        const double oracle = filter_by_dft(seq, w);
        CHECK(dd::filter_function_value(seq, w) ==
              doctest::Approx(oracle).epsilon(2e-4).scale(at_peak * 1e-6));
    }

    // the geometric closed form agrees with the generic evaluation: degrade
    // the metadata so the same pulse times take the generic path
    dd::DDSequence generic = seq;
    generic.interval_s = 0.0;
    std::vector<double> grid;
    for (int k = 1; k <= 120; ++k) grid.push_back(0.13 * k);
    const auto fast = dd::filter_function(seq, grid);
    const auto slow = dd::filter_function(generic, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-9).scale(1e-12));
    }
}

TEST_CASE("noise spectra carry the configured variance") {
    // (1/pi) integral of S over the positive axis recovers the rms amplitude
    for (const auto kind : {dd::NoiseKind::ornstein_uhlenbeck, dd::NoiseKind::power_law}) {
        dd::NoiseModel n;
        n.kind = kind;
        n.amplitude_rad_per_s = 1.3;
        n.correlation_time_s = 0.2;
        n.exponent = 1.4;
        n.cutoff_lo_rad_per_s = 0.3;
        n.cutoff_hi_rad_per_s = 900.0;
        const double hi = kind == dd::NoiseKind::power_law ? 900.0 : 4.0e4;
        const auto integral = quad::integrate([&](double w) { return n.psd(w); },
                                              kind == dd::NoiseKind::power_law ? 0.3 : 0.0,
                                              hi, 1e-10);
        CHECK(integral.value / kPi ==
              doctest::Approx(1.3 * 1.3).epsilon(kind == dd::NoiseKind::power_law ? 1e-6 : 1e-2));
    }
}

TEST_CASE("zero-amplitude noise decays nothing") {
    const auto none = ou_noise(0.0, 1.0);
    CHECK(dd::coherence_at(dd::SequenceFamily::cpmg, 0.1, none, 10.0) == 1.0);
    const auto mc = dd::monte_carlo_dephasing(
        dd::generate_sequence(dd::SequenceFamily::cpmg, 0.1, 10), none, 200);
    CHECK(mc.coherence == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mc.stderr_est == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("white noise decays exponentially, blind to the pulse spacing") {
    dd::NoiseModel white;
    white.kind = dd::NoiseKind::white;
    white.amplitude_rad_per_s = 1.1;
    white.correlation_time_s = 0.05;
    const double s0 = white.psd(0.0);
    for (double tau : {0.05, 0.2, 0.8}) {
        for (double t : {1.0, 4.0, 12.0}) {
            const double w = dd::coherence_at(dd::SequenceFamily::cpmg, tau, white, t);
            const int n = std::max(1, int(std::lround(t / tau)));
            CHECK(std::log(w) == doctest::Approx(-0.5 * s0 * n * tau).epsilon(1e-6));
        }
    }
}

TEST_CASE("overlap quadrature agrees with the exact OU covariance sum") {
    const double sigma = 0.8, tau_c = 0.3, tau = 0.15;
    for (int n : {1, 4, 32, 200, 512}) {
        const auto seq = dd::generate_sequence(dd::SequenceFamily::cpmg, tau, n);
        const double w_quad = dd::coherence_for_sequence(seq, ou_noise(sigma, tau_c), 1e-8);
        const double w_exact = std::exp(-dd::ou_chi_uniform(sigma, tau_c, tau, n));
        CHECK(w_quad == doctest::Approx(w_exact).epsilon(2e-6));
    }
    // the dispatch crossover is seamless
    const double w512 = dd::coherence_at(dd::SequenceFamily::cpmg, tau, ou_noise(sigma, tau_c),
                                         512 * tau);
    const double w513 = dd::coherence_at(dd::SequenceFamily::cpmg, tau, ou_noise(sigma, tau_c),
                                         513 * tau);
    CHECK(std::abs(w513 - w512) < 5e-3 * w512);
}

TEST_CASE("Hahn and free-evolution quadrature match the OU closed forms") {
    const double sigma = 0.9, tau_c = 0.25;
    for (double t : {0.2, 1.0, 4.0}) {
        const auto hahn = dd::generate_sequence(dd::SequenceFamily::free, t, 1);
        CHECK(dd::coherence_for_sequence(hahn, ou_noise(sigma, tau_c), 1e-8) ==
              doctest::Approx(std::exp(-dd::ou_chi_hahn(sigma, tau_c, t))).epsilon(1e-5));
        const auto ramsey = dd::generate_sequence(dd::SequenceFamily::free, t, 0);
        CHECK(dd::coherence_for_sequence(ramsey, ou_noise(sigma, tau_c), 1e-8) ==
              doctest::Approx(std::exp(-dd::ou_chi_free(sigma, tau_c, t))).epsilon(1e-4));
    }
    // short-time echo limit: chi ~ sigma^2 T^3 / (12 tau_c)
    const double t = 0.02 * tau_c;
    const double expected = sigma * sigma * t * t * t / (12.0 * tau_c);
    CHECK(dd::ou_chi_hahn(sigma, tau_c, t) == doctest::Approx(expected).epsilon(1e-2));
}

TEST_CASE("coherence decay stays in [0, 1] and fits its lifetime") {
    std::vector<double> durations;
    for (int k = 1; k <= 8; ++k) durations.push_back(2.0 * k);
    const auto decay =
        dd::coherence_decay(dd::SequenceFamily::cpmg, 0.25, ou_noise(1.2, 0.3), durations);
    REQUIRE(decay.coherence.size() == durations.size());
    for (std::size_t i = 0; i < decay.coherence.size(); ++i) {
        CHECK(decay.coherence[i] >= 0.0);
        CHECK(decay.coherence[i] <= 1.0);
        if (i > 0) CHECK(decay.coherence[i] <= decay.coherence[i - 1] + 1e-12);
    }
    CHECK(decay.fit.lifetime > 0.0);
    CHECK_THROWS_AS(
        dd::coherence_decay(dd::SequenceFamily::cpmg, 0.25, ou_noise(1.2, 0.3), {3.0, 1.0}),
        std::invalid_argument);
}

TEST_CASE("calibration closure: the configured noise hits the 52.9-minute target") {
    const auto cfg = config::load();
    const auto& noise = config::Config::named(cfg.noises, "ou_paper_fit", "noises");
    // the one-datum solve reproduces itself through the public api
    const double sigma =
        dd::calibrate_ou_amplitude(0.1, noise.correlation_time_s, 52.9 * 60.0);
    CHECK(sigma == doctest::Approx(noise.amplitude_rad_per_s).epsilon(1e-6));

    std::vector<double> durations;
    for (int k = 1; k <= 8; ++k) durations.push_back(600.0 * k);
    const auto decay = dd::coherence_decay(dd::SequenceFamily::cpmg, 0.1, noise, durations);
    CHECK(decay.fit.lifetime == doctest::Approx(52.9 * 60.0).epsilon(0.02));
}

TEST_CASE("calibrated lifetime is monotone non-increasing in the pulse spacing") {
    const auto cfg = config::load();
    const auto& noise = config::Config::named(cfg.noises, "ou_paper_fit", "noises");
    double prev = 1e300;
    for (double tau : {0.0125, 0.025, 0.05, 0.1, 0.2}) {
        std::vector<double> durations;
        const double scale = 3174.0 * std::pow(0.1 / tau, 2);
        for (int k = 1; k <= 6; ++k) durations.push_back(scale * 0.3 * k);
        const auto decay = dd::coherence_decay(dd::SequenceFamily::cpmg, tau, noise, durations);
        CHECK(decay.fit.lifetime <= prev * (1.0 + 1e-9));
        prev = decay.fit.lifetime;
    }
}

TEST_CASE("pure dephasing cannot tell CPMG from KDDx") {
    const auto cfg = config::load();
    const auto& noise = config::Config::named(cfg.noises, "ou_paper_fit", "noises");
    for (double t : {60.0, 600.0, 3000.0}) {
        const double cpmg = dd::coherence_at(dd::SequenceFamily::cpmg, 0.1, noise, t);
        const double kddx = dd::coherence_at(dd::SequenceFamily::kddx, 0.1, noise, t);
        CHECK(std::abs(cpmg - kddx) < 1e-9);
    }
    // same statement through the Monte Carlo path with a shared seed
    auto n = ou_noise(0.7, 0.3, 421);
    const auto seq_c = dd::generate_sequence(dd::SequenceFamily::cpmg, 0.05, 40);
    const auto seq_k = dd::generate_sequence(dd::SequenceFamily::kddx, 0.05, 40);
    const auto mc_c = dd::monte_carlo_dephasing(seq_c, n, 500);
    const auto mc_k = dd::monte_carlo_dephasing(seq_k, n, 500);
    CHECK(mc_c.coherence == mc_k.coherence);
}

TEST_CASE("pulse errors strictly order CPMG above KDDx") {
    const auto none = ou_noise(0.0, 1.0, 5);
    dd::PulseErrorModel em;
    em.line.fwhm_khz = 5.0;
    em.line.rabi_spread = 0.05;
    em.t_pi_us = 65.1;
    em.phase_error = 0.2;
    const auto cp = dd::monte_carlo_dephasing(
        dd::generate_sequence(dd::SequenceFamily::cpmg, 0.001, 30), none, 3000, em);
    const auto kd = dd::monte_carlo_dephasing(
        dd::generate_sequence(dd::SequenceFamily::kddx, 0.001, 30), none, 3000, em);
    CHECK(cp.coherence > kd.coherence + 3.0 * std::hypot(cp.stderr_est, kd.stderr_est));
    // and imperfect pulses always cost something
    CHECK(cp.coherence < 1.0);
}

TEST_CASE("Monte Carlo matches the OU Hahn closed form at short times") {
    const auto noise = ou_noise(0.9, 0.25, 77);
    const auto hahn = dd::generate_sequence(dd::SequenceFamily::free, 0.05, 1);
    const auto mc = dd::monte_carlo_dephasing(hahn, noise, 4000);
    const double exact = std::exp(-dd::ou_chi_hahn(0.9, 0.25, 0.05));
    CHECK(std::abs(mc.coherence - exact) < 3.0 * std::max(mc.stderr_est, 1e-6));
}

TEST_CASE("Monte Carlo and quadrature agree to three standard errors") {
    const auto cfg = config::load();
    struct GridSpec {
        const char* noise;
        double tau;
        std::vector<double> durations;
        int traj;
    };
    const GridSpec grids[] = {
        {"white_test", 0.5, {2, 5, 10, 20, 35}, 2000},
        {"ou_test", 0.25, {5, 15, 30, 60, 100}, 2000},
        {"powerlaw_test", 0.1, {5, 15, 30, 60, 100}, 400},
    };
    for (const auto& g : grids) {
        const auto& noise = config::Config::named(cfg.noises, g.noise, "noises");
        for (double t : g.durations) {
            const int n = std::max(1, int(std::lround(t / g.tau)));
            const auto seq = dd::generate_sequence(dd::SequenceFamily::cpmg, g.tau, n);
            const double wq = dd::coherence_for_sequence(seq, noise);
            const auto mc = dd::monte_carlo_dephasing(seq, noise, g.traj);
            INFO(g.noise, " T=", t);
            CHECK(std::abs(mc.coherence - wq) < 3.0 * std::max(mc.stderr_est, 1e-4));
        }
    }
}

TEST_CASE("Monte Carlo validates the calibrated preset out to storage scale") {
    const auto cfg = config::load();
    const auto& noise = config::Config::named(cfg.noises, "ou_paper_fit", "noises");
    for (double t : {600.0, 1500.0, 3000.0, 4500.0, 6000.0}) {
        const int n = int(std::lround(t / 0.1));
        const auto seq = dd::generate_sequence(dd::SequenceFamily::cpmg, 0.1, n);
        const double wq = dd::coherence_for_sequence(seq, noise);
        const auto mc = dd::monte_carlo_dephasing(seq, noise, 500);
        INFO("T=", t);
        CHECK(std::abs(mc.coherence - wq) < 3.0 * std::max(mc.stderr_est, 1e-4));
    }
}

TEST_CASE("trajectory count precondition") {
    CHECK_THROWS_AS(dd::monte_carlo_dephasing(
                        dd::generate_sequence(dd::SequenceFamily::cpmg, 0.1, 4),
                        ou_noise(0.5, 0.3), 50),
                    std::invalid_argument);
}

TEST_CASE("lifetime fit: exact recovery, stretch recovery, and equivariance") {
    // noiseless exponential
    std::vector<double> t, y;
    for (int k = 1; k <= 10; ++k) {
        t.push_back(120.0 * k);
        y.push_back(std::exp(-120.0 * k / 600.0));
    }
    const auto fit = fitting::fit_lifetime(t, y);
    CHECK(fit.lifetime == doctest::Approx(600.0).epsilon(1e-6));
    CHECK(fit.stretch == 1.0);

    // stretched data with 1% noise recovers beta = 2 within 0.05
    std::mt19937_64 gen(321);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> ts, ys;
    for (int k = 1; k <= 24; ++k) {
        const double tt = 40.0 * k;
        ts.push_back(tt);
        const double clean = std::exp(-std::pow(tt / 500.0, 2.0));
        ys.push_back(std::clamp(clean * (1.0 + 0.01 * gauss(gen)), 1e-9, 1.0));
    }
    const auto stretched = fitting::fit_lifetime(ts, ys, fitting::DecayModel::stretched);
    CHECK(stretched.lifetime == doctest::Approx(500.0).epsilon(0.03));
    CHECK(stretched.stretch == doctest::Approx(2.0).epsilon(0.025));
    CHECK(stretched.covariance(0, 0) > 0.0);

    // scale equivariance: stretching the time axis rescales the lifetime
    std::vector<double> t2 = t;
    for (auto& v : t2) v *= 7.5;
    const auto fit2 = fitting::fit_lifetime(t2, y);
    CHECK(fit2.lifetime == doctest::Approx(7.5 * fit.lifetime).epsilon(1e-9));

    // degenerate inputs
    std::vector<double> flat_t{1, 2, 3, 4}, flat_y{1.0, 1.0, 1.0, 1.0};
    const auto flat = fitting::fit_lifetime(flat_t, flat_y);
    CHECK(flat.non_decaying);
    CHECK_THROWS_AS(fitting::fit_lifetime({1.0, 2.0, 3.0}, {0.9, 0.8, 0.7}),
                    std::invalid_argument);
    CHECK_THROWS_AS(fitting::fit_lifetime({1, 2, 3, 4}, {0.9, 0.8, 1.2, 0.6}),
                    std::invalid_argument);
}

TEST_SUITE_END();
