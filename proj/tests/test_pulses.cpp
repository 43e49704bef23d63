#include "afcmem/pulses.hpp"

#include "afcmem/config.hpp"
#include "afcmem/quadrature.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

using namespace afcmem;

namespace {

pulses::PulseShape square(double rabi_khz, double duration_us) {
    pulses::PulseShape p;
    p.family = pulses::PulseFamily::square;
    p.fwhm_us = duration_us;
    p.peak_rabi_khz = rabi_khz;
    return p;
}

// closed-form two-level solution for a resonant-frame square drive
double rabi_w(double rabi_khz, double detuning_khz, double t_us) {
    const double f2 = rabi_khz * rabi_khz + detuning_khz * detuning_khz;
    const double p = (rabi_khz * rabi_khz / f2) *
                     std::pow(std::sin(std::numbers::pi * 1e-3 * std::sqrt(f2) * t_us), 2);
    return 2.0 * p - 1.0;
}

}  // namespace

TEST_SUITE_BEGIN("pulses");

TEST_CASE("resonant square pulses rotate by their area") {
    // area pi: full inversion
    const auto pi_pulse = square(10.0, 50.0);
    const auto up = pulses::bloch_evolve({0.0, 0.0, -1.0}, pi_pulse, 0.0);
    CHECK(std::abs(up.w - 1.0) < 1e-6);

    // area pi/2: equator with unit transverse component
    const auto half = square(10.0, 25.0);
    const auto eq = pulses::bloch_evolve({0.0, 0.0, -1.0}, half, 0.0);
    CHECK(std::abs(eq.w) < 1e-6);
    CHECK(std::abs(std::abs(eq.v) - 1.0) < 1e-6);

    // zero amplitude leaves the state alone
    const auto idle = pulses::bloch_evolve({0.3, -0.2, 0.5}, square(0.0, 10.0), 0.0);
    CHECK(idle.u == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(idle.v == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(idle.w == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("integrator matches the generalized Rabi solution off resonance") {
    for (double det : {-37.0, 5.0, 22.0}) {
        const auto drive = square(12.0, 80.0);
        const auto out = pulses::bloch_evolve({0.0, 0.0, -1.0}, drive, det);
        CHECK(out.w == doctest::Approx(rabi_w(12.0, det, 80.0)).epsilon(1e-7));
    }
}

TEST_CASE("norm is conserved to 1e-8 across pulse families") {
    pulses::PulseShape gauss;
    gauss.family = pulses::PulseFamily::gaussian;
    gauss.fwhm_us = 2.0;
    gauss.peak_rabi_khz = 180.0;

    pulses::PulseShape chs;
    chs.family = pulses::PulseFamily::chs;
    chs.fwhm_us = 4.0;
    chs.peak_rabi_khz = 250.0;
    chs.chirp_lo_khz = -600.0;
    chs.chirp_hi_khz = 600.0;

    for (const auto& pulse : {gauss, chs, square(40.0, 30.0)}) {
        for (double det : {0.0, 120.0, -340.0}) {
            const auto out = pulses::bloch_evolve({0.0, 0.0, -1.0}, pulse, det);
            CHECK(std::abs(out.norm() - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("step halving shows fourth-order convergence") {
    pulses::PulseShape gauss;
    gauss.family = pulses::PulseFamily::gaussian;
    gauss.fwhm_us = 2.0;
    gauss.peak_rabi_khz = 150.0;
    const double det = 80.0;

    auto run = [&](double h) { return pulses::bloch_evolve({0.0, 0.0, -1.0}, gauss, det, h); };
    const double h0 = 0.02;
    const auto a = run(h0), b = run(0.5 * h0), c = run(0.25 * h0);
    const double e1 = std::sqrt(std::pow(a.u - b.u, 2) + std::pow(a.v - b.v, 2) +
                                std::pow(a.w - b.w, 2));
    const double e2 = std::sqrt(std::pow(b.u - c.u, 2) + std::pow(b.v - c.v, 2) +
                                std::pow(b.w - c.w, 2));
    const double ratio = e1 / e2;
    CHECK(ratio > 12.0);
    CHECK(ratio < 20.0);
}

TEST_CASE("coarse steps violate the precondition") {
    const auto drive = square(100.0, 10.0);
    CHECK_THROWS_AS(pulses::bloch_evolve({0.0, 0.0, -1.0}, drive, 0.0, 5.0),
                    std::invalid_argument);
}

TEST_CASE("adiabatic sweep transfers more than 99% across the band") {
    const auto cfg = config::load();
    const auto& preset = config::Config::named(cfg.controls, "adiabatic", "controls");
    std::vector<double> grid;
    for (int i = 0; i < 21; ++i) grid.push_back(-500.0 + 50.0 * i);
    const auto res = pulses::chs_transfer_efficiency(preset.pulse, grid);
    for (double p : res.probability) CHECK(p > 0.99);

    // the integrator itself, re-verified at a 4x finer step
    const double fine_step =
        10.0 / (3.0 * pulses::max_drive_frequency_khz(preset.pulse, 500.0)) / 4.0;
    const auto fine = pulses::chs_transfer_efficiency(preset.pulse, grid, fine_step);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(res.probability[i] == doctest::Approx(fine.probability[i]).epsilon(1e-6));
    }
}

TEST_CASE("transfer is symmetric in detuning for a symmetric chirp") {
    pulses::PulseShape chs;
    chs.family = pulses::PulseFamily::chs;
    chs.fwhm_us = 6.0;
    chs.peak_rabi_khz = 300.0;
    chs.chirp_lo_khz = -700.0;
    chs.chirp_hi_khz = 700.0;
    std::vector<double> grid;
    for (int i = 0; i <= 16; ++i) grid.push_back(-400.0 + 50.0 * i);
    const auto res = pulses::chs_transfer_efficiency(chs, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::size_t j = grid.size() - 1 - i;
        CHECK(std::abs(res.probability[i] - res.probability[j]) < 1e-6);
    }
}

TEST_CASE("chirp-free sech pulse of area pi degenerates to a pi rotation") {
    const double beta = 3.0;
    const double duration = 20.0;
    const double gd = 2.0 * std::atan(std::tanh(0.5 * beta));
    const double edge = 1.0 / std::cosh(beta);
    // area of the offset-subtracted envelope over the window
    const double area_time = duration * (gd / beta - edge) / (1.0 - edge);
    pulses::PulseShape chs;
    chs.family = pulses::PulseFamily::chs;
    chs.fwhm_us = duration;
    chs.peak_rabi_khz = 500.0 / area_time;  // area pi
    chs.truncation = beta;
    const auto res = pulses::chs_transfer_efficiency(chs, {0.0});
    CHECK(res.average == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("calibrated control preset reproduces the 38.5% transfer") {
    const auto cfg = config::load();
    const auto& control = config::Config::named(cfg.controls, "paper", "controls");
    std::vector<double> grid;
    for (int i = 0; i < 21; ++i) grid.push_back(-500.0 + 50.0 * i);
    const auto res = pulses::chs_transfer_efficiency(control.pulse, grid);
    CHECK(control.transfer_scale * res.average == doctest::Approx(0.385).epsilon(1e-3));
}

TEST_CASE("nutation: homogeneous pi time is half the Rabi period") {
    pulses::InhomogeneousLine line;
    line.fwhm_khz = 1e-6;
    const auto drive = square(8.0, 2000.0);
    const auto res = pulses::rabi_nutation(drive, line, 3.2 * 1000.0 / 8.0);
    CHECK(res.t_pi_us == doctest::Approx(500.0 / 8.0).epsilon(1e-3));
}

TEST_CASE("nutation: configured drive lands on the 65.1 us pi pulse") {
    const auto cfg = config::load();
    const auto& rf = config::Config::named(cfg.pulse_shapes, "rf_square", "pulses");
    pulses::InhomogeneousLine narrow;
    narrow.fwhm_khz = 1e-3;
    const auto res = pulses::rabi_nutation(rf, narrow, 3.2 * 1000.0 / rf.peak_rabi_khz);
    CHECK(res.t_pi_us == doctest::Approx(65.1).epsilon(0.01));
}

TEST_CASE("nutation with drive spread: damped envelope, stable pi time") {
    const double rabi = 8.0;
    pulses::InhomogeneousLine sharp;
    sharp.fwhm_khz = 1e-6;
    pulses::InhomogeneousLine spread = sharp;
    spread.rabi_spread = 0.10;
    const double horizon = 3.5 * 1000.0 / rabi;
    const auto clean = pulses::rabi_nutation(square(rabi, 2.0 * horizon), sharp, horizon);
    const auto fuzzy = pulses::rabi_nutation(square(rabi, 2.0 * horizon), spread, horizon);

    // damped revivals: the second nutation maximum falls below the clean one
    auto second_peak = [](const pulses::NutationResult& r) {
        int count = 0;
        for (std::size_t i = 1; i + 1 < r.signal.size(); ++i) {
            if (r.signal[i] >= r.signal[i - 1] && r.signal[i] >= r.signal[i + 1]) {
                if (++count == 2) return r.signal[i];
            }
        }
        return -1.0;
    };
    CHECK(second_peak(fuzzy) < second_peak(clean) - 0.05);
    CHECK(std::abs(fuzzy.t_pi_us - clean.t_pi_us) / clean.t_pi_us < 0.02);

    // Monte Carlo oracle at 10x the quadrature sample count
    std::mt19937_64 gen(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int samples = 121 * 21 * 10;
    const int nt = 1200;
    std::vector<double> avg(nt, 0.0);
    for (int s = 0; s < samples; ++s) {
        const double delta = 1e-6 / 2.3548 * gauss(gen);
        const double omega = rabi * (1.0 + 0.10 * gauss(gen));
        for (int i = 0; i < nt; ++i) {
            avg[i] += rabi_w(omega, delta, horizon * i / (nt - 1)) / samples;
        }
    }
    // first extremum of the averaged inversion, same refinement rule
    double t_pi_mc = 0.0;
    for (int i = 1; i + 1 < nt; ++i) {
        if (avg[i] >= avg[i - 1] && avg[i] >= avg[i + 1]) {
            const double denom = avg[i - 1] - 2.0 * avg[i] + avg[i + 1];
            const double shift = std::abs(denom) > 0.0 ? 0.5 * (avg[i - 1] - avg[i + 1]) / denom
                                                       : 0.0;
            t_pi_mc = (i + shift) * horizon / (nt - 1);
            break;
        }
    }
    CHECK(std::abs(fuzzy.t_pi_us - t_pi_mc) / t_pi_mc < 0.01);
}

TEST_CASE("nutation pi time scales with the inverse drive amplitude") {
    pulses::InhomogeneousLine line;
    line.fwhm_khz = 1e-6;
    const auto slow = pulses::rabi_nutation(square(5.0, 4000.0), line, 3.2 * 200.0);
    const auto fast = pulses::rabi_nutation(square(20.0, 4000.0), line, 3.2 * 50.0);
    // rotation-angle invariance: t_pi times the drive amplitude is preserved
    CHECK(slow.t_pi_us * 5.0 == doctest::Approx(fast.t_pi_us * 20.0).epsilon(1e-3));
}

TEST_CASE("nutation error paths") {
    pulses::InhomogeneousLine line;
    line.fwhm_khz = 30.0;
    CHECK_THROWS_AS(pulses::rabi_nutation(square(8.0, 100.0), line, 50.0),
                    std::invalid_argument);  // horizon below three periods
    pulses::PulseShape gauss;
    gauss.family = pulses::PulseFamily::gaussian;
    gauss.fwhm_us = 2.0;
    gauss.peak_rabi_khz = 10.0;
    CHECK_THROWS_AS(pulses::rabi_nutation(gauss, line, 1000.0), std::invalid_argument);
}

TEST_CASE("coverage: limits, the published operating point, and monotonicity") {
    // vanishing inhomogeneity: every pulse is perfect
    pulses::InhomogeneousLine sharp;
    sharp.fwhm_khz = 1e-9;
    const auto ideal = pulses::inhomogeneous_coverage(sharp, 65.1, 1.0);
    CHECK(ideal.per_pulse == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ideal.compounded == doctest::Approx(1.0).epsilon(1e-9));
    const auto ideal_n = pulses::inhomogeneous_coverage(sharp, 65.1, 400.0);
    CHECK(ideal_n.compounded == doctest::Approx(1.0).epsilon(1e-6));

    // the 15 kHz pulse bandwidth cannot cover the 30 kHz line
    pulses::InhomogeneousLine line;
    line.fwhm_khz = 30.0;
    const auto cov = pulses::inhomogeneous_coverage(line, 65.1, 1.0);
    CHECK(cov.compounded < 1.0);

    // independent quadrature oracle on the same gaussian line
    const double omega = std::numbers::pi / 65.1;
    const double sigma = 30.0 / 2.3548200450309493;
    auto p_of = [&](double delta_khz) {
        const double d = 2.0 * std::numbers::pi * 1e-3 * delta_khz;
        const double f2 = omega * omega + d * d;
        return (omega * omega / f2) * std::pow(std::sin(0.5 * std::sqrt(f2) * 65.1), 2);
    };
    const auto oracle = quad::integrate(
        [&](double d) {
            return p_of(d) * std::exp(-0.5 * d * d / (sigma * sigma)) /
                   (sigma * std::sqrt(2.0 * std::numbers::pi));
        },
        -7.0 * sigma, 7.0 * sigma, 1e-12);
    CHECK(cov.compounded == doctest::Approx(oracle.value).epsilon(2e-4));

    // monotone decreasing in linewidth and pulse count
    double prev = 1.0;
    for (double fwhm : {5.0, 10.0, 20.0, 40.0, 80.0}) {
        pulses::InhomogeneousLine l;
        l.fwhm_khz = fwhm;
        const double c = pulses::inhomogeneous_coverage(l, 65.1, 4.0).compounded;
        CHECK(c < prev);
        prev = c;
    }
    prev = 1.0;
    for (double n : {1.0, 2.0, 4.0, 8.0, 16.0}) {
        const double c = pulses::inhomogeneous_coverage(line, 65.1, n).compounded;
        CHECK(c < prev);
        prev = c;
    }

    // the randomized-floor variant never drops below one half
    const auto floor = pulses::inhomogeneous_coverage(line, 65.1, 200.0,
                                                      pulses::CoverageModel::randomized_floor);
    CHECK(floor.compounded > 0.5);
    CHECK(floor.compounded <
          pulses::inhomogeneous_coverage(line, 65.1, 1.0,
                                         pulses::CoverageModel::randomized_floor)
              .compounded);
}

TEST_SUITE_END();
