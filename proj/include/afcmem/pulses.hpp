// pulses.hpp — two-level dynamics in the rotating frame: Bloch-equation
// integration, adiabatic (complex hyperbolic secant) transfer, Rabi nutation,
// and pi-pulse coverage of an inhomogeneous line.
//
// Frequencies are linear (kHz), times in microseconds. A resonant square
// pulse of Rabi frequency R kHz needs t_pi = 500/R us for a pi rotation.
#pragma once

#include <complex>
#include <string>
#include <vector>

namespace afcmem::pulses {

enum class PulseFamily { gaussian, chs, square };

std::string to_string(PulseFamily f);
PulseFamily pulse_family_from_string(const std::string& s);

struct PulseShape {
    PulseFamily family = PulseFamily::gaussian;
    double fwhm_us = 2.0;        // gaussian FWHM; full duration for square/chs
    double peak_rabi_khz = 1.0;
    double chirp_lo_khz = 0.0;   // chs instantaneous-detuning sweep range
    double chirp_hi_khz = 0.0;
    double truncation = 3.0;     // chs envelope argument at the edges, sech(truncation)
    double carrier_phase_rad = 0.0;

    double duration_us() const;  // envelope support, starting at t = 0
    double envelope_khz(double t_us) const;
    double instantaneous_detuning_khz(double t_us) const;
    // Drive phase: carrier phase plus the integrated frequency sweep.
    double drive_phase_rad(double t_us) const;
    // Fourier transform of the complex envelope at the given detuning.
    std::complex<double> spectral_amplitude(double detuning_khz) const;
    void validate() const;
};

struct BlochState {
    double u = 0.0;
    double v = 0.0;
    double w = -1.0;

    double norm() const;
};

// Largest frequency scale a pulse drives at a given static detuning; the
// integration step must stay well below its inverse period.
double max_drive_frequency_khz(const PulseShape& pulse, double detuning_khz);

// Step accepted only if step <= 50 / max_drive_frequency (a twentieth of the
// fastest period). step_us <= 0 selects an automatic step well inside that.
BlochState bloch_evolve(const BlochState& state, const PulseShape& pulse, double detuning_khz,
                        double step_us = 0.0);

struct TransferResult {
    std::vector<double> detunings_khz;
    std::vector<double> probability;  // population transfer per detuning
    double average = 0.0;
};

TransferResult chs_transfer_efficiency(const PulseShape& pulse,
                                       const std::vector<double>& detuning_grid_khz,
                                       double step_us = 0.0);

enum class LineShape { gaussian, lorentzian };

std::string to_string(LineShape s);
LineShape line_shape_from_string(const std::string& s);

struct InhomogeneousLine {
    LineShape shape = LineShape::gaussian;
    double fwhm_khz = 30.0;
    double rabi_spread = 0.0;  // relative std of the drive amplitude

    void validate() const;
};

struct NutationResult {
    std::vector<double> times_us;
    std::vector<double> signal;   // ensemble-averaged inversion
    double t_pi_us = 0.0;         // first extremum of the averaged signal
    bool extremum_found = false;
};

// Ensemble-averaged nutation under a continuous resonant drive. The signal is
// the averaged inversion, whose first extremum sits at the pi time,
// t_pi = 500 / peak_rabi_khz us in the homogeneous limit.
NutationResult rabi_nutation(const PulseShape& drive, const InhomogeneousLine& line,
                             double horizon_us);

enum class CoverageModel { coherent_survivor, randomized_floor };

struct CoverageResult {
    double per_pulse = 0.0;   // line-averaged single-pulse refocusing fidelity
    double compounded = 0.0;  // line-averaged n-pulse surviving fraction
};

// Refocusing fidelity of a square pi pulse of length t_pi at detuning delta:
//   p(delta) = Omega^2/(Omega^2 + delta^2) * sin^2(sqrt(Omega^2 + delta^2) t_pi / 2)
// with Omega = pi / t_pi in angular units. The compounded fraction averages
// p^n over the line (coherent survivor) or (p^n + (1 - p^n)/2) for the
// randomized-floor model. `n_pulses` may be fractional for calibrated use.
CoverageResult inhomogeneous_coverage(const InhomogeneousLine& line, double t_pi_us,
                                      double n_pulses,
                                      CoverageModel model = CoverageModel::coherent_survivor);

}  // namespace afcmem::pulses
