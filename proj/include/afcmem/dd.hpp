// dd.hpp — dynamical-decoupling sequences, dephasing filter functions,
// coherence decay under noise spectra, and a Monte Carlo noise oracle.
//
// Times in seconds, angular frequencies in rad/s.
#pragma once

#include "afcmem/fitting.hpp"
#include "afcmem/pulses.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace afcmem::dd {

enum class SequenceFamily { cpmg, kddx, free };

std::string to_string(SequenceFamily f);
SequenceFamily sequence_family_from_string(const std::string& s);

struct PulseEvent {
    double time_s = 0.0;
    double phase_rad = 0.0;
};

struct DDSequence {
    std::vector<PulseEvent> pulses;  // strictly increasing times in (0, T)
    double interval_s = 0.0;         // tau
    double total_duration_s = 0.0;   // T = n tau; echo readout reference
    SequenceFamily family = SequenceFamily::cpmg;

    void validate() const;
};

// Pulses at (k + 1/2) tau for k = 0..n-1. CPMG and free use a constant phase
// (the pulse axis along the stored coherence); KDDx repeats the five-pulse
// Knill block with phases (pi/6, 0, pi/2, 0, pi/6) and requires n to be a
// multiple of five. free admits n = 0 (no refocusing, Ramsey layout).
DDSequence generate_sequence(SequenceFamily family, double tau_s, int n_pulses);

// |F(omega)|^2 of the switching function, normalized so the omega -> 0 limit
// of the pulse-free sequence equals T^2. Pulse phases do not enter.
double filter_function_value(const DDSequence& seq, double omega_rad_per_s);
std::vector<double> filter_function(const DDSequence& seq,
                                    const std::vector<double>& omega_grid_rad_per_s);

enum class NoiseKind { ornstein_uhlenbeck, power_law, white };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct NoiseModel {
    NoiseKind kind = NoiseKind::ornstein_uhlenbeck;
    double amplitude_rad_per_s = 0.0;   // rms of the frequency noise
    double correlation_time_s = 1.0;    // OU; also sets the white PSD plateau
    double exponent = 1.0;              // power-law alpha
    double cutoff_lo_rad_per_s = 1e-3;  // power-law band edges
    double cutoff_hi_rad_per_s = 1e5;
    std::uint64_t rng_seed = 1;

    // Two-sided PSD S(omega) in rad^2/s^2 per (rad/s). OU:
    // 2 sigma^2 tau_c / (1 + (omega tau_c)^2); white: flat 2 sigma^2 tau_c;
    // power-law: A omega^-alpha on [lo, hi] with A fixed by the rms amplitude.
    double psd(double omega_rad_per_s) const;
    void validate() const;
};

struct CoherenceDecay {
    std::vector<double> durations_s;
    std::vector<double> coherence;  // W(T) in [0, 1]
    fitting::LifetimeFit fit;
};

struct DecayOptions {
    fitting::DecayModel fit_model = fitting::DecayModel::exponential;
    double quad_rel_tol = 1e-6;
};

// W(T) = exp(-chi(T)) with chi the overlap integral
// (1/2pi) int_0^inf S(omega) |F(omega)|^2 domega, evaluated by adaptive
// quadrature split at the filter harmonics. Throws on non-convergence.
double coherence_at(SequenceFamily family, double tau_s, const NoiseModel& noise, double duration_s,
                    const DecayOptions& opts = {});

// Same overlap integral for an explicit (possibly pulse-free) sequence.
double coherence_for_sequence(const DDSequence& seq, const NoiseModel& noise,
                              double quad_rel_tol = 1e-6);

CoherenceDecay coherence_decay(SequenceFamily family, double tau_s, const NoiseModel& noise,
                               const std::vector<double>& durations_s,
                               const DecayOptions& opts = {});

// Imperfect-pulse model for the Monte Carlo path: each trajectory draws a
// static detuning from the line and a Rabi-amplitude offset, and every pi
// pulse becomes the corresponding square-pulse rotation about its phased axis.
// phase_error is a relative miscalibration of the programmed pulse phase, so
// constant-phase trains are immune while phase-cycled ones pick it up.
struct PulseErrorModel {
    pulses::InhomogeneousLine line;
    double t_pi_us = 65.1;
    double phase_error = 0.0;
};

struct MonteCarloResult {
    double coherence = 0.0;
    double stderr_est = 0.0;
    int n_trajectories = 0;
};

MonteCarloResult monte_carlo_dephasing(const DDSequence& seq, const NoiseModel& noise,
                                       int n_trajectories,
                                       const std::optional<PulseErrorModel>& error_model = {});

// Closed-form references used for cross-checks (exact for gaussian OU noise).
double ou_chi_free(double sigma_rad_per_s, double tau_c_s, double duration_s);
double ou_chi_hahn(double sigma_rad_per_s, double tau_c_s, double duration_s);
// Exact chi for a uniform train of n pi pulses at spacing tau (first at
// tau/2), from the pairwise covariances of the segment noise integrals.
double ou_chi_uniform(double sigma_rad_per_s, double tau_c_s, double tau_s, int n_pulses);

// Solve for the OU amplitude that yields a given 1/e lifetime under CPMG at
// fixed tau and correlation time (the one-datum calibration used by the
// shipped presets).
double calibrate_ou_amplitude(double tau_s, double correlation_time_s, double target_lifetime_s);

}  // namespace afcmem::dd
