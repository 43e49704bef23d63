// comb.hpp — atomic frequency comb profiles, analytic echo efficiency, and
// linear-response echo simulation from a discretized ensemble.
//
// Detunings are in kHz, times in microseconds; 1/Delta with Delta in kHz is
// 1e3/Delta in microseconds.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace afcmem::pulses {
struct PulseShape;
}

namespace afcmem::comb {

enum class ToothShape { gaussian, square, lorentzian };

std::string to_string(ToothShape s);
ToothShape tooth_shape_from_string(const std::string& s);

struct CombSpec {
    double periodicity_khz = 100.0;  // Delta
    double tooth_fwhm_khz = 45.0;    // gamma
    double bandwidth_khz = 1000.0;
    double background_od = 0.0;
    double peak_od = 0.8;            // alpha L at a tooth center
    ToothShape tooth_shape = ToothShape::gaussian;

    double finesse() const { return periodicity_khz / tooth_fwhm_khz; }
    int tooth_count() const;  // floor(bandwidth / Delta)
    // Tooth centers at spacing Delta, symmetric about zero detuning.
    std::vector<double> tooth_centers_khz() const;
    void validate() const;
};

// Absorption profile d(delta), evaluable at arbitrary detuning in kHz.
class CombProfile {
public:
    CombProfile(CombSpec spec);

    double operator()(double detuning_khz) const;
    const CombSpec& spec() const { return spec_; }
    // Mean optical depth of the comb part over the full bandwidth (background
    // excluded); equals alphaL/F * c_shape for non-overlapping teeth.
    double mean_comb_od() const;

private:
    CombSpec spec_;
    std::vector<double> centers_;
    double peak_scale_ = 1.0;
};

CombProfile build_comb(const CombSpec& spec);

// Area of the unit-peak tooth shape divided by its FWHM (shape constant).
double tooth_area_constant(ToothShape shape);

// Two-level echo efficiency for a gaussian-tooth comb:
//   eta = (1 - exp(-(aL/F) sqrt(pi/(4 ln2))))^2 * exp(-(1/F^2) pi^2/(2 ln2))
double afc_efficiency_analytic(double peak_od, double finesse);
double afc_efficiency_analytic(const CombSpec& spec);  // gaussian teeth only

enum class DiscretizeMode { grid, sampled };

struct AtomEnsemble {
    std::vector<double> detunings_khz;
    std::vector<double> weights;       // absorption weights, >= 0
    double mean_comb_od = 0.0;         // carried from the source profile
    double background_od = 0.0;
    double periodicity_khz = 0.0;      // comb period; 0 marks a structureless set

    void validate() const;
};

AtomEnsemble discretize(const CombSpec& spec, int atoms_per_tooth,
                        DiscretizeMode mode = DiscretizeMode::grid, std::uint64_t rng_seed = 0);

struct EchoTrace {
    std::vector<double> times_us;   // strictly increasing, 0 = input pulse center
    std::vector<double> intensity;  // normalized to the input pulse peak
};

struct EchoResult {
    EchoTrace trace;
    double echo_time_us = 0.0;       // fitted location of the first echo
    double efficiency = 0.0;         // echo peak intensity over input peak
    double time_step_us = 0.0;
};

struct EchoOptions {
    double time_step_us = 0.05;
};

// Linear-response collective emission: each detuning class is excited in
// proportion to the input spectral amplitude and precesses freely; the
// input/output coupling is folded into a (1 - exp(-mean_od)) amplitude
// factor. The first echo appears one comb period (1/Delta) after the input.
EchoResult simulate_echo(const AtomEnsemble& ensemble, const pulses::PulseShape& input_pulse,
                         double horizon_us, const EchoOptions& opts = {});

}  // namespace afcmem::comb
