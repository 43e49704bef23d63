#include "afcmem/experiment.hpp"

#include "afcmem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "afcmem/fitting.hpp"

namespace afcmem::experiment {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void apply_pump_cycle(Eigen::Matrix<double, 6, 1>& p, const std::vector<PumpLine>& lines,
                      const PumpPreset& preset) {
    for (const auto& line : lines) {
        const double moved = preset.pump_efficiency * p(line.ground_level);
        p(line.ground_level) -= moved;
        for (int g = 0; g < 6; ++g) {
            p(g) += moved * preset.branching(g, line.excited_level);
        }
    }
}

void run_pump_phase(Eigen::Matrix<double, 6, 1>& p, const std::vector<PumpLine>& lines,
                    const PumpPreset& preset) {
    if (preset.cycles >= 0) {
        for (int c = 0; c < preset.cycles; ++c) apply_pump_cycle(p, lines, preset);
        return;
    }
    for (int c = 0; c < 100000; ++c) {
        const Eigen::Matrix<double, 6, 1> before = p;
        apply_pump_cycle(p, lines, preset);
        if ((p - before).cwiseAbs().maxCoeff() < 1e-16) break;
    }
}

}  // namespace

void LambdaSystem::validate() const {
    auto check = [](const Eigen::Matrix<double, 6, 1>& p, const char* what) {
        double sum = 0.0;
        for (int i = 0; i < 6; ++i) {
            if (p(i) < -1e-12) throw std::invalid_argument(std::string(what) + ": negative population");
            sum += p(i);
        }
        if (std::abs(sum) > 1e-12 && std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument(std::string(what) + ": populations must sum to one");
        }
    };
    check(ground_populations, "LambdaSystem ground");
    if (excited_populations.cwiseAbs().sum() > 0.0) check(excited_populations, "LambdaSystem excited");
}

LambdaSystem prepare_lambda(const spectra::LevelStructure& ground,
                            const spectra::LevelStructure& excited, const PumpPreset& preset,
                            double residual_threshold) {
    if (ground.size() != 6 || excited.size() != 6) {
        throw std::invalid_argument("prepare_lambda: need six-level ground and excited manifolds");
    }
    if (preset.class_cleaning.empty()) {
        throw std::invalid_argument("prepare_lambda: empty class-cleaning pump list");
    }
    for (int e = 0; e < 6; ++e) {
        double col = 0.0;
        for (int g = 0; g < 6; ++g) col += preset.branching(g, e);
        if (std::abs(col - 1.0) > 1e-9) {
            throw std::invalid_argument("prepare_lambda: branching columns must sum to one");
        }
    }

    LambdaSystem lambda;

    // Pump offsets are measured from the storage transition |3>g - |3>e; a
    // line outside the reachable range cannot be driven.
    const double ref =
        excited.energies_mhz(lambda.excited) - ground.energies_mhz(lambda.ground_lower);
    auto check_line = [&](const PumpLine& line) {
        if (line.ground_level < 0 || line.ground_level >= 6 || line.excited_level < 0 ||
            line.excited_level >= 6) {
            throw std::invalid_argument("prepare_lambda: pump line indexes out of range");
        }
        const double offset = (excited.energies_mhz(line.excited_level) -
                               ground.energies_mhz(line.ground_level)) -
                              ref;
        if (std::abs(offset) > preset.max_offset_mhz) {
            throw std::invalid_argument("prepare_lambda: pump line outside the reachable band");
        }
    };
    for (const auto& l : preset.class_cleaning) check_line(l);
    for (const auto& l : preset.spin_polarization) check_line(l);

    Eigen::Matrix<double, 6, 1> p = Eigen::Matrix<double, 6, 1>::Constant(1.0 / 6.0);
    run_pump_phase(p, preset.class_cleaning, preset);

    std::array<bool, 6> cleaned{};
    for (const auto& l : preset.class_cleaning) cleaned[l.ground_level] = true;
    lambda.class_selective = std::all_of(cleaned.begin(), cleaned.end(), [](bool b) { return b; });

    run_pump_phase(p, preset.spin_polarization, preset);

    lambda.ground_populations = p;
    lambda.spin_noise_risk = p(lambda.ground_upper) > residual_threshold;
    lambda.validate();
    return lambda;
}

EfficiencyBudget compose_efficiency(double eta_afc, double eta_control, double eta_spin) {
    EfficiencyBudget b;
    b.eta_afc = eta_afc;
    b.eta_control = eta_control;
    b.eta_spin = eta_spin;
    b.eta_total = eta_afc * eta_control * eta_control * eta_spin;
    return b;
}

EfficiencyBudget decompose_efficiency(double eta_total, double eta_afc, double eta_control) {
    auto in_unit = [](double x) { return x > 0.0 && x <= 1.0; };
    if (!in_unit(eta_total) || !in_unit(eta_afc) || !in_unit(eta_control)) {
        throw std::invalid_argument("decompose_efficiency: efficiencies must lie in (0, 1]");
    }
    const double ceiling = eta_afc * eta_control * eta_control;
    if (eta_total > ceiling * (1.0 + 1e-12)) {
        throw std::invalid_argument(
            "decompose_efficiency: inconsistent measurement, eta_total exceeds "
            "eta_afc * eta_control^2");
    }
    EfficiencyBudget b;
    b.eta_afc = eta_afc;
    b.eta_control = eta_control;
    b.eta_total = eta_total;
    b.eta_spin = eta_total / ceiling;
    return b;
}

double heating_penalty(const dd::DDSequence& seq, const HeatingPreset& preset,
                       const comb::CombSpec& comb_spec) {
    if (seq.pulses.empty()) return 1.0;
    if (!(preset.t_pi_us > 0.0)) throw std::invalid_argument("heating_penalty: bad t_pi");
    const double duty =
        double(seq.pulses.size()) * preset.t_pi_us * 1e-6 / seq.total_duration_s;
    const double gamma_eff =
        comb_spec.tooth_fwhm_khz + preset.tooth_broadening_khz_per_duty * duty;
    if (gamma_eff >= comb_spec.periodicity_khz) return 0.0;  // teeth merged, comb washed out
    const double eta0 = comb::afc_efficiency_analytic(comb_spec.peak_od, comb_spec.finesse());
    const double eta1 = comb::afc_efficiency_analytic(comb_spec.peak_od,
                                                      comb_spec.periodicity_khz / gamma_eff);
    return std::clamp(eta1 / eta0, 0.0, 1.0);
}

StorageResult run_storage(const comb::CombSpec& comb_spec, const pulses::PulseShape& control,
                          const dd::DDSequence& seq, const dd::NoiseModel& noise,
                          const pulses::InhomogeneousLine& line, double storage_time_s,
                          const StorageConfig& config) {
    if (storage_time_s < 0.0) throw std::invalid_argument("run_storage: negative storage time");
    const bool has_dd = !seq.pulses.empty();
    if (has_dd && std::abs(seq.total_duration_s - storage_time_s) > 0.5 * seq.interval_s) {
        throw std::invalid_argument(
            "run_storage: storage_time must match the sequence total duration");
    }

    StorageResult out;
    out.storage_time_s = storage_time_s;

    // optical stage: comb absorption and rephasing
    const comb::AtomEnsemble ensemble =
        comb::discretize(comb_spec, config.atoms_per_tooth, config.discretize_mode, config.seed);
    comb::EchoResult echo =
        comb::simulate_echo(ensemble, config.input_pulse, config.horizon_us);
    double eta_afc = echo.efficiency;
    out.echo_time_us = echo.echo_time_us;

    // control transfers down and up; a zero-amplitude control pulse stands
    // for an idealized transfer scaled only by the configured loss factor
    double eta_control = config.control_transfer_scale;
    if (control.peak_rabi_khz > 0.0) {
        std::vector<double> grid;
        const int npts = std::max(3, config.control_grid_points);
        for (int i = 0; i < npts; ++i) {
            grid.push_back(-0.5 * comb_spec.bandwidth_khz +
                           comb_spec.bandwidth_khz * i / (npts - 1));
        }
        const auto transfer = pulses::chs_transfer_efficiency(control, grid);
        eta_control = config.control_transfer_scale * transfer.average;
    }

    // heating acts on the comb while the RF sequence runs
    out.heating_factor = heating_penalty(seq, config.heating, comb_spec);
    eta_afc *= out.heating_factor;

    // spin storage: DD-protected coherence and pi-pulse coverage
    double coverage = 1.0;
    double w_coh = 1.0;
    if (storage_time_s > 0.0) {
        if (has_dd) {
            w_coh = dd::coherence_for_sequence(seq, noise);
            if (config.coverage_pulses >= 1.0) {
                coverage = pulses::inhomogeneous_coverage(line, config.heating.t_pi_us,
                                                          config.coverage_pulses,
                                                          config.coverage_model)
                               .compounded;
            }
        } else {
            const auto ramsey = dd::generate_sequence(dd::SequenceFamily::free, storage_time_s, 0);
            w_coh = dd::coherence_for_sequence(ramsey, noise);
        }
    }
    out.spin_coherence = w_coh;
    out.coverage_fraction = coverage;

    const double eta_spin = coverage * w_coh * w_coh;
    out.budget = compose_efficiency(eta_afc, eta_control, eta_spin);

    // detector-side trace: the stored fields pick up the transfer, coverage,
    // coherence, and heating amplitudes; intensity forms at the detector
    const double field_scale =
        eta_control * std::sqrt(coverage * out.heating_factor) * w_coh;
    out.trace = std::move(echo.trace);
    for (auto& y : out.trace.intensity) y *= field_scale * field_scale;
    out.snr = out.budget.eta_total / config.detector_noise_floor;
    return out;
}

InterferenceResult timebin_interference(const std::vector<double>& dphi_grid_rad,
                                        double dtheta_rad, const InterferenceConfig& config) {
    if (dphi_grid_rad.size() < 3) {
        throw std::invalid_argument("timebin_interference: need at least three phase points");
    }
    if (config.incoherent_background < 0.0 || config.coherence_factor < 0.0 ||
        config.coherence_factor > 1.0) {
        throw std::invalid_argument("timebin_interference: bad background or coherence factor");
    }

    auto gen = rng::engine(config.seed, 0x1B1Eu);
    std::normal_distribution<double> gauss(0.0, 1.0);

    InterferenceResult out;
    out.dphi_rad = dphi_grid_rad;
    out.middle_intensity.reserve(dphi_grid_rad.size());
    for (double dphi : dphi_grid_rad) {
        // coherent sum of the el and le paths plus an incoherent floor
        const double rel = dphi - dtheta_rad;
        double intensity = 0.5 * (1.0 + config.coherence_factor * std::cos(rel)) +
                           config.incoherent_background * 0.5;
        if (config.intensity_noise > 0.0) {
            intensity = std::max(0.0, intensity * (1.0 + config.intensity_noise * gauss(gen)));
        }
        out.middle_intensity.push_back(intensity);
    }

    const auto fit = fitting::fit_fringe(out.dphi_rad, out.middle_intensity);
    if (!fit.ok) throw std::runtime_error("timebin_interference: fringe fit failed (flat fringe)");
    out.visibility = std::clamp(fit.visibility, 0.0, 1.0);
    out.fidelity = 0.5 * (1.0 + out.visibility);
    out.fit_phase0 = fit.phase0;
    out.fit_rms_residual = fit.rms_residual;
    return out;
}

TransportComparison transport_vs_fiber(const MemorySpec& memory, const ChannelSpec& channel,
                                       double speed_km_per_h, double quoted_eta_at_one_hour) {
    if (!(channel.length_km >= 0.0) || !(channel.loss_db_per_km >= 0.0)) {
        throw std::invalid_argument("transport_vs_fiber: bad channel");
    }
    if (!(speed_km_per_h > 0.0) || !(memory.lifetime_s > 0.0) || !(memory.eta_ref > 0.0)) {
        throw std::invalid_argument("transport_vs_fiber: bad memory or speed");
    }

    TransportComparison out;
    out.transport_time_s = channel.length_km / speed_km_per_h * 3600.0;
    out.fiber_transmittance =
        std::pow(10.0, -channel.loss_db_per_km * channel.length_km / 10.0);

    const double dt = out.transport_time_s - memory.t_ref_s;
    out.memory_eta_amplitude_convention = memory.eta_ref * std::exp(-dt / memory.lifetime_s);
    out.memory_eta_intensity_convention = memory.eta_ref * std::exp(-2.0 * dt / memory.lifetime_s);

    const double err_amp =
        std::abs(std::log(out.memory_eta_amplitude_convention / quoted_eta_at_one_hour));
    const double err_int =
        std::abs(std::log(out.memory_eta_intensity_convention / quoted_eta_at_one_hour));
    out.favored_convention = err_int <= err_amp ? "intensity_exp_minus_2dt_over_T"
                                                : "amplitude_exp_minus_dt_over_T";

    auto crossover = [&](double k) {
        // solve eta_ref e^{-k (L/v - t_ref)/T} = 10^{-loss L / 10}; the fiber
        // loses ground linearly in L, the memory only through the travel time
        auto f = [&](double L) {
            const double mem =
                std::log(memory.eta_ref) - k * (L / speed_km_per_h * 3600.0 - memory.t_ref_s) /
                                               memory.lifetime_s;
            const double fib = -std::numbers::ln10 * channel.loss_db_per_km * L / 10.0;
            return mem - fib;
        };
        if (f(0.0) >= 0.0) return 0.0;  // memory already ahead at zero distance
        double lo = 0.0, hi = 10.0;
        while (f(hi) < 0.0) {
            hi *= 2.0;
            if (hi > 1e9) return std::numeric_limits<double>::infinity();
        }
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < 0.0 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    out.crossover_km_amplitude = crossover(1.0);
    out.crossover_km_intensity = crossover(2.0);
    return out;
}

}  // namespace afcmem::experiment
