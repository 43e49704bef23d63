#include "afcmem/comb.hpp"

#include "afcmem/pulses.hpp"
#include "afcmem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace afcmem::comb {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLn2 = std::numbers::ln2;
constexpr double kKhzUs = 1e-3;

double unit_tooth(ToothShape shape, double x_over_gamma) {
    // unit peak, FWHM 1 in the scaled coordinate
    switch (shape) {
        case ToothShape::gaussian:
            return std::exp(-4.0 * kLn2 * x_over_gamma * x_over_gamma);
        case ToothShape::square:
            return std::abs(x_over_gamma) < 0.5 ? 1.0 : 0.0;
        case ToothShape::lorentzian:
            return 1.0 / (1.0 + 4.0 * x_over_gamma * x_over_gamma);
    }
    return 0.0;
}

}  // namespace

std::string to_string(ToothShape s) {
    switch (s) {
        case ToothShape::gaussian: return "gaussian";
        case ToothShape::square: return "square";
        case ToothShape::lorentzian: return "lorentzian";
    }
    return "?";
}

ToothShape tooth_shape_from_string(const std::string& s) {
    if (s == "gaussian") return ToothShape::gaussian;
    if (s == "square") return ToothShape::square;
    if (s == "lorentzian") return ToothShape::lorentzian;
    throw std::invalid_argument("unknown tooth shape: " + s);
}

double tooth_area_constant(ToothShape shape) {
    switch (shape) {
        case ToothShape::gaussian:
            return 0.5 * std::sqrt(std::numbers::pi / kLn2);
        case ToothShape::square:
            return 1.0;
        case ToothShape::lorentzian:
            return 0.5 * std::numbers::pi;
    }
    return 0.0;
}

int CombSpec::tooth_count() const {
    return static_cast<int>(std::floor(bandwidth_khz / periodicity_khz + 1e-9));
}

std::vector<double> CombSpec::tooth_centers_khz() const {
    const int count = tooth_count();
    std::vector<double> centers;
    centers.reserve(count);
    for (int k = 0; k < count; ++k) {
        centers.push_back((k - 0.5 * (count - 1)) * periodicity_khz);
    }
    return centers;
}

void CombSpec::validate() const {
    if (!(tooth_fwhm_khz > 0.0)) throw std::invalid_argument("CombSpec: tooth fwhm must be > 0");
    if (!(tooth_fwhm_khz < periodicity_khz * (1.0 + 1e-12))) {
        throw std::invalid_argument("CombSpec: tooth fwhm must stay below the periodicity");
    }
    if (!(bandwidth_khz >= periodicity_khz)) {
        throw std::invalid_argument("CombSpec: bandwidth must hold at least one tooth");
    }
    if (background_od < 0.0 || peak_od < background_od) {
        throw std::invalid_argument("CombSpec: need peak_od >= background_od >= 0");
    }
}

CombProfile::CombProfile(CombSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    centers_ = spec_.tooth_centers_khz();
    if (centers_.empty()) throw std::invalid_argument("CombProfile: no teeth inside bandwidth");
    // Normalize so the highest point of the tooth sum sits at peak_od.
    double max_sum = 0.0;
    for (double c : centers_) {
        double s = 0.0;
        for (double other : centers_) {
            s += unit_tooth(spec_.tooth_shape, (c - other) / spec_.tooth_fwhm_khz);
        }
        max_sum = std::max(max_sum, s);
    }
    peak_scale_ = max_sum > 0.0 ? 1.0 / max_sum : 1.0;
}

double CombProfile::operator()(double detuning_khz) const {
    if (std::abs(detuning_khz) > 0.5 * spec_.bandwidth_khz) return spec_.background_od;
    double s = 0.0;
    for (double c : centers_) {
        s += unit_tooth(spec_.tooth_shape, (detuning_khz - c) / spec_.tooth_fwhm_khz);
    }
    return spec_.background_od + (spec_.peak_od - spec_.background_od) * peak_scale_ * s;
}

double CombProfile::mean_comb_od() const {
    // Trapezoid over the bandwidth; teeth are smooth on the gamma scale.
    const double lo = -0.5 * spec_.bandwidth_khz, hi = 0.5 * spec_.bandwidth_khz;
    const int n = std::max(2000, 200 * static_cast<int>(centers_.size()));
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        acc += w * ((*this)(x)-spec_.background_od);
    }
    return acc * (hi - lo) / n / spec_.bandwidth_khz;
}

CombProfile build_comb(const CombSpec& spec) { return CombProfile(spec); }

double afc_efficiency_analytic(double peak_od, double finesse) {
    if (!(finesse > 1.0)) throw std::invalid_argument("afc_efficiency_analytic: finesse must be > 1");
    if (peak_od < 0.0) throw std::invalid_argument("afc_efficiency_analytic: negative optical depth");
    const double eff_depth = peak_od / finesse * std::sqrt(std::numbers::pi / (4.0 * kLn2));
    const double absorbed = 1.0 - std::exp(-eff_depth);
    const double dephasing =
        std::exp(-(1.0 / (finesse * finesse)) * (std::numbers::pi * std::numbers::pi) / (2.0 * kLn2));
    return absorbed * absorbed * dephasing;
}

double afc_efficiency_analytic(const CombSpec& spec) {
    spec.validate();
    if (spec.tooth_shape != ToothShape::gaussian) {
        throw std::invalid_argument(
            "afc_efficiency_analytic: closed form holds for gaussian teeth only; "
            "use simulate_echo for other shapes");
    }
    return afc_efficiency_analytic(spec.peak_od, spec.finesse());
}

void AtomEnsemble::validate() const {
    if (detunings_khz.size() != weights.size()) {
        throw std::invalid_argument("AtomEnsemble: detunings and weights differ in length");
    }
    if (detunings_khz.empty()) throw std::invalid_argument("AtomEnsemble: empty ensemble");
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("AtomEnsemble: negative weight");
    }
}

AtomEnsemble discretize(const CombSpec& spec, int atoms_per_tooth, DiscretizeMode mode,
                        std::uint64_t rng_seed) {
    spec.validate();
    if (atoms_per_tooth < 1) throw std::invalid_argument("discretize: atoms_per_tooth must be >= 1");
    const CombProfile profile(spec);

    AtomEnsemble out;
    out.background_od = spec.background_od;
    out.mean_comb_od = profile.mean_comb_od();
    out.periodicity_khz = spec.periodicity_khz;
    const auto centers = spec.tooth_centers_khz();
    const double delta = spec.periodicity_khz;

    if (mode == DiscretizeMode::grid) {
        // Uniform grid over each period cell, symmetric about the tooth center.
        for (double c : centers) {
            for (int i = 0; i < atoms_per_tooth; ++i) {
                const double frac = (i + 0.5) / atoms_per_tooth - 0.5;
                const double det = c + frac * delta;
                out.detunings_khz.push_back(det);
                out.weights.push_back(profile(det) - spec.background_od);
            }
        }
    } else {
        // Importance sampling of the comb part by rejection, uniform weights.
        auto gen = rng::engine(rng_seed, 0xAFCu);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double peak = spec.peak_od - spec.background_od;
        const std::size_t target = centers.size() * static_cast<std::size_t>(atoms_per_tooth);
        const double lo = -0.5 * spec.bandwidth_khz, hi = 0.5 * spec.bandwidth_khz;
        while (out.detunings_khz.size() < target) {
            const double det = lo + (hi - lo) * u01(gen);
            const double accept = (profile(det) - spec.background_od) / std::max(peak, 1e-300);
            if (u01(gen) <= accept) {
                out.detunings_khz.push_back(det);
                out.weights.push_back(1.0);
            }
        }
        // Scale uniform weights so the total matches the profile area.
        const double total = out.mean_comb_od * spec.bandwidth_khz;
        for (auto& w : out.weights) w = total / double(target);
    }
    return out;
}

EchoResult simulate_echo(const AtomEnsemble& ensemble, const pulses::PulseShape& input_pulse,
                         double horizon_us, const EchoOptions& opts) {
    ensemble.validate();
    input_pulse.validate();
    if (!(opts.time_step_us > 0.0)) throw std::invalid_argument("simulate_echo: bad time step");

    // Excitation amplitude per class: weight times the input spectrum there.
    const std::size_t nclass = ensemble.detunings_khz.size();
    std::vector<std::complex<double>> excitation(nclass);
    std::complex<double> p0 = 0.0;
    for (std::size_t k = 0; k < nclass; ++k) {
        excitation[k] =
            ensemble.weights[k] * input_pulse.spectral_amplitude(ensemble.detunings_khz[k]);
        p0 += excitation[k];
    }
    if (std::abs(p0) <= 0.0) throw std::runtime_error("simulate_echo: input spectrum misses the comb");

    // Input/output coupling folded into a scalar absorption/re-emission factor.
    const double coupling =
        (1.0 - std::exp(-ensemble.mean_comb_od)) * std::exp(-0.5 * ensemble.background_od);

    const int nt = static_cast<int>(std::floor(horizon_us / opts.time_step_us)) + 1;
    EchoResult out;
    out.time_step_us = opts.time_step_us;
    out.trace.times_us.reserve(nt);
    out.trace.intensity.reserve(nt);

    // Kahan-style compensated accumulation keeps the class sum order-stable.
    for (int i = 0; i < nt; ++i) {
        const double t = i * opts.time_step_us;
        std::complex<double> acc = 0.0, comp = 0.0;
        for (std::size_t k = 0; k < nclass; ++k) {
            const double phase = -kTwoPi * kKhzUs * ensemble.detunings_khz[k] * t;
            const std::complex<double> term =
                excitation[k] * std::complex<double>(std::cos(phase), std::sin(phase));
            const std::complex<double> y = term - comp;
            const std::complex<double> s = acc + y;
            comp = (s - acc) - y;
            acc = s;
        }
        const double amp = coupling * std::abs(acc) / std::abs(p0);
        out.trace.times_us.push_back(t);
        out.trace.intensity.push_back(amp * amp);
    }

    // First echo: strongest sample in a window around one comb period.
    const double delta_khz = ensemble.periodicity_khz;
    if (delta_khz > 0.0) {
        const double t_echo_nominal = 1000.0 / delta_khz;
        if (horizon_us < t_echo_nominal) {
            throw std::invalid_argument("simulate_echo: horizon shorter than the echo time 1/Delta");
        }
        const double lo = 0.5 * t_echo_nominal, hi = std::min(horizon_us, 1.5 * t_echo_nominal);
        int best = -1;
        for (int i = 0; i < nt; ++i) {
            const double t = out.trace.times_us[i];
            if (t < lo || t > hi) continue;
            if (best < 0 || out.trace.intensity[i] > out.trace.intensity[best]) best = i;
        }
        if (best >= 0) {
            out.echo_time_us = out.trace.times_us[best];
            out.efficiency = out.trace.intensity[best];
        }
    } else {
        // single class: flat revival, efficiency read at the end of the trace
        out.echo_time_us = out.trace.times_us.back();
        out.efficiency = out.trace.intensity.back();
    }
    return out;
}

}  // namespace afcmem::comb
