#include "afcmem/pulses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace afcmem::pulses {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kKhzUs = 1e-3;  // kHz * us -> cycles

struct Vec3 {
    double x, y, z;
};

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Deterministic quadrature nodes over an inhomogeneous line.
struct LineNodes {
    std::vector<double> detuning_khz;
    std::vector<double> weight;  // normalized
};

LineNodes line_nodes(LineShape shape, double fwhm_khz, int n) {
    LineNodes out;
    out.detuning_khz.reserve(n);
    out.weight.reserve(n);
    double wsum = 0.0;
    if (shape == LineShape::gaussian) {
        const double sigma = fwhm_khz / 2.354820045030949;
        const double span = 5.0 * sigma;
        for (int i = 0; i < n; ++i) {
            const double x = -span + 2.0 * span * i / (n - 1);
            const double w = std::exp(-0.5 * x * x / (sigma * sigma));
            out.detuning_khz.push_back(x);
            out.weight.push_back(w);
            wsum += w;
        }
    } else {
        // delta = (gamma/2) tan(theta) maps the Lorentzian to a flat weight
        const double hwhm = 0.5 * fwhm_khz;
        const double lim = 0.5 * kPi * 0.995;
        for (int i = 0; i < n; ++i) {
            const double th = -lim + 2.0 * lim * i / (n - 1);
            out.detuning_khz.push_back(hwhm * std::tan(th));
            out.weight.push_back(1.0);
            wsum += 1.0;
        }
    }
    for (auto& w : out.weight) w /= wsum;
    return out;
}

LineNodes rabi_nodes(double rel_spread, int n) {
    LineNodes out;
    if (rel_spread <= 0.0) {
        out.detuning_khz = {0.0};
        out.weight = {1.0};
        return out;
    }
    double wsum = 0.0;
    const double span = 3.5 * rel_spread;
    for (int i = 0; i < n; ++i) {
        const double r = -span + 2.0 * span * i / (n - 1);
        const double w = std::exp(-0.5 * r * r / (rel_spread * rel_spread));
        out.detuning_khz.push_back(r);
        out.weight.push_back(w);
        wsum += w;
    }
    for (auto& w : out.weight) w /= wsum;
    return out;
}

}  // namespace

std::string to_string(PulseFamily f) {
    switch (f) {
        case PulseFamily::gaussian: return "gaussian";
        case PulseFamily::chs: return "chs";
        case PulseFamily::square: return "square";
    }
    return "?";
}

PulseFamily pulse_family_from_string(const std::string& s) {
    if (s == "gaussian") return PulseFamily::gaussian;
    if (s == "chs") return PulseFamily::chs;
    if (s == "square") return PulseFamily::square;
    throw std::invalid_argument("unknown pulse family: " + s);
}

std::string to_string(LineShape s) {
    return s == LineShape::gaussian ? "gaussian" : "lorentzian";
}

LineShape line_shape_from_string(const std::string& s) {
    if (s == "gaussian") return LineShape::gaussian;
    if (s == "lorentzian") return LineShape::lorentzian;
    throw std::invalid_argument("unknown line shape: " + s);
}

void PulseShape::validate() const {
    if (!(fwhm_us > 0.0)) throw std::invalid_argument("PulseShape: fwhm must be positive");
    if (peak_rabi_khz < 0.0) throw std::invalid_argument("PulseShape: negative amplitude");
    if (family == PulseFamily::chs) {
        if (!(chirp_hi_khz >= chirp_lo_khz)) {
            throw std::invalid_argument("PulseShape: chs chirp range reversed");
        }
        if (!(truncation > 0.0)) throw std::invalid_argument("PulseShape: chs truncation <= 0");
    }
}

double PulseShape::duration_us() const {
    return family == PulseFamily::gaussian ? 3.0 * fwhm_us : fwhm_us;
}

double PulseShape::envelope_khz(double t_us) const {
    const double d = duration_us();
    if (t_us < 0.0 || t_us > d) return 0.0;
    switch (family) {
        case PulseFamily::gaussian: {
            // offset-subtracted so the truncated envelope reaches zero at the
            // window edges instead of jumping there
            const double x = t_us - 0.5 * d;
            const double g = std::exp(-4.0 * std::numbers::ln2 * x * x / (fwhm_us * fwhm_us));
            const double edge = std::exp(-9.0 * std::numbers::ln2);  // value at +-1.5 fwhm
            return peak_rabi_khz * (g - edge) / (1.0 - edge);
        }
        case PulseFamily::square:
            return peak_rabi_khz;
        case PulseFamily::chs: {
            const double tt = 2.0 * t_us / d - 1.0;
            const double edge = 1.0 / std::cosh(truncation);
            return peak_rabi_khz * (1.0 / std::cosh(truncation * tt) - edge) / (1.0 - edge);
        }
    }
    return 0.0;
}

double PulseShape::instantaneous_detuning_khz(double t_us) const {
    if (family != PulseFamily::chs) return 0.0;
    const double d = duration_us();
    const double center = 0.5 * (chirp_lo_khz + chirp_hi_khz);
    const double span = chirp_hi_khz - chirp_lo_khz;
    const double tt = 2.0 * std::clamp(t_us, 0.0, d) / d - 1.0;
    return center + 0.5 * span * std::tanh(truncation * tt) / std::tanh(truncation);
}

double PulseShape::drive_phase_rad(double t_us) const {
    if (family != PulseFamily::chs) return carrier_phase_rad;
    const double d = duration_us();
    const double center = 0.5 * (chirp_lo_khz + chirp_hi_khz);
    const double span = chirp_hi_khz - chirp_lo_khz;
    const double t = std::clamp(t_us, 0.0, d);
    const double tt = 2.0 * t / d - 1.0;
    // integral of the tanh sweep from 0 to t
    const double sweep_integral =
        0.5 * span / std::tanh(truncation) * (d / (2.0 * truncation)) *
        (std::log(std::cosh(truncation * tt)) - std::log(std::cosh(truncation)));
    return carrier_phase_rad + kTwoPi * kKhzUs * (center * t + sweep_integral);
}

std::complex<double> PulseShape::spectral_amplitude(double detuning_khz) const {
    const double d = duration_us();
    const int n = 1024;
    const double dt = d / n;
    std::complex<double> acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = i * dt;
        const double phase = drive_phase_rad(t) + kTwoPi * kKhzUs * detuning_khz * (t - 0.5 * d);
        const double wgt = (i == 0 || i == n) ? 0.5 : 1.0;
        acc += wgt * envelope_khz(t) * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return acc * dt;
}

double BlochState::norm() const { return std::sqrt(u * u + v * v + w * w); }

double max_drive_frequency_khz(const PulseShape& pulse, double detuning_khz) {
    double chirp = 0.0;
    if (pulse.family == PulseFamily::chs) {
        chirp = std::max(std::abs(pulse.chirp_lo_khz), std::abs(pulse.chirp_hi_khz));
    }
    return std::max(1e-6, pulse.peak_rabi_khz + std::abs(detuning_khz) + chirp);
}

BlochState bloch_evolve(const BlochState& state, const PulseShape& pulse, double detuning_khz,
                        double step_us) {
    pulse.validate();
    const double d = pulse.duration_us();
    const double fmax = max_drive_frequency_khz(pulse, detuning_khz);
    const double step_limit = 50.0 / fmax;  // a twentieth of the fastest period
    if (step_us > 0.0 && step_us > step_limit) {
        throw std::invalid_argument("bloch_evolve: integration step too coarse for this pulse");
    }
    double h = step_us > 0.0 ? step_us : std::min(10.0 / (3.0 * fmax), d / 64.0);
    const int nsteps = std::max(1, static_cast<int>(std::ceil(d / h)));
    h = d / nsteps;

    const double wz = kTwoPi * kKhzUs * detuning_khz;
    auto deriv = [&](double t, const Vec3& s) {
        const double omega = kTwoPi * kKhzUs * pulse.envelope_khz(t);
        const double phi = pulse.drive_phase_rad(t);
        const Vec3 torque{omega * std::cos(phi), omega * std::sin(phi), wz};
        return cross(torque, s);
    };

    Vec3 s{state.u, state.v, state.w};
    for (int i = 0; i < nsteps; ++i) {
        const double t = i * h;
        const Vec3 k1 = deriv(t, s);
        const Vec3 k2 = deriv(t + 0.5 * h, {s.x + 0.5 * h * k1.x, s.y + 0.5 * h * k1.y,
                                            s.z + 0.5 * h * k1.z});
        const Vec3 k3 = deriv(t + 0.5 * h, {s.x + 0.5 * h * k2.x, s.y + 0.5 * h * k2.y,
                                            s.z + 0.5 * h * k2.z});
        const Vec3 k4 = deriv(t + h, {s.x + h * k3.x, s.y + h * k3.y, s.z + h * k3.z});
        s.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
        s.y += h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
        s.z += h / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);
    }
    return {s.x, s.y, s.z};
}

TransferResult chs_transfer_efficiency(const PulseShape& pulse,
                                       const std::vector<double>& detuning_grid_khz,
                                       double step_us) {
    if (pulse.family != PulseFamily::chs) {
        throw std::invalid_argument("chs_transfer_efficiency: pulse family must be chs");
    }
    if (detuning_grid_khz.empty()) {
        throw std::invalid_argument("chs_transfer_efficiency: empty detuning grid");
    }
    TransferResult out;
    out.detunings_khz = detuning_grid_khz;
    out.probability.reserve(detuning_grid_khz.size());
    double sum = 0.0;
    for (double det : detuning_grid_khz) {
        const BlochState end_state = bloch_evolve(BlochState{}, pulse, det, step_us);
        const double p = std::clamp(0.5 * (1.0 + end_state.w), 0.0, 1.0);
        out.probability.push_back(p);
        sum += p;
    }
    out.average = sum / double(detuning_grid_khz.size());
    return out;
}

void InhomogeneousLine::validate() const {
    if (!(fwhm_khz > 0.0)) throw std::invalid_argument("InhomogeneousLine: fwhm must be positive");
    if (rabi_spread < 0.0) throw std::invalid_argument("InhomogeneousLine: negative rabi spread");
}

NutationResult rabi_nutation(const PulseShape& drive, const InhomogeneousLine& line,
                             double horizon_us) {
    if (drive.family != PulseFamily::square) {
        throw std::invalid_argument("rabi_nutation: drive must be a square pulse");
    }
    drive.validate();
    line.validate();
    const double rabi = drive.peak_rabi_khz;
    if (!(rabi > 0.0)) throw std::invalid_argument("rabi_nutation: drive amplitude is zero");
    if (horizon_us < 3.0 * 1000.0 / rabi) {
        throw std::invalid_argument("rabi_nutation: horizon must cover >= 3 nutation periods");
    }

    const LineNodes det = line_nodes(line.shape, line.fwhm_khz, 121);
    const LineNodes amp = rabi_nodes(line.rabi_spread, 21);

    const double fmax = std::hypot(rabi * (1.0 + 3.5 * line.rabi_spread),
                                   *std::max_element(det.detuning_khz.begin(),
                                                     det.detuning_khz.end(),
                                                     [](double a, double b) {
                                                         return std::abs(a) < std::abs(b);
                                                     }));
    const double dt = std::min(1000.0 / (40.0 * fmax), horizon_us / 400.0);
    const int nt = static_cast<int>(std::floor(horizon_us / dt)) + 1;

    NutationResult out;
    out.times_us.reserve(nt);
    out.signal.reserve(nt);
    for (int i = 0; i < nt; ++i) {
        const double t = i * dt;
        double acc = 0.0;
        for (std::size_t a = 0; a < amp.detuning_khz.size(); ++a) {
            const double omega = rabi * (1.0 + amp.detuning_khz[a]);
            for (std::size_t k = 0; k < det.detuning_khz.size(); ++k) {
                const double delta = det.detuning_khz[k];
                const double feff2 = omega * omega + delta * delta;
                const double feff = std::sqrt(feff2);
                const double p =
                    (omega * omega / feff2) * std::pow(std::sin(kPi * kKhzUs * feff * t), 2);
                acc += amp.weight[a] * det.weight[k] * (2.0 * p - 1.0);
            }
        }
        out.times_us.push_back(t);
        out.signal.push_back(acc);
    }

    // first extremum of the averaged inversion
    for (int i = 1; i + 1 < nt; ++i) {
        if (out.signal[i] >= out.signal[i - 1] && out.signal[i] >= out.signal[i + 1]) {
            const double y0 = out.signal[i - 1], y1 = out.signal[i], y2 = out.signal[i + 1];
            const double denom = y0 - 2.0 * y1 + y2;
            const double shift = std::abs(denom) > 1e-30 ? 0.5 * (y0 - y2) / denom : 0.0;
            out.t_pi_us = out.times_us[i] + shift * dt;
            out.extremum_found = true;
            break;
        }
    }
    if (!out.extremum_found) {
        throw std::runtime_error("rabi_nutation: no extremum found within the horizon");
    }
    return out;
}

CoverageResult inhomogeneous_coverage(const InhomogeneousLine& line, double t_pi_us,
                                      double n_pulses, CoverageModel model) {
    line.validate();
    if (!(t_pi_us > 0.0)) throw std::invalid_argument("inhomogeneous_coverage: t_pi must be > 0");
    if (!(n_pulses >= 1.0)) {
        throw std::invalid_argument("inhomogeneous_coverage: need at least one pulse");
    }

    const LineNodes det = line_nodes(line.shape, line.fwhm_khz, 1601);
    const LineNodes amp = rabi_nodes(line.rabi_spread, 21);
    const double omega_nom = kPi / t_pi_us;  // rad/us

    CoverageResult out;
    for (std::size_t a = 0; a < amp.detuning_khz.size(); ++a) {
        const double omega = omega_nom * (1.0 + amp.detuning_khz[a]);
        for (std::size_t k = 0; k < det.detuning_khz.size(); ++k) {
            const double delta = kTwoPi * kKhzUs * det.detuning_khz[k];  // rad/us
            const double f2 = omega * omega + delta * delta;
            const double f = std::sqrt(f2);
            const double p = (omega * omega / f2) * std::pow(std::sin(0.5 * f * t_pi_us), 2);
            const double wgt = amp.weight[a] * det.weight[k];
            const double pn = std::pow(p, n_pulses);
            out.per_pulse += wgt * p;
            out.compounded +=
                wgt * (model == CoverageModel::coherent_survivor ? pn : pn + 0.5 * (1.0 - pn));
        }
    }
    return out;
}

}  // namespace afcmem::pulses
