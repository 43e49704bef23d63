#include "afcmem/spectra.hpp"

#include "afcmem/optim.hpp"
#include "afcmem/spin_ops.hpp"

#include <cmath>
#include <stdexcept>

namespace afcmem::spectra {

namespace {

Eigen::Vector3d spherical_to_unit(double polar, double azimuth) {
    return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
            std::cos(polar)};
}

}  // namespace

std::string to_string(StateLabel s) {
    return s == StateLabel::ground ? "ground" : "excited";
}

StateLabel state_label_from_string(const std::string& s) {
    if (s == "ground") return StateLabel::ground;
    if (s == "excited") return StateLabel::excited;
    throw std::invalid_argument("unknown state label: " + s);
}

int SpinSystem::dimension() const {
    return static_cast<int>(std::lround(2.0 * spin)) + 1;
}

void SpinSystem::validate() const {
    const double two_i = 2.0 * spin;
    if (spin <= 0.0 || std::abs(two_i - std::round(two_i)) > 1e-9) {
        throw std::invalid_argument("SpinSystem: spin must be a positive half-integer");
    }
    auto check_symmetric = [](const Eigen::Matrix3d& t, const char* name) {
        const double scale = std::max(t.cwiseAbs().maxCoeff(), 1e-300);
        if ((t - t.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw std::invalid_argument(std::string("SpinSystem: ") + name + " not symmetric");
        }
    };
    check_symmetric(zeeman_mhz_per_t, "zeeman tensor");
    check_symmetric(quadrupole_mhz, "quadrupole tensor");
    const double qscale = quadrupole_mhz.cwiseAbs().maxCoeff();
    if (qscale > 0.0 && std::abs(quadrupole_mhz.trace()) > 1e-9 * qscale) {
        throw std::invalid_argument("SpinSystem: quadrupole tensor must be traceless");
    }
}

MagneticField MagneticField::from_vector(const Eigen::Vector3d& b_t) {
    MagneticField f;
    f.magnitude_t = b_t.norm();
    f.direction = f.magnitude_t > 0.0 ? Eigen::Vector3d(b_t / f.magnitude_t)
                                      : Eigen::Vector3d::UnitZ();
    return f;
}

void MagneticField::validate() const {
    if (magnitude_t < 0.0) throw std::invalid_argument("MagneticField: negative magnitude");
    if (std::abs(direction.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("MagneticField: direction must be a unit vector");
    }
}

const Transition& TransitionTable::get(int i, int j) const {
    const int lo = std::min(i, j), hi = std::max(i, j);
    for (const auto& t : transitions) {
        if (t.lower == lo && t.upper == hi) return t;
    }
    throw std::out_of_range("TransitionTable: no such level pair");
}

Eigen::MatrixXcd assemble_hamiltonian(const SpinSystem& system, const Eigen::Vector3d& field_t) {
    const auto ops = spin::make_spin_operators(system.spin);
    const std::array<const Eigen::MatrixXcd*, 3> iv{&ops.ix, &ops.iy, &ops.iz};

    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(ops.dim, ops.dim);
    const Eigen::Vector3d bm = system.zeeman_mhz_per_t.transpose() * field_t;  // B.M
    for (int a = 0; a < 3; ++a) {
        h += bm(a) * (*iv[a]);
        for (int b = 0; b < 3; ++b) {
            h += system.quadrupole_mhz(a, b) * (*iv[a]) * (*iv[b]);
        }
    }

    const double scale = std::max(h.cwiseAbs().maxCoeff(), 1e-300);
    if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw std::runtime_error("assemble_hamiltonian: non-Hermitian result, tensors corrupted");
    }
    return h;
}

LevelStructure level_structure(const SpinSystem& system, const MagneticField& field) {
    system.validate();
    field.validate();
    const Eigen::MatrixXcd h = assemble_hamiltonian(system, field.vector_t());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("level_structure: eigensolver failed to converge");
    }
    LevelStructure out;
    out.energies_mhz = solver.eigenvalues();  // ascending
    out.eigenvectors = solver.eigenvectors();
    out.state_label = system.label;
    return out;
}

LevelStructure track_levels(const LevelStructure& levels, const LevelStructure& reference) {
    const int n = levels.size();
    if (reference.size() != n) {
        throw std::invalid_argument("track_levels: dimension mismatch");
    }
    // Greedy assignment by overlap magnitude; adequate for well-separated
    // crossings along a sweep.
    std::vector<int> assignment(n, -1);
    std::vector<bool> used(n, false);
    const Eigen::MatrixXcd overlap = reference.eigenvectors.adjoint() * levels.eigenvectors;
    for (int ref = 0; ref < n; ++ref) {
        int best = -1;
        double best_mag = -1.0;
        for (int k = 0; k < n; ++k) {
            if (used[k]) continue;
            const double mag = std::abs(overlap(ref, k));
            if (mag > best_mag) {
                best_mag = mag;
                best = k;
            }
        }
        assignment[ref] = best;
        used[best] = true;
    }
    LevelStructure out;
    out.state_label = levels.state_label;
    out.energies_mhz.resize(n);
    out.eigenvectors.resize(n, n);
    for (int ref = 0; ref < n; ++ref) {
        out.energies_mhz(ref) = levels.energies_mhz(assignment[ref]);
        out.eigenvectors.col(ref) = levels.eigenvectors.col(assignment[ref]);
    }
    return out;
}

double transition_frequency(const SpinSystem& system, const Eigen::Vector3d& field_t, int lower,
                            int upper) {
    const Eigen::MatrixXcd h = assemble_hamiltonian(system, field_t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("transition_frequency: eigensolver failed");
    }
    return solver.eigenvalues()(upper) - solver.eigenvalues()(lower);
}

Eigen::Vector3d field_gradient(const std::function<double(const Eigen::Vector3d&)>& f,
                               const Eigen::Vector3d& field_t, double step_t) {
    Eigen::Vector3d g;
    for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d hp = field_t, hm = field_t;
        hp(a) += step_t;
        hm(a) -= step_t;
        g(a) = (f(hp) - f(hm)) / (2.0 * step_t);
    }
    return g;
}

Eigen::Matrix3d field_hessian(const std::function<double(const Eigen::Vector3d&)>& f,
                              const Eigen::Vector3d& field_t, double step_t) {
    Eigen::Matrix3d h;
    const double f0 = f(field_t);
    for (int a = 0; a < 3; ++a) {
        for (int b = a; b < 3; ++b) {
            if (a == b) {
                Eigen::Vector3d hp = field_t, hm = field_t;
                hp(a) += step_t;
                hm(a) -= step_t;
                h(a, a) = (f(hp) - 2.0 * f0 + f(hm)) / (step_t * step_t);
            } else {
                Eigen::Vector3d pp = field_t, pm = field_t, mp = field_t, mm = field_t;
                pp(a) += step_t; pp(b) += step_t;
                pm(a) += step_t; pm(b) -= step_t;
                mp(a) -= step_t; mp(b) += step_t;
                mm(a) -= step_t; mm(b) -= step_t;
                h(a, b) = h(b, a) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * step_t * step_t);
            }
        }
    }
    return h;
}

TransitionTable transition_frequencies(const LevelStructure& levels, const SpinSystem& system,
                                       const MagneticField& field, const TransitionOptions& opts) {
    const int n = levels.size();
    TransitionTable table;
    table.transitions.reserve(n * (n - 1) / 2);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            Transition t;
            t.lower = i;
            t.upper = j;
            t.frequency_mhz = levels.energies_mhz(j) - levels.energies_mhz(i);
            t.degenerate = t.frequency_mhz < opts.degeneracy_tol_mhz;
            t.s1_mhz_per_t = field_gradient(
                [&](const Eigen::Vector3d& b) { return transition_frequency(system, b, i, j); },
                field.vector_t(), opts.fd_step_t);
            table.transitions.push_back(t);
        }
    }
    return table;
}

Eigen::Vector3d s1_hellmann_feynman(const SpinSystem& system, const Eigen::Vector3d& field_t,
                                    int lower, int upper) {
    const Eigen::MatrixXcd h = assemble_hamiltonian(system, field_t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("s1_hellmann_feynman: eigensolver failed");
    }
    const auto ops = spin::make_spin_operators(system.spin);
    const std::array<const Eigen::MatrixXcd*, 3> iv{&ops.ix, &ops.iy, &ops.iz};
    const Eigen::VectorXcd lo = solver.eigenvectors().col(lower);
    const Eigen::VectorXcd up = solver.eigenvectors().col(upper);

    // dH/dB_a = sum_b M_ab I_b; S1_a = <up|dH/dB_a|up> - <lo|dH/dB_a|lo>
    Eigen::Vector3d s1;
    for (int a = 0; a < 3; ++a) {
        Eigen::MatrixXcd dh = Eigen::MatrixXcd::Zero(ops.dim, ops.dim);
        for (int b = 0; b < 3; ++b) dh += system.zeeman_mhz_per_t(a, b) * (*iv[b]);
        const std::complex<double> val =
            up.dot(dh * up) - lo.dot(dh * lo);  // dot() conjugates the left side
        s1(a) = val.real();
    }
    return s1;
}

ZefozResult zefoz_search(const std::function<double(const Eigen::Vector3d&)>& frequency_of_field,
                         const MagneticField& initial_field, const ZefozOptions& opts) {
    initial_field.validate();

    auto s1_norm_at = [&](const Eigen::Vector3d& b) {
        return field_gradient(frequency_of_field, b, opts.fd_step_t).norm();
    };

    const Eigen::Vector3d d0 = initial_field.direction;
    const double polar0 = std::acos(std::clamp(d0.z(), -1.0, 1.0));
    const double azimuth0 = std::atan2(d0.y(), d0.x());

    auto decode = [](const std::vector<double>& x) {
        return MagneticField{std::abs(x[0]), spherical_to_unit(x[1], x[2])};
    };

    auto objective = [&](const std::vector<double>& x) {
        const MagneticField f = decode(x);
        if (f.magnitude_t < opts.min_magnitude_t) {
            return 1e30;  // reject collapse onto the trivial B = 0 minimum
        }
        return s1_norm_at(f.vector_t());
    };

    ZefozResult res;

    // Converged before any iteration (also covers tolerance = infinity).
    const double initial_norm = s1_norm_at(initial_field.vector_t());
    if (!(initial_norm > opts.tolerance_mhz_per_t)) {
        res.field = initial_field;
        res.s1_norm_mhz_per_t = initial_norm;
        res.s2_mhz_per_t2 =
            field_hessian(frequency_of_field, initial_field.vector_t(), opts.fd_step_t);
        res.converged = true;
        return res;
    }

    optim::SimplexOptions sopts;
    sopts.max_iterations = opts.max_iterations;
    sopts.f_tolerance = 1e-14;
    sopts.x_tolerance = 1e-12;
    sopts.initial_steps = {opts.initial_step_t, opts.initial_step_rad, opts.initial_step_rad};

    const auto sim = optim::nelder_mead(objective, {initial_field.magnitude_t, polar0, azimuth0},
                                        sopts);

    res.field = decode(sim.x);
    res.s1_norm_mhz_per_t = sim.value;
    res.iterations = sim.iterations;
    res.converged = sim.value <= opts.tolerance_mhz_per_t;
    res.s2_mhz_per_t2 = field_hessian(frequency_of_field, res.field.vector_t(), opts.fd_step_t);
    return res;
}

ZefozResult find_zefoz(const SpinSystem& system, int lower, int upper,
                       const MagneticField& initial_field, const ZefozOptions& opts) {
    if (lower == upper) throw std::invalid_argument("find_zefoz: need two distinct levels");
    const int lo = std::min(lower, upper), hi = std::max(lower, upper);
    return zefoz_search(
        [&, lo, hi](const Eigen::Vector3d& b) { return transition_frequency(system, b, lo, hi); },
        initial_field, opts);
}

RhdScanResult rhd_scan(const TransitionTable& table, double f_lo_mhz, double f_hi_mhz,
                       double step_mhz, double linewidth_khz, const std::vector<double>& amplitudes) {
    if (!(f_hi_mhz > f_lo_mhz)) throw std::invalid_argument("rhd_scan: empty or reversed range");
    if (!(step_mhz > 0.0)) throw std::invalid_argument("rhd_scan: step must be positive");
    if (!(linewidth_khz > 0.0)) throw std::invalid_argument("rhd_scan: linewidth must be positive");

    struct Peak {
        double center;
        double weight;
    };
    std::vector<Peak> peaks;
    for (std::size_t k = 0; k < table.transitions.size(); ++k) {
        const auto& t = table.transitions[k];
        const double w = k < amplitudes.size() ? amplitudes[k] : 0.0;
        if (t.frequency_mhz >= f_lo_mhz && t.frequency_mhz <= f_hi_mhz) {
            peaks.push_back({t.frequency_mhz, w});
        }
    }

    RhdScanResult out;
    out.empty_band = peaks.empty();
    const double hwhm = 0.5 * linewidth_khz * 1e-3;  // MHz
    const int n = static_cast<int>(std::floor((f_hi_mhz - f_lo_mhz) / step_mhz)) + 1;
    out.frequency_mhz.reserve(n);
    out.signal.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double f = f_lo_mhz + i * step_mhz;
        double s = 0.0;
        for (const auto& p : peaks) {
            const double x = f - p.center;
            s += p.weight * hwhm * hwhm / (x * x + hwhm * hwhm);
        }
        out.frequency_mhz.push_back(f);
        out.signal.push_back(s);
    }
    return out;
}

}  // namespace afcmem::spectra
