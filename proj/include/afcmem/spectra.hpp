// spectra.hpp — hyperfine level structures, transition tables, ZEFOZ search,
// and synthetic Raman-heterodyne scans.
//
// Effective nuclear-spin Hamiltonian for one electronic state:
//     H = B.M.I + I.Q.I
// with M the (symmetric) Zeeman tensor in MHz/T, Q the symmetric traceless
// quadrupole tensor in MHz, and I the spin-5/2 operator vector. All energies
// are in MHz, fields in tesla, expressed in the crystal [D1, D2, b] frame.
#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace afcmem::spectra {

enum class StateLabel { ground, excited };

std::string to_string(StateLabel s);
StateLabel state_label_from_string(const std::string& s);

struct SpinSystem {
    double spin = 2.5;
    Eigen::Matrix3d zeeman_mhz_per_t = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d quadrupole_mhz = Eigen::Matrix3d::Zero();
    StateLabel label = StateLabel::ground;

    int dimension() const;
    // Throws std::invalid_argument if a tensor is asymmetric or Q has a trace.
    void validate() const;
};

struct MagneticField {
    double magnitude_t = 0.0;
    Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit vector

    static MagneticField from_vector(const Eigen::Vector3d& b_t);
    Eigen::Vector3d vector_t() const { return magnitude_t * direction; }
    void validate() const;
};

struct LevelStructure {
    Eigen::VectorXd energies_mhz;   // ascending
    Eigen::MatrixXcd eigenvectors;  // columns, unitary
    StateLabel state_label = StateLabel::ground;

    int size() const { return static_cast<int>(energies_mhz.size()); }
};

struct Transition {
    int lower = 0;  // 0-based level indices, lower < upper in energy order
    int upper = 0;
    double frequency_mhz = 0.0;
    Eigen::Vector3d s1_mhz_per_t = Eigen::Vector3d::Zero();  // gradient d f / d B
    bool degenerate = false;  // frequency below the degeneracy tolerance
};

struct TransitionTable {
    std::vector<Transition> transitions;  // all pairs lower < upper

    const Transition& get(int i, int j) const;  // order-insensitive lookup
};

// Assemble H = B.M.I + I.Q.I for the given field. Throws std::runtime_error
// if the assembled matrix fails the Hermiticity check (tensor corruption).
Eigen::MatrixXcd assemble_hamiltonian(const SpinSystem& system, const Eigen::Vector3d& field_t);

LevelStructure level_structure(const SpinSystem& system, const MagneticField& field);

// Reorder `levels` to follow `reference` by eigenvector overlap. Used to keep
// labels continuous across a field sweep through avoided crossings.
LevelStructure track_levels(const LevelStructure& levels, const LevelStructure& reference);

struct TransitionOptions {
    double fd_step_t = 1e-5;          // central-difference step for S1
    double degeneracy_tol_mhz = 1e-6;
};

TransitionTable transition_frequencies(const LevelStructure& levels, const SpinSystem& system,
                                       const MagneticField& field,
                                       const TransitionOptions& opts = {});

// Single transition frequency |E_upper - E_lower| at a field, ascending labels.
double transition_frequency(const SpinSystem& system, const Eigen::Vector3d& field_t, int lower,
                            int upper);

// Analytic first-order Zeeman gradient via the Hellmann-Feynman theorem.
// Valid away from degeneracies.
Eigen::Vector3d s1_hellmann_feynman(const SpinSystem& system, const Eigen::Vector3d& field_t,
                                    int lower, int upper);

// Finite-difference gradient of an arbitrary scalar function of the field.
Eigen::Vector3d field_gradient(const std::function<double(const Eigen::Vector3d&)>& f,
                               const Eigen::Vector3d& field_t, double step_t);

Eigen::Matrix3d field_hessian(const std::function<double(const Eigen::Vector3d&)>& f,
                              const Eigen::Vector3d& field_t, double step_t);

struct ZefozOptions {
    double tolerance_mhz_per_t = 1e-3;  // target |S1|
    double min_magnitude_t = 0.05;      // rejects collapse onto B = 0
    int max_iterations = 4000;
    double fd_step_t = 1e-5;
    double initial_step_t = 0.02;       // simplex seed, magnitude coordinate
    double initial_step_rad = 0.02;     // simplex seed, angle coordinates
};

struct ZefozResult {
    MagneticField field;
    double s1_norm_mhz_per_t = 0.0;
    Eigen::Matrix3d s2_mhz_per_t2 = Eigen::Matrix3d::Zero();
    bool converged = false;
    int iterations = 0;
};

// Minimize |grad_B f(B)| over (magnitude, polar, azimuth) for an arbitrary
// field -> frequency map. The parameterization keeps the direction on the
// unit sphere without renormalization drift.
ZefozResult zefoz_search(const std::function<double(const Eigen::Vector3d&)>& frequency_of_field,
                         const MagneticField& initial_field, const ZefozOptions& opts = {});

ZefozResult find_zefoz(const SpinSystem& system, int lower, int upper,
                       const MagneticField& initial_field, const ZefozOptions& opts = {});

struct RhdScanResult {
    std::vector<double> frequency_mhz;
    std::vector<double> signal;
    bool empty_band = false;  // set when no transition falls inside the range
};

// Synthetic pulsed-RHD spectrum: Lorentzian peak of FWHM `linewidth_khz` per
// in-range transition, peak height proportional to the per-transition weight.
// `amplitudes` is indexed like `table.transitions`; missing entries are zero.
RhdScanResult rhd_scan(const TransitionTable& table, double f_lo_mhz, double f_hi_mhz,
                       double step_mhz, double linewidth_khz,
                       const std::vector<double>& amplitudes);

}  // namespace afcmem::spectra
