// fitting.hpp — least-squares fits: (stretched) exponential lifetimes and
// interference fringes.
#pragma once

#include <Eigen/Dense>

#include <vector>

namespace afcmem::fitting {

enum class DecayModel { exponential, stretched };

struct LifetimeFit {
    double lifetime = 0.0;        // 1/e time of the fitted curve
    double stretch = 1.0;         // beta; fixed to 1 for the exponential model
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (lifetime, stretch)
    double rms_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    bool non_decaying = false;    // data shows no decay; fit unbounded
};

// Fit coherence = exp(-(t/T)^beta). Requires >= 4 points with coherence in
// (0, 1]. Durations may be in any single unit; the lifetime comes back in it.
LifetimeFit fit_lifetime(const std::vector<double>& durations,
                         const std::vector<double>& coherence,
                         DecayModel model = DecayModel::exponential);

struct FringeFit {
    double offset = 0.0;      // A
    double visibility = 0.0;  // V in A (1 + V cos(phase - phase0))
    double phase0 = 0.0;
    double rms_residual = 0.0;
    bool ok = false;
};

// Linear least squares of y = a0 + a1 cos(x) + a2 sin(x); V and phase0 follow
// from the quadrature pair.
FringeFit fit_fringe(const std::vector<double>& phase_rad, const std::vector<double>& intensity);

}  // namespace afcmem::fitting
