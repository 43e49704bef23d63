// spin_ops.hpp — angular-momentum operator matrices for half-integer spin
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace afcmem::spin {

// Operator triple (Ix, Iy, Iz) in the |I, m> basis, m descending from +I to -I.
struct SpinOperators {
    Eigen::MatrixXcd ix;
    Eigen::MatrixXcd iy;
    Eigen::MatrixXcd iz;
    int dim{0};
};

// spin must be a non-negative half-integer (e.g. 2.5 for I = 5/2).
inline SpinOperators make_spin_operators(double spin) {
    const double two_i = 2.0 * spin;
    if (spin < 0.0 || std::abs(two_i - std::round(two_i)) > 1e-9) {
        throw std::invalid_argument("make_spin_operators: spin must be a half-integer >= 0");
    }
    const int dim = static_cast<int>(std::lround(two_i)) + 1;

    Eigen::MatrixXcd iz = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd iplus = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
        const double m = spin - k;  // row k holds |I, m>
        iz(k, k) = m;
        if (k > 0) {
            // <m+1| I+ |m> with m = spin - k
            iplus(k - 1, k) = std::sqrt(spin * (spin + 1.0) - m * (m + 1.0));
        }
    }
    const Eigen::MatrixXcd iminus = iplus.adjoint();

    SpinOperators ops;
    ops.dim = dim;
    ops.ix = 0.5 * (iplus + iminus);
    ops.iy = std::complex<double>(0.0, -0.5) * (iplus - iminus);
    ops.iz = iz;
    return ops;
}

}  // namespace afcmem::spin
