// quadrature.hpp — adaptive Simpson integration
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace afcmem::quad {

namespace detail {

inline double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive(const std::function<double(double)>& f, double a, double fa, double b,
                       double fb, double m, double fm, double whole, double tol, int depth,
                       int max_depth, bool& ok) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    const double delta = left + right - whole;
    if (depth >= max_depth) {
        ok = false;
        return left + right + delta / 15.0;
    }
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adaptive(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1, max_depth, ok) +
           adaptive(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1, max_depth, ok);
}

}  // namespace detail

struct IntegrationResult {
    double value = 0.0;
    bool converged = true;
};

inline IntegrationResult integrate(const std::function<double(double)>& f, double a, double b,
                                   double abs_tol = 1e-12, int max_depth = 48) {
    if (!(b >= a)) throw std::invalid_argument("integrate: bad interval");
    if (a == b) return {0.0, true};
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = detail::simpson(a, fa, b, fb, fm);
    IntegrationResult res;
    res.value =
        detail::adaptive(f, a, fa, b, fb, m, fm, whole, abs_tol, 0, max_depth, res.converged);
    return res;
}

// Integrate over [a, b] split at the supplied breakpoints (peaks, cutoffs).
inline IntegrationResult integrate_split(const std::function<double(double)>& f, double a, double b,
                                         const std::vector<double>& breakpoints,
                                         double abs_tol = 1e-12, int max_depth = 48) {
    std::vector<double> knots{a};
    for (double x : breakpoints)
        if (x > a && x < b) knots.push_back(x);
    knots.push_back(b);
    std::sort(knots.begin(), knots.end());
    IntegrationResult total;
    const double per_tol = abs_tol / double(knots.size());
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        auto r = integrate(f, knots[i], knots[i + 1], per_tol, max_depth);
        total.value += r.value;
        total.converged = total.converged && r.converged;
    }
    return total;
}

}  // namespace afcmem::quad
