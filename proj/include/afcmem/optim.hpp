// optim.hpp — derivative-free Nelder-Mead simplex minimizer
#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace afcmem::optim {

struct SimplexOptions {
    int max_iterations = 2000;
    double f_tolerance = 1e-12;        // spread of simplex values
    double x_tolerance = 1e-10;        // simplex diameter
    double initial_step = 0.1;         // per-coordinate step building the first simplex
    std::vector<double> initial_steps; // optional per-coordinate override
};

struct SimplexResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    bool converged = false;
};

// Standard Nelder-Mead with reflection/expansion/contraction/shrink.
// Deterministic for a given starting point and objective.
inline SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x0, const SimplexOptions& opts = {}) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        const double step =
            i < opts.initial_steps.size() ? opts.initial_steps[i] : opts.initial_step;
        pts[i + 1][i] += step;
    }
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

    SimplexResult res;
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        std::vector<std::size_t> order(n + 1);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });

        const std::size_t best = order[0], worst = order[n], second = order[n - 1];

        double diam = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t d = 0; d < n; ++d)
                diam = std::max(diam, std::abs(pts[i][d] - pts[best][d]));
        if (std::abs(vals[worst] - vals[best]) < opts.f_tolerance && diam < opts.x_tolerance) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d] / double(n);
        }

        auto affine = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t d = 0; d < n; ++d)
                p[d] = centroid[d] + t * (pts[worst][d] - centroid[d]);
            return p;
        };

        const std::vector<double> xr = affine(-1.0);
        const double fr = f(xr);
        if (fr < vals[best]) {
            const std::vector<double> xe = affine(-2.0);
            const double fe = f(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const std::vector<double> xc = affine(outside ? -0.5 : 0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, vals[worst])) {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t d = 0; d < n; ++d)
                        pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i <= n; ++i)
        if (vals[i] < vals[best]) best = i;
    res.x = pts[best];
    res.value = vals[best];
    res.iterations = iter;
    return res;
}

}  // namespace afcmem::optim
