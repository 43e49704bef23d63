#include "afcmem/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace afcmem::fitting {

namespace {

double model_value(double t, double log_T, double log_beta) {
    const double T = std::exp(log_T);
    const double beta = std::exp(log_beta);
    return std::exp(-std::pow(t / T, beta));
}

}  // namespace

LifetimeFit fit_lifetime(const std::vector<double>& durations,
                         const std::vector<double>& coherence, DecayModel model) {
    const std::size_t n = durations.size();
    if (n < 4 || coherence.size() != n) {
        throw std::invalid_argument("fit_lifetime: need >= 4 (duration, coherence) pairs");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(durations[i] > 0.0)) throw std::invalid_argument("fit_lifetime: durations must be > 0");
        if (!(coherence[i] > 0.0) || coherence[i] > 1.0 + 1e-12) {
            throw std::invalid_argument("fit_lifetime: coherence values must lie in (0, 1]");
        }
    }

    LifetimeFit out;

    // Initial guess from the log-log linearization of usable points.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = coherence[i];
        if (y > 0.999999 || y < 1e-12) continue;
        const double lx = std::log(durations[i]);
        const double lz = std::log(-std::log(y));
        sx += lx; sy += lz; sxx += lx * lx; sxy += lx * lz;
        ++m;
    }
    if (m < 2) {
        out.non_decaying = true;
        out.lifetime = durations.back() * 1e6;
        out.stretch = 1.0;
        return out;
    }
    double beta0 = (m * sxy - sx * sy) / std::max(m * sxx - sx * sx, 1e-30);
    beta0 = std::clamp(beta0, 0.05, 20.0);
    const double logT0 = (sx / m) - (sy / m) / beta0;

    const bool fit_beta = model == DecayModel::stretched;
    double log_T = logT0;
    double log_beta = fit_beta ? std::log(beta0) : 0.0;

    // Levenberg-Marquardt on (log T[, log beta]).
    double lambda = 1e-3;
    const int kdim = fit_beta ? 2 : 1;
    auto ssr_at = [&](double lt, double lb) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = model_value(durations[i], lt, lb) - coherence[i];
            s += r * r;
        }
        return s;
    };
    double ssr = ssr_at(log_T, log_beta);
    int iter = 0;
    for (; iter < 200; ++iter) {
        Eigen::MatrixXd jac(n, kdim);
        Eigen::VectorXd res(n);
        const double eps = 1e-7;
        for (std::size_t i = 0; i < n; ++i) {
            const double f0 = model_value(durations[i], log_T, log_beta);
            res(i) = f0 - coherence[i];
            jac(i, 0) = (model_value(durations[i], log_T + eps, log_beta) - f0) / eps;
            if (fit_beta) {
                jac(i, 1) = (model_value(durations[i], log_T, log_beta + eps) - f0) / eps;
            }
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * res;
        if (jtr.norm() < 1e-14) {
            out.converged = true;
            break;
        }
        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd damped = jtj;
            for (int d = 0; d < kdim; ++d) damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(jtr);
            const double lt = log_T - step(0);
            const double lb = fit_beta ? log_beta - step(1) : log_beta;
            const double trial = ssr_at(lt, lb);
            if (trial < ssr) {
                log_T = lt;
                log_beta = lb;
                if (std::abs(ssr - trial) < 1e-16 * (1.0 + ssr)) {
                    ssr = trial;
                    out.converged = true;
                }
                ssr = trial;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped || out.converged) {
            out.converged = true;
            break;
        }
    }

    out.lifetime = std::exp(log_T);
    out.stretch = fit_beta ? std::exp(log_beta) : 1.0;
    out.iterations = iter;
    out.rms_residual = std::sqrt(ssr / double(n));
    if (out.lifetime > 1e5 * durations.back()) out.non_decaying = true;

    // Covariance in (lifetime, stretch) via the log-parameter Jacobian.
    {
        Eigen::MatrixXd jac(n, kdim);
        const double eps = 1e-7;
        for (std::size_t i = 0; i < n; ++i) {
            const double f0 = model_value(durations[i], log_T, log_beta);
            jac(i, 0) = (model_value(durations[i], log_T + eps, log_beta) - f0) / eps;
            if (fit_beta) jac(i, 1) = (model_value(durations[i], log_T, log_beta + eps) - f0) / eps;
        }
        const int dof = std::max<int>(1, int(n) - kdim);
        const double s2 = ssr / dof;
        const Eigen::MatrixXd cov_log =
            (jac.transpose() * jac + 1e-30 * Eigen::MatrixXd::Identity(kdim, kdim)).inverse() * s2;
        out.covariance.setZero();
        out.covariance(0, 0) = cov_log(0, 0) * out.lifetime * out.lifetime;
        if (fit_beta) {
            out.covariance(1, 1) = cov_log(1, 1) * out.stretch * out.stretch;
            out.covariance(0, 1) = out.covariance(1, 0) =
                cov_log(0, 1) * out.lifetime * out.stretch;
        }
    }
    return out;
}

FringeFit fit_fringe(const std::vector<double>& phase_rad, const std::vector<double>& intensity) {
    const std::size_t n = phase_rad.size();
    if (n < 3 || intensity.size() != n) {
        throw std::invalid_argument("fit_fringe: need >= 3 (phase, intensity) pairs");
    }
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = std::cos(phase_rad[i]);
        a(i, 2) = std::sin(phase_rad[i]);
        y(i) = intensity[i];
    }
    const Eigen::Vector3d c = (a.transpose() * a).ldlt().solve(a.transpose() * y);
    FringeFit out;
    out.offset = c(0);
    if (!(c(0) > 0.0)) {
        out.ok = false;  // degenerate or empty fringe
        return out;
    }
    out.visibility = std::hypot(c(1), c(2)) / c(0);
    out.phase0 = std::atan2(c(2), c(1));
    const Eigen::VectorXd r = a * c - y;
    out.rms_residual = std::sqrt(r.squaredNorm() / double(n));
    out.ok = true;
    return out;
}

}  // namespace afcmem::fitting
