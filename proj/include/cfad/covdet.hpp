#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "cfad/airlink.hpp"
#include "cfad/errors.hpp"
#include "cfad/scenario.hpp"

namespace cfad {

/// Per-AP negative log-likelihood, constants independent of gamma
/// dropped: N log|Q| + tr(Q^-1 Y Y^H), Q = Phi diag(gamma) Phi^H + sigma2 I.
inline double per_ap_nll(const Eigen::VectorXd& gamma, const PilotMatrix& phi,
                         const Eigen::MatrixXcd& frame, double sigma2) {
    if (sigma2 <= 0.0) throw std::domain_error("per_ap_nll: sigma2 must be positive");
    if ((gamma.array() < 0.0).any())
        throw std::domain_error("per_ap_nll: gamma must be non-negative");
    const Eigen::Index tau = phi.rows();
    Eigen::MatrixXcd q = phi * gamma.asDiagonal() * phi.adjoint();
    q += sigma2 * Eigen::MatrixXcd::Identity(tau, tau);
    const Eigen::LLT<Eigen::MatrixXcd> llt(q);
    if (llt.info() != Eigen::Success) throw NumericError("per_ap_nll: covariance not PD");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < tau; ++i)
        logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
    const double n = static_cast<double>(frame.cols());
    const double trace_term = (frame.adjoint() * llt.solve(frame)).real().trace();
    return n * logdet + trace_term;
}

struct CoordDescentResult {
    Eigen::VectorXd gamma;          // length K, non-negative
    std::vector<double> nll_trace;  // value after every coordinate update
    int sweeps_done = 0;
};

/// Cyclic coordinate descent on the per-AP covariance ML objective.
/// Each coordinate has a closed-form minimizer from the rank-one
/// structure; the inverse covariance is maintained by Sherman-Morrison
/// updates and refreshed from a direct factorization once per sweep.
inline CoordDescentResult coordinate_descent(const PilotMatrix& phi,
                                             const Eigen::MatrixXcd& frame, double sigma2,
                                             int max_sweeps = 15, double tol = 1e-8) {
    if (max_sweeps < 1) throw std::domain_error("coordinate_descent: need >= 1 sweep");
    if (sigma2 <= 0.0) throw std::domain_error("coordinate_descent: sigma2 must be positive");
    const Eigen::Index tau = phi.rows();
    const Eigen::Index k_count = phi.cols();
    const double n = static_cast<double>(frame.cols());

    const Eigen::MatrixXcd sample_cov = frame * frame.adjoint() / n;

    CoordDescentResult res;
    res.gamma = Eigen::VectorXd::Zero(k_count);
    Eigen::MatrixXcd qinv = Eigen::MatrixXcd::Identity(tau, tau) / sigma2;
    double nll = n * (static_cast<double>(tau) * std::log(sigma2) +
                      sample_cov.real().trace() / sigma2);

    const Eigen::MatrixXcd ident = Eigen::MatrixXcd::Identity(tau, tau);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index k = 0; k < k_count; ++k) {
            const Eigen::VectorXcd u = qinv * phi.col(k);
            const double a = std::real(phi.col(k).dot(u));  // phi^H Qinv phi
            if (a <= 0.0) continue;                          // zero pilot column
            const double b = std::real(u.dot(sample_cov * u));
            double d = (b - a) / (a * a);
            d = std::max(d, -res.gamma(k));
            if (std::abs(d) > 0.0) {
                const double denom = 1.0 + d * a;
                res.gamma(k) += d;
                qinv -= (d / denom) * (u * u.adjoint());
                nll += n * (std::log1p(d * a) - d * b / denom);
                max_change = std::max(max_change, std::abs(d));
            }
            res.nll_trace.push_back(nll);
        }
        res.sweeps_done = sweep + 1;
        // refresh the maintained inverse to control drift
        Eigen::MatrixXcd q = phi * res.gamma.asDiagonal() * phi.adjoint();
        q += sigma2 * ident;
        qinv = q.llt().solve(ident);
        if (max_change < tol) break;
    }
    return res;
}

/// Union fusion: user k active iff some AP's gamma estimate exceeds the
/// threshold.
inline Activity fuse_union(const std::vector<Eigen::VectorXd>& per_ap_gammas,
                           double threshold) {
    if (per_ap_gammas.empty()) throw std::invalid_argument("fuse_union: need >= 1 AP");
    const Eigen::Index k_count = per_ap_gammas.front().size();
    Activity act(static_cast<std::size_t>(k_count), 0);
    for (const auto& g : per_ap_gammas) {
        if (g.size() != k_count)
            throw std::invalid_argument("fuse_union: inconsistent AP result lengths");
        for (Eigen::Index k = 0; k < k_count; ++k)
            if (g(k) > threshold) act[static_cast<std::size_t>(k)] = 1;
    }
    return act;
}

/// Per-user maximum over APs. Sweeping a threshold over these scores is
/// equivalent to union fusion at every threshold.
inline Eigen::VectorXd max_over_aps(const std::vector<Eigen::VectorXd>& per_ap_gammas) {
    if (per_ap_gammas.empty()) throw std::invalid_argument("max_over_aps: need >= 1 AP");
    Eigen::VectorXd out = per_ap_gammas.front();
    for (std::size_t m = 1; m < per_ap_gammas.size(); ++m)
        out = out.cwiseMax(per_ap_gammas[m]);
    return out;
}

}  // namespace cfad
