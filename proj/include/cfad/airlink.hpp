#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "cfad/errors.hpp"
#include "cfad/rng.hpp"
#include "cfad/scenario.hpp"

namespace cfad {

using PilotMatrix = Eigen::MatrixXcd;  // tau x K, column k = pilot of user k

struct ChannelRealization {
    std::vector<Eigen::MatrixXcd> g;  // per AP: K x N
};

struct ReceivedFrames {
    std::vector<Eigen::MatrixXcd> y;  // per AP: tau x N

    /// CPU aggregate: vertical stack of the per-AP frames, tau*M x N.
    Eigen::MatrixXcd aggregate() const {
        if (y.empty()) return {};
        const auto tau = y.front().rows();
        const auto n = y.front().cols();
        Eigen::MatrixXcd out(tau * static_cast<Eigen::Index>(y.size()), n);
        for (std::size_t m = 0; m < y.size(); ++m)
            out.middleRows(static_cast<Eigen::Index>(m) * tau, tau) = y[m];
        return out;
    }
};

/// i.i.d. CN(0, 1) pilots, drawn column by column.
inline PilotMatrix gen_pilots(int tau, int k, RandomStream& rng) {
    if (tau < 1 || k < 1) throw std::domain_error("gen_pilots: tau, k must be >= 1");
    PilotMatrix phi(tau, k);
    for (int col = 0; col < k; ++col)
        for (int row = 0; row < tau; ++row) phi(row, col) = rng.cnormal();
    return phi;
}

/// g_mnk = sqrt(beta_mk) h_mnk with fresh i.i.d. CN(0,1) small-scale fading.
inline ChannelRealization sample_channels(const LargeScale& ls, const SystemConfig& config,
                                          RandomStream& rng) {
    if ((ls.beta.array() <= 0.0).any())
        throw std::domain_error("sample_channels: beta must be strictly positive");
    ChannelRealization chan;
    chan.g.resize(static_cast<std::size_t>(ls.beta.rows()));
    for (Eigen::Index m = 0; m < ls.beta.rows(); ++m) {
        Eigen::MatrixXcd gm(ls.beta.cols(), config.num_antennas);
        for (Eigen::Index k = 0; k < ls.beta.cols(); ++k) {
            const double scale = std::sqrt(ls.beta(m, k));
            for (int n = 0; n < config.num_antennas; ++n) gm(k, n) = scale * rng.cnormal();
        }
        chan.g[static_cast<std::size_t>(m)] = gm;
    }
    return chan;
}

/// Y_m = sqrt(rho) Phi A G_m + W_m with W_m i.i.d. CN(0, noise_std^2).
/// noise_std defaults to the normalized unit variance; tests pass 0 for
/// noiseless frames.
inline ReceivedFrames synthesize_frame(const PilotMatrix& phi, const Activity& act,
                                       const ChannelRealization& chan, double rho,
                                       RandomStream& rng, double noise_std = 1.0) {
    const Eigen::Index k_count = phi.cols();
    if (static_cast<Eigen::Index>(act.size()) != k_count)
        throw std::invalid_argument("synthesize_frame: activity length != pilot columns");
    ReceivedFrames frames;
    frames.y.reserve(chan.g.size());
    const double amp = std::sqrt(rho);
    for (const auto& gm : chan.g) {
        if (gm.rows() != k_count)
            throw std::invalid_argument("synthesize_frame: channel rows != pilot columns");
        Eigen::MatrixXcd ag = gm;
        for (Eigen::Index k = 0; k < k_count; ++k)
            if (!act[static_cast<std::size_t>(k)]) ag.row(k).setZero();
        Eigen::MatrixXcd ym = amp * (phi * ag);
        for (Eigen::Index n = 0; n < ym.cols(); ++n)
            for (Eigen::Index t = 0; t < ym.rows(); ++t)
                ym(t, n) += noise_std * rng.cnormal();
        frames.y.push_back(std::move(ym));
    }
    return frames;
}

/// Analytic per-AP covariance Q_m = rho Phi A B_m Phi^H + sigma2 I.
inline Eigen::MatrixXcd analytic_q_m(const PilotMatrix& phi, const Activity& act,
                                     const Eigen::VectorXd& beta_m, double rho,
                                     double sigma2) {
    Eigen::VectorXd diag(phi.cols());
    for (Eigen::Index k = 0; k < phi.cols(); ++k)
        diag(k) = rho * (act[static_cast<std::size_t>(k)] ? beta_m(k) : 0.0);
    Eigen::MatrixXcd q = phi * diag.asDiagonal() * phi.adjoint();
    q += sigma2 * Eigen::MatrixXcd::Identity(phi.rows(), phi.rows());
    return q;
}

/// Block-diagonal aggregate covariance over all APs (tau*M square).
inline Eigen::MatrixXcd analytic_q(const PilotMatrix& phi, const Activity& act,
                                   const Eigen::MatrixXd& beta, double rho, double sigma2) {
    const Eigen::Index tau = phi.rows();
    const Eigen::Index m_count = beta.rows();
    Eigen::MatrixXcd q = Eigen::MatrixXcd::Zero(tau * m_count, tau * m_count);
    for (Eigen::Index m = 0; m < m_count; ++m)
        q.block(m * tau, m * tau, tau, tau) =
            analytic_q_m(phi, act, beta.row(m).transpose(), rho, sigma2);
    return q;
}

}  // namespace cfad
