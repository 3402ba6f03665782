#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cfad/airlink.hpp"
#include "cfad/config.hpp"
#include "cfad/errors.hpp"

namespace cfad {

struct ChannelEstimates {
    std::vector<Eigen::MatrixXcd> ghat;  // per AP: K x N
};

/// Real N x K x depth tensor fed to the CNN. depth = M in magnitude
/// mode, 2M in reim-stack mode (real slabs first, imaginary after).
struct InputTensor {
    int n = 0, k = 0, depth = 0;
    std::vector<double> data;  // index ((a*k)+u)*depth + d, antenna-major

    double& at(int a, int u, int d) {
        return data[(static_cast<std::size_t>(a) * k + u) * depth + d];
    }
    double at(int a, int u, int d) const {
        return data[(static_cast<std::size_t>(a) * k + u) * depth + d];
    }
};

/// Column-wise normalization: pilot k divided by its own squared norm,
/// so that phi_norm_k^H phi_k = 1.
inline PilotMatrix normalize_pilots(const PilotMatrix& phi) {
    PilotMatrix out = phi;
    for (Eigen::Index k = 0; k < phi.cols(); ++k) {
        const double sq = phi.col(k).squaredNorm();
        if (sq == 0.0) throw NumericError("normalize_pilots: zero pilot column");
        out.col(k) /= sq;
    }
    return out;
}

/// Ghat_m = Phi_norm^H Y_m / sqrt(rho) for every AP.
inline ChannelEstimates estimate_channels(const PilotMatrix& phi_norm,
                                          const ReceivedFrames& frames, double rho) {
    if (rho <= 0.0) throw std::domain_error("estimate_channels: rho must be positive");
    ChannelEstimates est;
    est.ghat.reserve(frames.y.size());
    const double inv_amp = 1.0 / std::sqrt(rho);
    for (const auto& ym : frames.y) {
        if (ym.rows() != phi_norm.rows())
            throw std::invalid_argument("estimate_channels: frame rows != pilot length");
        est.ghat.push_back(inv_amp * (phi_norm.adjoint() * ym));
    }
    return est;
}

/// Stacks per-AP estimates into the CNN input tensor.
inline InputTensor assemble_tensor(const ChannelEstimates& est, FeatureMode mode) {
    if (est.ghat.empty())
        throw std::invalid_argument("assemble_tensor: no AP estimates");
    const int m_count = static_cast<int>(est.ghat.size());
    const int k_count = static_cast<int>(est.ghat.front().rows());
    const int n_count = static_cast<int>(est.ghat.front().cols());
    for (const auto& g : est.ghat)
        if (g.rows() != k_count || g.cols() != n_count)
            throw std::invalid_argument("assemble_tensor: inconsistent AP slab shapes");

    InputTensor c;
    c.n = n_count;
    c.k = k_count;
    c.depth = mode == FeatureMode::Magnitude ? m_count : 2 * m_count;
    c.data.assign(static_cast<std::size_t>(c.n) * c.k * c.depth, 0.0);
    for (int m = 0; m < m_count; ++m) {
        const auto& g = est.ghat[static_cast<std::size_t>(m)];
        for (int a = 0; a < n_count; ++a) {
            for (int u = 0; u < k_count; ++u) {
                if (mode == FeatureMode::Magnitude) {
                    c.at(a, u, m) = std::abs(g(u, a));
                } else {
                    c.at(a, u, m) = g(u, a).real();
                    c.at(a, u, m_count + m) = g(u, a).imag();
                }
            }
        }
    }
    return c;
}

}  // namespace cfad
