// Test-only reference implementations, kept independent of the library's
// computation paths.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cfad/neuralnet.hpp"
#include "cfad/rng.hpp"

namespace oracles {

using cfad::nn::Mat;

/// Naive quadruple-loop convolution over one sample.
/// x: in_ch x (H*W); kernel layout matches Conv2d (out_ch x in_ch*kh*kw).
inline Mat conv_reference(const Mat& x, const Mat& kernel, const Eigen::VectorXd& bias,
                          int in_ch, int H, int W, int kh, int kw, int stride,
                          int pad_top, int pad_left, int pad_bottom, int pad_right) {
    const int out_ch = static_cast<int>(kernel.rows());
    const int Ho = (H + pad_top + pad_bottom - kh) / stride + 1;
    const int Wo = (W + pad_left + pad_right - kw) / stride + 1;
    Mat out = Mat::Zero(out_ch, static_cast<Eigen::Index>(Ho) * Wo);
    for (int o = 0; o < out_ch; ++o) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                double acc = bias(o);
                for (int c = 0; c < in_ch; ++c)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const int iy = oy * stride + ky - pad_top;
                            const int ix = ox * stride + kx - pad_left;
                            if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                            acc += kernel(o, (static_cast<Eigen::Index>(c) * kh + ky) * kw + kx) *
                                   x(c, static_cast<Eigen::Index>(iy) * W + ix);
                        }
                out(o, static_cast<Eigen::Index>(oy) * Wo + ox) = acc;
            }
        }
    }
    return out;
}

/// Central finite-difference gradient of the mini-batch BCE loss with
/// respect to every network parameter, using the fourth-order stencil
/// (-f(2h) + 8f(h) - 8f(-h) + f(-2h)) / (12h) so the truncation error
/// stays far below the comparison tolerance at step 1e-3. The network
/// is copied per evaluation so BN running-stat updates cannot leak
/// between probes.
inline std::vector<double> fd_gradient(const cfad::nn::Network& net, const Mat& input,
                                       int batch, const Mat& targets, double step) {
    std::vector<double> grads;
    cfad::nn::Network probe = net;
    auto params = probe.params();
    const auto loss_at = [&](double* slot, double value) {
        const double orig = *slot;
        *slot = value;
        cfad::nn::Network eval = probe;
        const double loss = cfad::nn::bce_loss(targets, eval.forward(input, batch, true));
        *slot = orig;
        return loss;
    };
    for (auto& p : params) {
        for (Eigen::Index i = 0; i < p.size; ++i) {
            const double orig = p.value[i];
            const double f_p2 = loss_at(&p.value[i], orig + 2.0 * step);
            const double f_p1 = loss_at(&p.value[i], orig + step);
            const double f_m1 = loss_at(&p.value[i], orig - step);
            const double f_m2 = loss_at(&p.value[i], orig - 2.0 * step);
            grads.push_back((-f_p2 + 8.0 * f_p1 - 8.0 * f_m1 + f_m2) / (12.0 * step));
        }
    }
    return grads;
}

/// Flattened analytic gradient in the same parameter order.
inline std::vector<double> analytic_gradient(cfad::nn::Network& net, const Mat& input,
                                             int batch, const Mat& targets) {
    cfad::nn::Network work = net;  // keep caller's BN stats untouched
    work.forward(input, batch, true);
    work.backward(targets);
    std::vector<double> grads;
    for (const auto& p : work.params())
        for (Eigen::Index i = 0; i < p.size; ++i) grads.push_back(p.grad[i]);
    return grads;
}

/// Smallest absolute pre-ReLU activation over the whole network for one
/// mini-batch. Central differences are only valid on a differentiable
/// neighborhood, so gradient checks require this margin to exceed the
/// largest activation shift a parameter step can cause. Every ReLU in
/// the architecture is fed by a BatchNorm, whose cache exposes the
/// pre-activation as gamma * xhat + shift.
inline double relu_margin(cfad::nn::Network net, const Mat& input, int batch) {
    net.forward(input, batch, true);
    double margin = std::numeric_limits<double>::infinity();
    const auto& cnet = net;
    for (const auto* bn : cnet.batch_norms()) {
        const Mat pre = ((bn->xhat.array().colwise() * bn->gamma.array()).colwise() +
                         bn->shift.array())
                            .matrix();
        margin = std::min(margin, pre.cwiseAbs().minCoeff());
    }
    return margin;
}

/// Moves each BatchNorm shift to a point where no pre-ReLU activation of
/// this mini-batch is near zero, so the loss is differentiable on the
/// whole finite-difference stencil. Layers are processed front to back
/// with a fresh forward pass after each adjustment because earlier
/// shifts change later activations. Returns the final margin.
inline double harden_relu_margins(cfad::nn::Network& net, const Mat& input, int batch) {
    auto bns = net.batch_norms();
    for (auto* bn : bns) {
        net.forward(input, batch, true);
        for (Eigen::Index f = 0; f < bn->gamma.size(); ++f) {
            // row of pre-activations as a function of the shift offset o:
            // values + o, so the best o centers the largest gap around 0
            std::vector<double> v;
            v.reserve(static_cast<std::size_t>(bn->xhat.cols()));
            for (Eigen::Index c = 0; c < bn->xhat.cols(); ++c)
                v.push_back(bn->gamma(f) * bn->xhat(f, c) + bn->shift(f));
            const double window = 0.5;  // keep the parameter change small
            v.push_back(-window);
            v.push_back(window);
            std::sort(v.begin(), v.end());
            double best_point = 0.0, best_gap = -1.0;
            for (std::size_t i = 0; i + 1 < v.size(); ++i) {
                const double lo = std::max(v[i], -window);
                const double hi = std::min(v[i + 1], window);
                if (hi - lo > best_gap) {
                    best_gap = hi - lo;
                    best_point = 0.5 * (lo + hi);
                }
            }
            bn->shift(f) -= best_point;  // activation -p becomes 0-distance point
        }
    }
    return relu_margin(net, input, batch);
}

struct GradCheck {
    double max_rel_err;
    std::size_t worst_index;
};

inline GradCheck compare_gradients(const std::vector<double>& analytic,
                                   const std::vector<double>& fd) {
    GradCheck res{0.0, 0};
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::abs(analytic[i]) + std::abs(fd[i]) + 1e-6;
        const double rel = std::abs(analytic[i] - fd[i]) / denom;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_index = i;
        }
    }
    return res;
}

}  // namespace oracles
