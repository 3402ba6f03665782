#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cfad/errors.hpp"
#include "cfad/rng.hpp"

namespace cfad::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Mutable view of one parameter tensor and its gradient.
struct ParamRef {
    std::string name;
    double* value;
    double* grad;
    Eigen::Index size;
};

/// Output spatial extent: floor((in - kernel + pad) / stride) + 1.
inline int conv_out_extent(int in, int kernel, int pad, int stride) {
    const int padded = in + pad;
    if (padded < kernel)
        throw std::invalid_argument("conv_out_extent: kernel larger than padded input");
    return (padded - kernel) / stride + 1;
}

/// Zero-mean Gaussian draws with variance 2 / (fan_in + fan_out).
inline void glorot_fill(double* data, Eigen::Index n, int fan_in, int fan_out,
                        RandomStream& rng) {
    if (fan_in < 1 || fan_out < 1)
        throw std::domain_error("glorot_fill: fans must be >= 1");
    const double stddev = std::sqrt(2.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < n; ++i) data[i] = stddev * rng.normal();
}

/// 2-D convolution (cross-correlation) via im2col + GEMM. Activations
/// are stored as (channels) x (batch * H * W) with column index
/// b*H*W + y*W + x.
struct Conv2d {
    int in_ch = 0, out_ch = 0, kh = 1, kw = 1, stride = 1;
    int pad_top = 0, pad_left = 0, pad_bottom = 0, pad_right = 0;
    Mat kernel;  // out_ch x (in_ch*kh*kw)
    Vec bias;
    Mat d_kernel;
    Vec d_bias;

    // last-forward geometry and cache
    int H = 0, W = 0, Ho = 0, Wo = 0, batch = 0;
    Mat patches;

    Conv2d() = default;
    Conv2d(int in_ch_, int out_ch_, int kh_, int kw_)
        : in_ch(in_ch_), out_ch(out_ch_), kh(kh_), kw(kw_) {
        kernel = Mat::Zero(out_ch, in_ch * kh * kw);
        bias = Vec::Zero(out_ch);
        d_kernel = Mat::Zero(out_ch, in_ch * kh * kw);
        d_bias = Vec::Zero(out_ch);
    }

    /// 'Same' padding for stride 1: the extra rows/columns of an even
    /// kernel go to the bottom/right only.
    void set_same_padding() {
        pad_top = (kh - 1) / 2;
        pad_bottom = kh - 1 - pad_top;
        pad_left = (kw - 1) / 2;
        pad_right = kw - 1 - pad_left;
    }

    void init_glorot(RandomStream& rng) {
        glorot_fill(kernel.data(), kernel.size(), in_ch * kh * kw, out_ch * kh * kw, rng);
        bias.setZero();
    }

    Mat forward(const Mat& x, int batch_, int h, int w) {
        if (x.rows() != in_ch)
            throw std::invalid_argument("Conv2d: input channel mismatch");
        batch = batch_;
        H = h;
        W = w;
        Ho = conv_out_extent(H, kh, pad_top + pad_bottom, stride);
        Wo = conv_out_extent(W, kw, pad_left + pad_right, stride);
        patches.resize(in_ch * kh * kw, static_cast<Eigen::Index>(batch) * Ho * Wo);
        patches.setZero();
        for (int b = 0; b < batch; ++b) {
            const Eigen::Index in_base = static_cast<Eigen::Index>(b) * H * W;
            const Eigen::Index out_base = static_cast<Eigen::Index>(b) * Ho * Wo;
            for (int oy = 0; oy < Ho; ++oy) {
                for (int ox = 0; ox < Wo; ++ox) {
                    const Eigen::Index col = out_base + static_cast<Eigen::Index>(oy) * Wo + ox;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride + ky - pad_top;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride + kx - pad_left;
                            if (ix < 0 || ix >= W) continue;
                            for (int c = 0; c < in_ch; ++c)
                                patches((static_cast<Eigen::Index>(c) * kh + ky) * kw + kx, col) =
                                    x(c, in_base + static_cast<Eigen::Index>(iy) * W + ix);
                        }
                    }
                }
            }
        }
        Mat out = kernel * patches;
        out.colwise() += bias;
        return out;
    }

    /// dy: out_ch x (batch*Ho*Wo). Returns dx in the input layout.
    Mat backward(const Mat& dy) {
        d_kernel = dy * patches.transpose();
        d_bias = dy.rowwise().sum();
        const Mat dpatches = kernel.transpose() * dy;
        Mat dx = Mat::Zero(in_ch, static_cast<Eigen::Index>(batch) * H * W);
        for (int b = 0; b < batch; ++b) {
            const Eigen::Index in_base = static_cast<Eigen::Index>(b) * H * W;
            const Eigen::Index out_base = static_cast<Eigen::Index>(b) * Ho * Wo;
            for (int oy = 0; oy < Ho; ++oy) {
                for (int ox = 0; ox < Wo; ++ox) {
                    const Eigen::Index col = out_base + static_cast<Eigen::Index>(oy) * Wo + ox;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride + ky - pad_top;
                        if (iy < 0 || iy >= H) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride + kx - pad_left;
                            if (ix < 0 || ix >= W) continue;
                            for (int c = 0; c < in_ch; ++c)
                                dx(c, in_base + static_cast<Eigen::Index>(iy) * W + ix) +=
                                    dpatches((static_cast<Eigen::Index>(c) * kh + ky) * kw + kx, col);
                        }
                    }
                }
            }
        }
        return dx;
    }
};

/// Batch normalization over the columns of a (features x cols) matrix.
/// For conv activations the columns run over batch * spatial positions,
/// so this is per-channel spatial BN.
struct BatchNorm {
    int features = 0;
    Vec gamma, shift, running_mean, running_var;
    Vec d_gamma, d_shift;
    double momentum = 0.1;
    double eps = 1e-5;

    // cache
    Mat xhat;
    Vec inv_std;

    BatchNorm() = default;
    explicit BatchNorm(int features_) : features(features_) {
        gamma = Vec::Ones(features);
        shift = Vec::Zero(features);
        running_mean = Vec::Zero(features);
        running_var = Vec::Ones(features);
        d_gamma = Vec::Zero(features);
        d_shift = Vec::Zero(features);
    }

    Mat forward(const Mat& x, bool train) {
        if (x.rows() != features)
            throw std::invalid_argument("BatchNorm: feature count mismatch");
        const auto cols = x.cols();
        if (train) {
            if (cols < 2)
                throw std::invalid_argument("BatchNorm: train phase needs >= 2 columns");
            const Vec mean = x.rowwise().mean();
            const Mat centered = x.colwise() - mean;
            const Vec var = centered.array().square().rowwise().mean();
            inv_std = (var.array() + eps).rsqrt();
            xhat = centered.array().colwise() * inv_std.array();
            // unbiased variance for the running estimate
            const double corr = static_cast<double>(cols) / (cols - 1);
            running_mean = (1.0 - momentum) * running_mean + momentum * mean;
            running_var = (1.0 - momentum) * running_var + momentum * (corr * var);
            Mat out = xhat.array().colwise() * gamma.array();
            out.colwise() += shift;
            return out;
        }
        const Vec denom = (running_var.array() + eps).rsqrt();
        Mat out = (x.colwise() - running_mean).array().colwise() * (gamma.array() * denom.array());
        out.colwise() += shift;
        return out;
    }

    Mat backward(const Mat& dy) {
        const auto cols = dy.cols();
        d_gamma = (dy.array() * xhat.array()).rowwise().sum();
        d_shift = dy.rowwise().sum();
        // dx = gamma * inv_std / n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat .* xhat))
        const Mat dxhat = dy.array().colwise() * gamma.array();
        const Vec sum_dxhat = dxhat.rowwise().sum();
        const Vec sum_dxhat_xhat = (dxhat.array() * xhat.array()).rowwise().sum();
        Mat dx = static_cast<double>(cols) * dxhat;
        dx.colwise() -= sum_dxhat;
        dx -= (xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
        dx.array().colwise() *= inv_std.array() / static_cast<double>(cols);
        return dx;
    }
};

struct Relu {
    Mat mask;
    Mat forward(const Mat& x) {
        mask = (x.array() > 0.0).cast<double>();
        return x.cwiseMax(0.0);
    }
    Mat backward(const Mat& dy) const { return dy.cwiseProduct(mask); }
};

struct Linear {
    Mat weight;  // out x in
    Vec bias;
    Mat d_weight;
    Vec d_bias;
    Mat x_cache;

    Linear() = default;
    Linear(int out, int in) {
        weight = Mat::Zero(out, in);
        bias = Vec::Zero(out);
        d_weight = Mat::Zero(out, in);
        d_bias = Vec::Zero(out);
    }

    void init_glorot(RandomStream& rng) {
        glorot_fill(weight.data(), weight.size(), static_cast<int>(weight.cols()),
                    static_cast<int>(weight.rows()), rng);
        bias.setZero();
    }

    Mat forward(const Mat& x) {
        if (x.rows() != weight.cols())
            throw std::invalid_argument("Linear: input size mismatch");
        x_cache = x;
        Mat out = weight * x;
        out.colwise() += bias;
        return out;
    }

    Mat backward(const Mat& dy) {
        d_weight = dy * x_cache.transpose();
        d_bias = dy.rowwise().sum();
        return weight.transpose() * dy;
    }
};

/// Numerically stable elementwise logistic function.
inline double sigmoid(double r) {
    if (r >= 0.0) return 1.0 / (1.0 + std::exp(-r));
    const double e = std::exp(r);
    return e / (1.0 + e);
}

inline Mat sigmoid(const Mat& r) {
    return r.unaryExpr([](double v) { return sigmoid(v); });
}

inline constexpr double kProbClamp = 1e-12;

/// Binary cross-entropy, summed over users and averaged over the batch.
/// targets and probs are (K x batch).
inline double bce_loss(const Mat& targets, const Mat& probs) {
    if (targets.rows() != probs.rows() || targets.cols() != probs.cols())
        throw std::invalid_argument("bce_loss: shape mismatch");
    const auto p = probs.array().min(1.0 - kProbClamp).max(kProbClamp);
    const auto t = targets.array();
    const double total = -(t * p.log() + (1.0 - t) * (1.0 - p).log()).sum();
    return total / static_cast<double>(probs.cols());
}

struct NetworkShape {
    int in_ch = 0;       // tensor depth (M or 2M)
    int height = 0;      // N
    int width = 0;       // K
    int num_out = 0;     // K output neurons
    std::vector<int> conv_channels{128, 64, 32};
    std::vector<int> hidden_units{500, 500};
    int kh = 2, kw = 2;  // 1x2 when height == 1

    /// Reference architecture for a given input tensor geometry.
    static NetworkShape standard(int depth, int n, int k) {
        NetworkShape s;
        s.in_ch = depth;
        s.height = n;
        s.width = k;
        s.num_out = k;
        s.kh = n > 1 ? 2 : 1;
        s.kw = 2;
        return s;
    }

    bool operator==(const NetworkShape&) const = default;
};

/// The activity-detection CNN: conv->BN->ReLU blocks, flatten, then
/// linear->BN->ReLU blocks and a sigmoid output layer of width K.
class Network {
public:
    Network() = default;

    explicit Network(const NetworkShape& shape) : shape_(shape) { build(); }

    Network(const NetworkShape& shape, RandomStream& rng) : shape_(shape) {
        build();
        for (auto& c : convs_) c.init_glorot(rng);
        for (auto& l : linears_) l.init_glorot(rng);
    }

    const NetworkShape& shape() const { return shape_; }

    /// input: in_ch x (batch*H*W). Returns probabilities num_out x batch.
    Mat forward(const Mat& input, int batch, bool train) {
        if (input.rows() != shape_.in_ch ||
            input.cols() != static_cast<Eigen::Index>(batch) * shape_.height * shape_.width)
            throw std::invalid_argument("Network: input tensor shape mismatch");
        batch_ = batch;
        Mat a = input;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            a = convs_[i].forward(a, batch, shape_.height, shape_.width);
            a = conv_bns_[i].forward(a, train);
            a = conv_relus_[i].forward(a);
        }
        a = flatten(a, batch);
        for (std::size_t i = 0; i + 1 < linears_.size(); ++i) {
            a = linears_[i].forward(a);
            a = lin_bns_[i].forward(a, train);
            a = lin_relus_[i].forward(a);
        }
        logits_ = linears_.back().forward(a);
        probs_ = sigmoid(logits_);
        return probs_;
    }

    /// Mini-batch BCE gradient for all parameters; requires a preceding
    /// train-phase forward on the same batch.
    void backward(const Mat& targets) {
        if (targets.rows() != probs_.rows() || targets.cols() != probs_.cols())
            throw std::invalid_argument("Network::backward: target shape mismatch");
        // fused sigmoid + BCE: dL/dlogit = (p - t) / batch
        Mat grad = (probs_ - targets) / static_cast<double>(batch_);
        grad = linears_.back().backward(grad);
        for (std::size_t i = linears_.size() - 1; i-- > 0;) {
            grad = lin_relus_[i].backward(grad);
            grad = lin_bns_[i].backward(grad);
            grad = linears_[i].backward(grad);
        }
        grad = unflatten(grad, batch_);
        for (std::size_t i = convs_.size(); i-- > 0;) {
            grad = conv_relus_[i].backward(grad);
            grad = conv_bns_[i].backward(grad);
            grad = convs_[i].backward(grad);
        }
    }

    std::vector<ParamRef> params() {
        std::vector<ParamRef> refs;
        for (std::size_t i = 0; i < convs_.size(); ++i) {
            auto& c = convs_[i];
            const std::string tag = "conv" + std::to_string(i);
            refs.push_back({tag + ".kernel", c.kernel.data(), c.d_kernel.data(), c.kernel.size()});
            refs.push_back({tag + ".bias", c.bias.data(), c.d_bias.data(), c.bias.size()});
            auto& bn = conv_bns_[i];
            refs.push_back({tag + ".bn.gamma", bn.gamma.data(), bn.d_gamma.data(), bn.gamma.size()});
            refs.push_back({tag + ".bn.shift", bn.shift.data(), bn.d_shift.data(), bn.shift.size()});
        }
        for (std::size_t i = 0; i < linears_.size(); ++i) {
            auto& l = linears_[i];
            const std::string tag = "linear" + std::to_string(i);
            refs.push_back({tag + ".weight", l.weight.data(), l.d_weight.data(), l.weight.size()});
            refs.push_back({tag + ".bias", l.bias.data(), l.d_bias.data(), l.bias.size()});
            if (i < lin_bns_.size()) {
                auto& bn = lin_bns_[i];
                refs.push_back({tag + ".bn.gamma", bn.gamma.data(), bn.d_gamma.data(), bn.gamma.size()});
                refs.push_back({tag + ".bn.shift", bn.shift.data(), bn.d_shift.data(), bn.shift.size()});
            }
        }
        return refs;
    }

    std::vector<BatchNorm*> batch_norms() {
        std::vector<BatchNorm*> out;
        for (auto& bn : conv_bns_) out.push_back(&bn);
        for (auto& bn : lin_bns_) out.push_back(&bn);
        return out;
    }
    std::vector<const BatchNorm*> batch_norms() const {
        std::vector<const BatchNorm*> out;
        for (const auto& bn : conv_bns_) out.push_back(&bn);
        for (const auto& bn : lin_bns_) out.push_back(&bn);
        return out;
    }

    int flat_features() const {
        return shape_.conv_channels.back() * shape_.height * shape_.width;
    }

private:
    void build() {
        if (shape_.in_ch < 1 || shape_.height < 1 || shape_.width < 1 || shape_.num_out < 1)
            throw std::invalid_argument("Network: bad shape");
        int ch = shape_.in_ch;
        for (int out : shape_.conv_channels) {
            Conv2d c(ch, out, shape_.kh, shape_.kw);
            c.set_same_padding();
            convs_.push_back(std::move(c));
            conv_bns_.emplace_back(out);
            conv_relus_.emplace_back();
            ch = out;
        }
        int in = flat_features();
        for (int units : shape_.hidden_units) {
            linears_.emplace_back(units, in);
            lin_bns_.emplace_back(units);
            lin_relus_.emplace_back();
            in = units;
        }
        linears_.emplace_back(shape_.num_out, in);
    }

    /// (C, batch*H*W) -> (C*H*W, batch), feature index c*H*W + y*W + x.
    Mat flatten(const Mat& a, int batch) const {
        const int hw = shape_.height * shape_.width;
        const auto ch = a.rows();
        Mat out(ch * hw, batch);
        for (int b = 0; b < batch; ++b)
            for (Eigen::Index c = 0; c < ch; ++c)
                for (int s = 0; s < hw; ++s)
                    out(c * hw + s, b) = a(c, static_cast<Eigen::Index>(b) * hw + s);
        return out;
    }

    Mat unflatten(const Mat& g, int batch) const {
        const int hw = shape_.height * shape_.width;
        const Eigen::Index ch = g.rows() / hw;
        Mat out(ch, static_cast<Eigen::Index>(batch) * hw);
        for (int b = 0; b < batch; ++b)
            for (Eigen::Index c = 0; c < ch; ++c)
                for (int s = 0; s < hw; ++s)
                    out(c, static_cast<Eigen::Index>(b) * hw + s) = g(c * hw + s, b);
        return out;
    }

    NetworkShape shape_;
    std::vector<Conv2d> convs_;
    std::vector<BatchNorm> conv_bns_;
    std::vector<Relu> conv_relus_;
    std::vector<Linear> linears_;
    std::vector<BatchNorm> lin_bns_;
    std::vector<Relu> lin_relus_;
    Mat logits_, probs_;
    int batch_ = 0;

    friend struct NetworkSerializer;
};

/// Standard Adam with bias-corrected moments.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Vec> m, v;

    void init(const std::vector<ParamRef>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.push_back(Vec::Zero(p.size));
            v.push_back(Vec::Zero(p.size));
        }
        step = 0;
    }

    void update(const std::vector<ParamRef>& params) {
        if (m.size() != params.size())
            throw std::invalid_argument("AdamState: not initialized for this network");
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Eigen::Map<Vec> w(params[i].value, params[i].size);
            Eigen::Map<const Vec> g(params[i].grad, params[i].size);
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i].array().matrix() + (1.0 - beta2) * g.array().square().matrix();
            const auto mhat = m[i].array() / bc1;
            const auto vhat = v[i].array() / bc2;
            w.array() -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
};

}  // namespace cfad::nn
