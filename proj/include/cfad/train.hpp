#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "cfad/neuralnet.hpp"
#include "cfad/rng.hpp"

namespace cfad::nn {

/// In-memory dataset. Features stay in the single-precision storage
/// form and are up-converted per batch.
struct TrainData {
    int depth = 0, height = 0, width = 0, num_users = 0;
    std::size_t count = 0;
    std::vector<float> features;       // count * depth*height*width, tensor layout
    std::vector<std::uint8_t> labels;  // count * num_users

    /// Constant multiplier applied when features enter the network.
    /// Channel-estimate magnitudes carry the 1/sqrt(rho) factor and can
    /// be ~1e-4 or smaller, which would leave the first BatchNorm's
    /// variance below its eps stabilizer; scaling by sqrt(rho) (set from
    /// the dataset config at load time) restores O(1) conditioning
    /// without changing the information content.
    double feature_scale = 1.0;

    std::size_t sample_floats() const {
        return static_cast<std::size_t>(depth) * height * width;
    }
};

struct TrainConfig {
    int batch_size = 256;
    int epochs = 10;
    double learning_rate = 1e-3;
};

struct EpochStats {
    int epoch;
    double train_loss;
    double val_loss;  // NaN when no validation set
};

/// Copies samples [indices] into the network input layout
/// (depth) x (batch * H * W). The stored tensor is antenna-major
/// (n, k, d); the network wants channel-major with spatial (n, k).
inline Mat make_batch(const TrainData& data, const std::vector<std::size_t>& indices,
                      std::size_t begin, std::size_t end) {
    const int hw = data.height * data.width;
    const auto batch = static_cast<Eigen::Index>(end - begin);
    Mat x(data.depth, batch * hw);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const float* src = data.features.data() + indices[begin + static_cast<std::size_t>(b)] * data.sample_floats();
        for (int s = 0; s < hw; ++s)
            for (int d = 0; d < data.depth; ++d)
                x(d, b * hw + s) = data.feature_scale *
                                   static_cast<double>(src[static_cast<std::size_t>(s) * data.depth + d]);
    }
    return x;
}

inline Mat make_targets(const TrainData& data, const std::vector<std::size_t>& indices,
                        std::size_t begin, std::size_t end) {
    const auto batch = static_cast<Eigen::Index>(end - begin);
    Mat t(data.num_users, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const std::uint8_t* src =
            data.labels.data() + indices[begin + static_cast<std::size_t>(b)] * static_cast<std::size_t>(data.num_users);
        for (int k = 0; k < data.num_users; ++k) t(k, b) = static_cast<double>(src[k]);
    }
    return t;
}

/// Batched inference in infer phase. Returns (num_users x count) scores.
inline Mat predict_all(Network& net, const TrainData& data, int batch_size = 256) {
    Mat out(data.num_users, static_cast<Eigen::Index>(data.count));
    std::vector<std::size_t> idx(data.count);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t begin = 0; begin < data.count; begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(data.count, begin + static_cast<std::size_t>(batch_size));
        const Mat x = make_batch(data, idx, begin, end);
        const Mat p = net.forward(x, static_cast<int>(end - begin), /*train=*/false);
        out.middleCols(static_cast<Eigen::Index>(begin), p.cols()) = p;
    }
    return out;
}

inline double dataset_loss(Network& net, const TrainData& data, int batch_size = 256) {
    std::vector<std::size_t> idx(data.count);
    std::iota(idx.begin(), idx.end(), 0);
    double total = 0.0;
    for (std::size_t begin = 0; begin < data.count; begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(data.count, begin + static_cast<std::size_t>(batch_size));
        const Mat x = make_batch(data, idx, begin, end);
        const Mat t = make_targets(data, idx, begin, end);
        const Mat p = net.forward(x, static_cast<int>(end - begin), /*train=*/false);
        total += bce_loss(t, p) * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(data.count);
}

/// Shuffled mini-batch training with Adam. Deterministic given the
/// stream. Returns the per-epoch loss trace.
inline std::vector<EpochStats> train(Network& net, const TrainData& data,
                                     const TrainData* val, const TrainConfig& cfg,
                                     RandomStream& rng,
                                     bool verbose = false) {
    if (data.count == 0) throw std::invalid_argument("train: empty dataset");
    AdamState adam;
    adam.lr = cfg.learning_rate;
    auto params = net.params();
    adam.init(params);

    std::vector<std::size_t> order(data.count);
    std::iota(order.begin(), order.end(), 0);
    std::vector<EpochStats> trace;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with our own stream
        for (std::size_t i = data.count - 1; i > 0; --i) {
            const std::size_t j = rng.below(i + 1);
            std::swap(order[i], order[j]);
        }
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t begin = 0; begin < data.count;
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(data.count, begin + static_cast<std::size_t>(cfg.batch_size));
            if (end - begin < 2) continue;  // BN needs at least two samples
            const Mat x = make_batch(data, order, begin, end);
            const Mat t = make_targets(data, order, begin, end);
            const Mat p = net.forward(x, static_cast<int>(end - begin), /*train=*/true);
            loss_sum += bce_loss(t, p) * static_cast<double>(end - begin);
            seen += end - begin;
            net.backward(t);
            adam.update(params);
        }
        EpochStats st;
        st.epoch = epoch + 1;
        st.train_loss = seen ? loss_sum / static_cast<double>(seen)
                             : std::numeric_limits<double>::quiet_NaN();
        st.val_loss = val ? dataset_loss(net, *val, cfg.batch_size)
                          : std::numeric_limits<double>::quiet_NaN();
        trace.push_back(st);
        if (verbose)
            std::fprintf(stderr, "epoch %d/%d  train_loss=%.6f  val_loss=%.6f\n", st.epoch,
                         cfg.epochs, st.train_loss, st.val_loss);
    }
    return trace;
}

}  // namespace cfad::nn
