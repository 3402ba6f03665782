#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cfad/covdet.hpp"
#include "cfad/evalkit.hpp"
#include "cfad/store.hpp"
#include "cfad/train.hpp"

namespace cfad {

/// Loads a whole dataset file into memory for training/inference.
inline nn::TrainData load_train_data(DatasetReader& reader) {
    const auto& h = reader.header();
    nn::TrainData data;
    data.depth = h.feature_depth();
    data.height = static_cast<int>(h.num_antennas);
    data.width = static_cast<int>(h.num_users);
    data.num_users = static_cast<int>(h.num_users);
    data.count = reader.size();
    data.feature_scale = std::sqrt(h.config.snr_factor());
    data.features.resize(data.count * data.sample_floats());
    data.labels.resize(data.count * static_cast<std::size_t>(data.num_users));
    for (std::uint64_t i = 0; i < reader.size(); ++i) {
        auto s = reader.get(i);
        std::copy(s.tensor.begin(), s.tensor.end(),
                  data.features.begin() + i * data.sample_floats());
        std::copy(s.activity.begin(), s.activity.end(),
                  data.labels.begin() + i * static_cast<std::size_t>(data.num_users));
    }
    return data;
}

inline nn::TrainData load_train_data(const std::string& path) {
    DatasetReader reader(path);
    return load_train_data(reader);
}

/// Flattens (num_users x count) scores and the matching labels into the
/// pooled per-decision vectors used by the metrics.
struct PooledScores {
    std::vector<double> scores;
    std::vector<std::uint8_t> truth;
};

inline PooledScores pool_scores(const nn::Mat& scores, const nn::TrainData& data) {
    PooledScores out;
    out.scores.reserve(static_cast<std::size_t>(scores.size()));
    out.truth.reserve(static_cast<std::size_t>(scores.size()));
    for (Eigen::Index i = 0; i < scores.cols(); ++i) {
        for (Eigen::Index k = 0; k < scores.rows(); ++k) {
            out.scores.push_back(scores(k, i));
            out.truth.push_back(
                data.labels[static_cast<std::size_t>(i) * data.num_users + static_cast<std::size_t>(k)]);
        }
    }
    return out;
}

/// CNN scores for every sample of a dataset, pooled per decision.
inline PooledScores cnn_scores(nn::Network& net, const nn::TrainData& data) {
    const nn::Mat probs = nn::predict_all(net, data);
    return pool_scores(probs, data);
}

/// Covariance-baseline scores: per-sample per-user max over APs of the
/// coordinate-descent activity-power estimates. Frames are regenerated
/// deterministically from the dataset header's config and the sample's
/// counter stream.
struct BaselineResult {
    PooledScores pooled;
    std::vector<Eigen::VectorXd> per_sample_scores;  // length K each
    std::vector<Activity> truths;
};

inline BaselineResult baseline_scores(const DatasetHeader& header, int sweeps = 15) {
    const SystemConfig& cfg = header.config;
    const Deployment aps = dataset_ap_layout(cfg);
    const PilotMatrix& phi = header.pilots;
    const PilotMatrix phi_norm = normalize_pilots(phi);
    const double sigma2 = 1.0;  // normalized noise variance

    BaselineResult res;
    res.per_sample_scores.reserve(header.sample_count);
    res.truths.reserve(header.sample_count);
    for (std::uint64_t i = 0; i < header.sample_count; ++i) {
        const SampleDraw draw = draw_sample(cfg, aps, phi, phi_norm, i, /*want_frames=*/true);
        std::vector<Eigen::VectorXd> per_ap;
        per_ap.reserve(draw.frames->y.size());
        for (const auto& ym : draw.frames->y)
            per_ap.push_back(coordinate_descent(phi, ym, sigma2, sweeps).gamma);
        res.per_sample_scores.push_back(max_over_aps(per_ap));
        res.truths.push_back(draw.activity);
    }
    for (std::uint64_t i = 0; i < header.sample_count; ++i) {
        for (int k = 0; k < cfg.num_users; ++k) {
            res.pooled.scores.push_back(res.per_sample_scores[i](k));
            res.pooled.truth.push_back(res.truths[i][static_cast<std::size_t>(k)]);
        }
    }
    return res;
}

/// Text metrics report at a fixed threshold. Stable formatting so
/// identical inputs yield byte-identical reports.
inline std::string metrics_report(const ConfusionCounts& c, double threshold) {
    std::ostringstream os;
    os.precision(10);
    os << "threshold " << threshold << '\n'
       << "tp " << c.tp << '\n'
       << "fp " << c.fp << '\n'
       << "tn " << c.tn << '\n'
       << "fn " << c.fn << '\n'
       << "recall " << c.recall() << '\n'
       << "false_alarm " << c.false_alarm() << '\n';
    return os.str();
}

inline void write_loss_csv(const std::string& path, const std::vector<nn::EpochStats>& trace) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    os << "epoch,train_loss,val_loss\n";
    os.precision(12);
    for (const auto& e : trace) {
        os << e.epoch << ',' << e.train_loss << ',';
        if (std::isnan(e.val_loss))
            os << "";
        else
            os << e.val_loss;
        os << '\n';
    }
}

inline std::uint64_t file_digest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "' for digest");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (is) {
        is.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
    }
    return h;
}

}  // namespace cfad
