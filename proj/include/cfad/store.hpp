#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cfad/airlink.hpp"
#include "cfad/config.hpp"
#include "cfad/errors.hpp"
#include "cfad/neuralnet.hpp"
#include "cfad/preprocess.hpp"
#include "cfad/scenario.hpp"

namespace cfad {

namespace io {

// All on-disk integers and floats are little-endian. The supported
// targets are little-endian; fail the build elsewhere.
static_assert(std::endian::native == std::endian::little,
              "on-disk format assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError(std::string("truncated file while reading ") + what);
    return v;
}

}  // namespace io

inline constexpr char kDatasetMagic[4] = {'C', 'F', 'A', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

struct DatasetHeader {
    std::uint32_t version = kDatasetVersion;
    std::uint32_t num_aps = 0, num_antennas = 0, num_users = 0, pilot_len = 0;
    FeatureMode feature_mode = FeatureMode::Magnitude;
    std::uint64_t sample_count = 0;
    std::uint64_t config_digest = 0;
    SystemConfig config;
    PilotMatrix pilots;  // tau x K, stored once

    int feature_depth() const {
        return feature_mode == FeatureMode::Magnitude ? static_cast<int>(num_aps)
                                                      : 2 * static_cast<int>(num_aps);
    }
    std::size_t tensor_floats() const {
        return static_cast<std::size_t>(num_antennas) * num_users * feature_depth();
    }
    std::size_t activity_bytes() const { return (num_users + 7) / 8; }
    std::size_t record_bytes() const {
        return 4 * tensor_floats() + activity_bytes();
    }
};

namespace detail {

inline void write_config(std::ostream& os, const SystemConfig& c) {
    io::write_pod(os, c.area_side_m);
    io::write_pod(os, static_cast<std::uint32_t>(c.num_aps));
    io::write_pod(os, static_cast<std::uint32_t>(c.num_users));
    io::write_pod(os, static_cast<std::uint32_t>(c.num_antennas));
    io::write_pod(os, static_cast<std::uint32_t>(c.pilot_len));
    io::write_pod(os, c.carrier_ghz);
    io::write_pod(os, c.shadow_intensity);
    io::write_pod(os, c.tx_power_mw);
    io::write_pod(os, c.noise_dbm);
    io::write_pod(os, c.activity_prob);
    io::write_pod(os, static_cast<std::uint32_t>(c.batch_size));
    io::write_pod(os, static_cast<std::uint32_t>(c.num_epochs));
    io::write_pod(os, c.learning_rate);
    io::write_pod(os, c.rng_seed);
    io::write_pod(os, static_cast<std::uint32_t>(c.feature_mode));
}

inline SystemConfig read_config(std::istream& is) {
    SystemConfig c;
    c.area_side_m = io::read_pod<double>(is, "config");
    c.num_aps = static_cast<int>(io::read_pod<std::uint32_t>(is, "config"));
    c.num_users = static_cast<int>(io::read_pod<std::uint32_t>(is, "config"));
    c.num_antennas = static_cast<int>(io::read_pod<std::uint32_t>(is, "config"));
    c.pilot_len = static_cast<int>(io::read_pod<std::uint32_t>(is, "config"));
    c.carrier_ghz = io::read_pod<double>(is, "config");
    c.shadow_intensity = io::read_pod<double>(is, "config");
    c.tx_power_mw = io::read_pod<double>(is, "config");
    c.noise_dbm = io::read_pod<double>(is, "config");
    c.activity_prob = io::read_pod<double>(is, "config");
    c.batch_size = static_cast<int>(io::read_pod<std::uint32_t>(is, "config"));
    c.num_epochs = static_cast<int>(io::read_pod<std::uint32_t>(is, "config"));
    c.learning_rate = io::read_pod<double>(is, "config");
    c.rng_seed = io::read_pod<std::uint64_t>(is, "config");
    c.feature_mode = static_cast<FeatureMode>(io::read_pod<std::uint32_t>(is, "config"));
    return c;
}

}  // namespace detail

/// One synthesized sample: input tensor in storage precision, the
/// activity vector, and (optionally) the raw per-AP frames.
struct SampleDraw {
    Activity activity;
    std::vector<float> tensor;            // layout (n, k, d), d fastest
    std::optional<ReceivedFrames> frames;
};

// RNG stream ids: 0 = AP layout, 1 = pilots, 2+i = sample i.
inline constexpr std::uint64_t kStreamAps = 0;
inline constexpr std::uint64_t kStreamPilots = 1;
inline constexpr std::uint64_t kStreamSampleBase = 2;

inline Deployment dataset_ap_layout(const SystemConfig& cfg) {
    RandomStream rng = RandomStream::substream(cfg.rng_seed, kStreamAps);
    Deployment dep;
    dep.ap_positions.resize(cfg.num_aps, 2);
    for (int m = 0; m < cfg.num_aps; ++m) {
        const double x = rng.uniform() * cfg.area_side_m;
        const double y = rng.uniform() * cfg.area_side_m;
        dep.ap_positions.row(m) << x, y;
    }
    dep.user_positions.resize(0, 2);
    return dep;
}

inline PilotMatrix dataset_pilots(const SystemConfig& cfg) {
    RandomStream rng = RandomStream::substream(cfg.rng_seed, kStreamPilots);
    return gen_pilots(cfg.pilot_len, cfg.num_users, rng);
}

/// Deterministically regenerates sample `index` of a dataset: fresh
/// user positions, shadowing, activity, small-scale fading, and noise
/// from the per-sample counter stream; AP layout and pilots are fixed.
inline SampleDraw draw_sample(const SystemConfig& cfg, const Deployment& ap_layout,
                              const PilotMatrix& phi, const PilotMatrix& phi_norm,
                              std::uint64_t index, bool want_frames) {
    RandomStream rng = RandomStream::substream(cfg.rng_seed, kStreamSampleBase + index);

    Deployment dep;
    dep.ap_positions = ap_layout.ap_positions;
    dep.user_positions.resize(cfg.num_users, 2);
    for (int k = 0; k < cfg.num_users; ++k) {
        const double x = rng.uniform() * cfg.area_side_m;
        const double y = rng.uniform() * cfg.area_side_m;
        dep.user_positions.row(k) << x, y;
    }
    const LargeScale ls = sample_large_scale(dep, cfg, rng);
    const Activity act = sample_activity(cfg.num_users, cfg.activity_prob, rng);
    const ChannelRealization chan = sample_channels(ls, cfg, rng);
    const double rho = cfg.snr_factor();
    ReceivedFrames frames = synthesize_frame(phi, act, chan, rho, rng);
    const ChannelEstimates est = estimate_channels(phi_norm, frames, rho);
    const InputTensor c = assemble_tensor(est, cfg.feature_mode);

    SampleDraw draw;
    draw.activity = act;
    draw.tensor.resize(c.data.size());
    for (std::size_t i = 0; i < c.data.size(); ++i)
        draw.tensor[i] = static_cast<float>(c.data[i]);
    if (want_frames) draw.frames = std::move(frames);
    return draw;
}

inline void pack_activity(const Activity& act, std::vector<std::uint8_t>& out) {
    out.assign((act.size() + 7) / 8, 0);
    for (std::size_t k = 0; k < act.size(); ++k)
        if (act[k]) out[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
}

inline Activity unpack_activity(const std::vector<std::uint8_t>& bytes, std::size_t k_count) {
    Activity act(k_count, 0);
    for (std::size_t k = 0; k < k_count; ++k)
        act[k] = (bytes[k / 8] >> (k % 8)) & 1u;
    return act;
}

/// Writes a complete dataset file. Byte-deterministic given the config
/// (the seed lives in the config).
inline void generate_dataset(const SystemConfig& cfg, std::uint64_t count,
                             const std::string& path) {
    cfg.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");

    const Deployment aps = dataset_ap_layout(cfg);
    const PilotMatrix phi = dataset_pilots(cfg);
    const PilotMatrix phi_norm = normalize_pilots(phi);

    os.write(kDatasetMagic, 4);
    io::write_pod(os, kDatasetVersion);
    io::write_pod(os, static_cast<std::uint32_t>(cfg.num_aps));
    io::write_pod(os, static_cast<std::uint32_t>(cfg.num_antennas));
    io::write_pod(os, static_cast<std::uint32_t>(cfg.num_users));
    io::write_pod(os, static_cast<std::uint32_t>(cfg.pilot_len));
    io::write_pod(os, static_cast<std::uint32_t>(cfg.feature_mode));
    io::write_pod(os, count);
    io::write_pod(os, cfg.digest());
    detail::write_config(os, cfg);
    for (Eigen::Index k = 0; k < phi.cols(); ++k) {
        for (Eigen::Index t = 0; t < phi.rows(); ++t) {
            io::write_pod(os, phi(t, k).real());
            io::write_pod(os, phi(t, k).imag());
        }
    }

    std::vector<std::uint8_t> bits;
    for (std::uint64_t i = 0; i < count; ++i) {
        const SampleDraw draw = draw_sample(cfg, aps, phi, phi_norm, i, /*want_frames=*/false);
        os.write(reinterpret_cast<const char*>(draw.tensor.data()),
                 static_cast<std::streamsize>(draw.tensor.size() * sizeof(float)));
        pack_activity(draw.activity, bits);
        os.write(reinterpret_cast<const char*>(bits.data()),
                 static_cast<std::streamsize>(bits.size()));
    }
    if (!os) throw FormatError("I/O failure writing '" + path + "'");
}

/// Streaming reader with random access by sample index.
class DatasetReader {
public:
    explicit DatasetReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open dataset '" + path + "'");
        char magic[4];
        in_.read(magic, 4);
        if (!in_ || std::memcmp(magic, kDatasetMagic, 4) != 0)
            throw FormatError("'" + path + "': bad magic at offset 0");
        header_.version = io::read_pod<std::uint32_t>(in_, "version");
        if (header_.version != kDatasetVersion)
            throw FormatError("'" + path + "': unsupported version " +
                              std::to_string(header_.version));
        header_.num_aps = io::read_pod<std::uint32_t>(in_, "dims");
        header_.num_antennas = io::read_pod<std::uint32_t>(in_, "dims");
        header_.num_users = io::read_pod<std::uint32_t>(in_, "dims");
        header_.pilot_len = io::read_pod<std::uint32_t>(in_, "dims");
        header_.feature_mode =
            static_cast<FeatureMode>(io::read_pod<std::uint32_t>(in_, "feature mode"));
        header_.sample_count = io::read_pod<std::uint64_t>(in_, "sample count");
        header_.config_digest = io::read_pod<std::uint64_t>(in_, "config digest");
        if (!header_.num_aps || !header_.num_antennas || !header_.num_users ||
            !header_.pilot_len)
            throw FormatError("'" + path + "': zero dimension in header");
        header_.config = detail::read_config(in_);
        if (header_.config.digest() != header_.config_digest)
            throw FormatError("'" + path + "': config digest mismatch");

        header_.pilots.resize(header_.pilot_len, header_.num_users);
        for (Eigen::Index k = 0; k < header_.pilots.cols(); ++k) {
            for (Eigen::Index t = 0; t < header_.pilots.rows(); ++t) {
                const double re = io::read_pod<double>(in_, "pilots");
                const double im = io::read_pod<double>(in_, "pilots");
                header_.pilots(t, k) = {re, im};
            }
        }
        payload_offset_ = in_.tellg();

        const auto file_size = std::filesystem::file_size(path);
        const auto expected = static_cast<std::uintmax_t>(payload_offset_) +
                              header_.sample_count * header_.record_bytes();
        if (file_size != expected)
            throw FormatError("'" + path + "': file length " + std::to_string(file_size) +
                              " does not match header (expected " + std::to_string(expected) +
                              ", payload offset " + std::to_string(payload_offset_) + ")");
    }

    const DatasetHeader& header() const { return header_; }
    std::uint64_t size() const { return header_.sample_count; }

    struct Sample {
        std::vector<float> tensor;
        Activity activity;
    };

    Sample get(std::uint64_t index) {
        if (index >= header_.sample_count)
            throw FormatError("sample index out of range");
        in_.clear();
        in_.seekg(payload_offset_ + static_cast<std::streamoff>(index * header_.record_bytes()));
        Sample s;
        s.tensor.resize(header_.tensor_floats());
        in_.read(reinterpret_cast<char*>(s.tensor.data()),
                 static_cast<std::streamsize>(s.tensor.size() * sizeof(float)));
        std::vector<std::uint8_t> bits(header_.activity_bytes());
        in_.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
        if (!in_) throw FormatError("'" + path_ + "': truncated record " + std::to_string(index));
        s.activity = unpack_activity(bits, header_.num_users);
        return s;
    }

private:
    std::string path_;
    std::ifstream in_;
    DatasetHeader header_;
    std::streamoff payload_offset_ = 0;
};

// ---------------------------------------------------------------------------
// Model checkpoints

inline constexpr char kCheckpointMagic[4] = {'C', 'F', 'N', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace cfad

namespace cfad::nn {

/// Checkpoint layout: magic, version, architecture descriptor, then all
/// parameters and BN running statistics as little-endian doubles.
struct NetworkSerializer {
    static void save(const Network& net, std::ostream& os) {
        const NetworkShape& s = net.shape_;
        os.write(kCheckpointMagic, 4);
        io::write_pod(os, kCheckpointVersion);
        io::write_pod(os, static_cast<std::uint32_t>(s.in_ch));
        io::write_pod(os, static_cast<std::uint32_t>(s.height));
        io::write_pod(os, static_cast<std::uint32_t>(s.width));
        io::write_pod(os, static_cast<std::uint32_t>(s.num_out));
        io::write_pod(os, static_cast<std::uint32_t>(s.kh));
        io::write_pod(os, static_cast<std::uint32_t>(s.kw));
        io::write_pod(os, static_cast<std::uint32_t>(s.conv_channels.size()));
        for (int c : s.conv_channels) io::write_pod(os, static_cast<std::uint32_t>(c));
        io::write_pod(os, static_cast<std::uint32_t>(s.hidden_units.size()));
        for (int u : s.hidden_units) io::write_pod(os, static_cast<std::uint32_t>(u));

        for (std::size_t i = 0; i < net.convs_.size(); ++i) {
            write_mat(os, net.convs_[i].kernel);
            write_vec(os, net.convs_[i].bias);
            write_bn(os, net.conv_bns_[i]);
        }
        for (std::size_t i = 0; i < net.linears_.size(); ++i) {
            write_mat(os, net.linears_[i].weight);
            write_vec(os, net.linears_[i].bias);
            if (i < net.lin_bns_.size()) write_bn(os, net.lin_bns_[i]);
        }
    }

    static Network load(std::istream& is) {
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
            throw FormatError("checkpoint: bad magic");
        const auto version = io::read_pod<std::uint32_t>(is, "checkpoint version");
        if (version != kCheckpointVersion)
            throw FormatError("checkpoint: unsupported version " + std::to_string(version));
        NetworkShape s;
        s.in_ch = static_cast<int>(io::read_pod<std::uint32_t>(is, "shape"));
        s.height = static_cast<int>(io::read_pod<std::uint32_t>(is, "shape"));
        s.width = static_cast<int>(io::read_pod<std::uint32_t>(is, "shape"));
        s.num_out = static_cast<int>(io::read_pod<std::uint32_t>(is, "shape"));
        s.kh = static_cast<int>(io::read_pod<std::uint32_t>(is, "shape"));
        s.kw = static_cast<int>(io::read_pod<std::uint32_t>(is, "shape"));
        const auto n_conv = io::read_pod<std::uint32_t>(is, "shape");
        s.conv_channels.clear();
        for (std::uint32_t i = 0; i < n_conv; ++i)
            s.conv_channels.push_back(static_cast<int>(io::read_pod<std::uint32_t>(is, "shape")));
        const auto n_hidden = io::read_pod<std::uint32_t>(is, "shape");
        s.hidden_units.clear();
        for (std::uint32_t i = 0; i < n_hidden; ++i)
            s.hidden_units.push_back(static_cast<int>(io::read_pod<std::uint32_t>(is, "shape")));

        Network net(s);
        for (std::size_t i = 0; i < net.convs_.size(); ++i) {
            read_mat(is, net.convs_[i].kernel);
            read_vec(is, net.convs_[i].bias);
            read_bn(is, net.conv_bns_[i]);
        }
        for (std::size_t i = 0; i < net.linears_.size(); ++i) {
            read_mat(is, net.linears_[i].weight);
            read_vec(is, net.linears_[i].bias);
            if (i < net.lin_bns_.size()) read_bn(is, net.lin_bns_[i]);
        }
        if (!is) throw FormatError("checkpoint: truncated parameter block");
        return net;
    }

private:
    static void write_mat(std::ostream& os, const Mat& m) {
        os.write(reinterpret_cast<const char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
    static void write_vec(std::ostream& os, const Vec& v) {
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(sizeof(double) * v.size()));
    }
    static void write_bn(std::ostream& os, const BatchNorm& bn) {
        write_vec(os, bn.gamma);
        write_vec(os, bn.shift);
        write_vec(os, bn.running_mean);
        write_vec(os, bn.running_var);
    }
    static void read_mat(std::istream& is, Mat& m) {
        is.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!is) throw FormatError("checkpoint: truncated matrix");
    }
    static void read_vec(std::istream& is, Vec& v) {
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(sizeof(double) * v.size()));
        if (!is) throw FormatError("checkpoint: truncated vector");
    }
    static void read_bn(std::istream& is, BatchNorm& bn) {
        read_vec(is, bn.gamma);
        read_vec(is, bn.shift);
        read_vec(is, bn.running_mean);
        read_vec(is, bn.running_var);
    }
};

}  // namespace cfad::nn

namespace cfad {

inline void save_checkpoint(const nn::Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    nn::NetworkSerializer::save(net, os);
    if (!os) throw FormatError("I/O failure writing '" + path + "'");
}

inline nn::Network load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint '" + path + "'");
    return nn::NetworkSerializer::load(is);
}

/// Dimension compatibility between two dataset files (train vs val).
inline void check_shape_match(const DatasetHeader& a, const DatasetHeader& b) {
    if (a.num_aps != b.num_aps || a.num_antennas != b.num_antennas ||
        a.num_users != b.num_users || a.pilot_len != b.pilot_len ||
        a.feature_mode != b.feature_mode)
        throw FormatError("datasets have incompatible dimensions");
}

/// Shape compatibility gate between a checkpoint and a dataset.
inline void check_model_data_compat(const nn::Network& net, const DatasetHeader& h) {
    const auto& s = net.shape();
    if (s.in_ch != h.feature_depth() || s.height != static_cast<int>(h.num_antennas) ||
        s.width != static_cast<int>(h.num_users) ||
        s.num_out != static_cast<int>(h.num_users))
        throw FormatError(
            "checkpoint incompatible with dataset: model expects depth " +
            std::to_string(s.in_ch) + ", N " + std::to_string(s.height) + ", K " +
            std::to_string(s.width) + "; dataset has depth " +
            std::to_string(h.feature_depth()) + ", N " + std::to_string(h.num_antennas) +
            ", K " + std::to_string(h.num_users));
}

}  // namespace cfad
