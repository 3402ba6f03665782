#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "cfad/errors.hpp"

namespace cfad {

/// How channel estimates are turned into the real-valued input tensor.
enum class FeatureMode : std::uint32_t {
    Magnitude = 0,   ///< |ghat|, depth M
    ReimStack = 1,   ///< real parts then imaginary parts, depth 2M
};

inline const char* to_string(FeatureMode m) {
    return m == FeatureMode::Magnitude ? "magnitude" : "reim-stack";
}

/// All scenario and training parameters. Defaults follow the reference
/// simulation setup (1 km^2 area, 20 APs, 200 users, tau = 40).
struct SystemConfig {
    double area_side_m = 1000.0;
    int num_aps = 20;
    int num_users = 200;
    int num_antennas = 1;
    int pilot_len = 40;
    double carrier_ghz = 1.9;
    double shadow_intensity = 5.9;
    double tx_power_mw = 200.0;
    double noise_dbm = -109.0;
    double activity_prob = 0.1;
    int batch_size = 256;
    int num_epochs = 10;
    double learning_rate = 1e-3;
    std::uint64_t rng_seed = 1;
    FeatureMode feature_mode = FeatureMode::Magnitude;

    double noise_mw() const { return std::pow(10.0, noise_dbm / 10.0); }

    /// Dimensionless transmit SNR factor. The simulation works in
    /// normalized units: noise variance 1, rho = tx_power / noise_power.
    double snr_factor() const { return tx_power_mw / noise_mw(); }

    /// Tensor channel depth for the configured feature mode.
    int feature_depth() const {
        return feature_mode == FeatureMode::Magnitude ? num_aps : 2 * num_aps;
    }

    void validate() const {
        if (num_aps < 1 || num_users < 1 || num_antennas < 1 || pilot_len < 1)
            throw ConfigError("M, K, N, tau must all be >= 1");
        if (activity_prob < 0.0 || activity_prob > 1.0)
            throw ConfigError("activity_prob must be in [0, 1]");
        if (area_side_m <= 0.0)
            throw ConfigError("area_side_m must be positive");
        if (carrier_ghz <= 0.0)
            throw ConfigError("carrier_ghz must be positive");
        if (batch_size < 1)
            throw ConfigError("batch_size must be >= 1");
        if (tx_power_mw <= 0.0)
            throw ConfigError("tx_power_mw must be positive");
    }

    /// 64-bit FNV-1a over the canonical textual form.
    std::uint64_t digest() const;

    std::string canonical_text() const;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string SystemConfig::canonical_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "area_side_m=" << area_side_m << '\n'
       << "num_aps=" << num_aps << '\n'
       << "num_users=" << num_users << '\n'
       << "num_antennas=" << num_antennas << '\n'
       << "pilot_len=" << pilot_len << '\n'
       << "carrier_ghz=" << carrier_ghz << '\n'
       << "shadow_intensity=" << shadow_intensity << '\n'
       << "tx_power_mw=" << tx_power_mw << '\n'
       << "noise_dbm=" << noise_dbm << '\n'
       << "activity_prob=" << activity_prob << '\n'
       << "batch_size=" << batch_size << '\n'
       << "num_epochs=" << num_epochs << '\n'
       << "learning_rate=" << learning_rate << '\n'
       << "rng_seed=" << rng_seed << '\n'
       << "feature_mode=" << to_string(feature_mode) << '\n';
    return os.str();
}

inline std::uint64_t SystemConfig::digest() const {
    const std::string t = canonical_text();
    return fnv1a64(t.data(), t.size());
}

namespace detail {
inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}
}  // namespace detail

/// Applies one `key = value` assignment. Throws ConfigError on unknown keys.
inline void apply_config_entry(SystemConfig& cfg, const std::string& key,
                               const std::string& value) {
    try {
        if (key == "area_side_m") cfg.area_side_m = std::stod(value);
        else if (key == "num_aps") cfg.num_aps = std::stoi(value);
        else if (key == "num_users") cfg.num_users = std::stoi(value);
        else if (key == "num_antennas") cfg.num_antennas = std::stoi(value);
        else if (key == "pilot_len") cfg.pilot_len = std::stoi(value);
        else if (key == "carrier_ghz") cfg.carrier_ghz = std::stod(value);
        else if (key == "shadow_intensity") cfg.shadow_intensity = std::stod(value);
        else if (key == "tx_power_mw") cfg.tx_power_mw = std::stod(value);
        else if (key == "noise_dbm") cfg.noise_dbm = std::stod(value);
        else if (key == "activity_prob") cfg.activity_prob = std::stod(value);
        else if (key == "batch_size") cfg.batch_size = std::stoi(value);
        else if (key == "num_epochs") cfg.num_epochs = std::stoi(value);
        else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
        else if (key == "rng_seed") cfg.rng_seed = std::stoull(value);
        else if (key == "feature_mode") {
            if (value == "magnitude") cfg.feature_mode = FeatureMode::Magnitude;
            else if (value == "reim-stack") cfg.feature_mode = FeatureMode::ReimStack;
            else throw ConfigError("feature_mode must be 'magnitude' or 'reim-stack', got '" + value + "'");
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range '" + value + "' for key '" + key + "'");
    }
}

/// Flat `key = value` config file. '#' starts a comment, blank lines ignored.
inline SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    SystemConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " is not 'key = value'");
        apply_config_entry(cfg, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

}  // namespace cfad
