#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cfad/config.hpp"
#include "cfad/errors.hpp"
#include "cfad/rng.hpp"

namespace cfad {

/// Path loss below 1 m leaves the model's far-field validity range;
/// user positions closer than this to any AP are resampled.
inline constexpr double kMinDistanceM = 1.0;

struct Deployment {
    Eigen::Matrix<double, Eigen::Dynamic, 2> ap_positions;    // M x 2, meters
    Eigen::Matrix<double, Eigen::Dynamic, 2> user_positions;  // K x 2, meters
};

struct LargeScale {
    Eigen::MatrixXd beta;          // M x K, linear power gain
    Eigen::MatrixXd shadow_draws;  // M x K, standard normal
};

using Activity = std::vector<std::uint8_t>;  // length K, entries in {0,1}

/// Industrial-scenario path loss in dB: 32.40 + 23 log10(d) + 20 log10(f).
inline double path_loss_db(double d_m, double f_ghz) {
    if (d_m <= 0.0) throw std::domain_error("path_loss_db: distance must be positive");
    if (f_ghz <= 0.0) throw std::domain_error("path_loss_db: frequency must be positive");
    return 32.40 + 23.0 * std::log10(d_m) + 20.0 * std::log10(f_ghz);
}

/// Large-scale linear gain: 10^(sigma_sh * s / 10) / PL.
inline double large_scale_coeff(double pl_db, double s, double sigma_sh) {
    return std::pow(10.0, (sigma_sh * s - pl_db) / 10.0);
}

namespace detail {
inline Eigen::RowVector2d uniform_point(double side, RandomStream& rng) {
    const double x = rng.uniform() * side;
    const double y = rng.uniform() * side;
    return {x, y};
}
}  // namespace detail

/// M AP positions and K user positions, i.i.d. uniform on [0, D]^2.
inline Deployment sample_deployment(const SystemConfig& config, RandomStream& rng) {
    config.validate();
    Deployment dep;
    dep.ap_positions.resize(config.num_aps, 2);
    dep.user_positions.resize(config.num_users, 2);
    for (int m = 0; m < config.num_aps; ++m)
        dep.ap_positions.row(m) = detail::uniform_point(config.area_side_m, rng);
    for (int k = 0; k < config.num_users; ++k)
        dep.user_positions.row(k) = detail::uniform_point(config.area_side_m, rng);
    return dep;
}

/// Resamples user positions that fall within kMinDistanceM of any AP.
/// Mutates dep so positions and fading stay consistent.
inline void enforce_min_distance(Deployment& dep, double side, RandomStream& rng) {
    const int m_count = static_cast<int>(dep.ap_positions.rows());
    for (int k = 0; k < dep.user_positions.rows(); ++k) {
        for (;;) {
            double dmin = std::numeric_limits<double>::infinity();
            for (int m = 0; m < m_count; ++m) {
                const double d =
                    (dep.ap_positions.row(m) - dep.user_positions.row(k)).norm();
                dmin = std::min(dmin, d);
            }
            if (dmin >= kMinDistanceM) break;
            dep.user_positions.row(k) = detail::uniform_point(side, rng);
        }
    }
}

/// beta_mk from the path loss of the AP-user distance and fresh
/// standard-normal shadow draws. Users closer than the minimum distance
/// to an AP get their position resampled first.
inline LargeScale sample_large_scale(Deployment& dep, const SystemConfig& config,
                                     RandomStream& rng) {
    enforce_min_distance(dep, config.area_side_m, rng);
    const int m_count = static_cast<int>(dep.ap_positions.rows());
    const int k_count = static_cast<int>(dep.user_positions.rows());
    LargeScale ls;
    ls.shadow_draws.resize(m_count, k_count);
    ls.beta.resize(m_count, k_count);
    for (int m = 0; m < m_count; ++m)
        for (int k = 0; k < k_count; ++k) ls.shadow_draws(m, k) = rng.normal();
    for (int m = 0; m < m_count; ++m) {
        for (int k = 0; k < k_count; ++k) {
            const double d = (dep.ap_positions.row(m) - dep.user_positions.row(k)).norm();
            const double pl = path_loss_db(d, config.carrier_ghz);
            ls.beta(m, k) =
                large_scale_coeff(pl, ls.shadow_draws(m, k), config.shadow_intensity);
        }
    }
    return ls;
}

/// Length-k i.i.d. Bernoulli(eps) activity vector.
inline Activity sample_activity(int k, double eps, RandomStream& rng) {
    if (eps < 0.0 || eps > 1.0)
        throw std::domain_error("sample_activity: eps must be in [0, 1]");
    Activity a(static_cast<std::size_t>(k));
    for (auto& ak : a) ak = rng.bernoulli(eps) ? 1 : 0;
    return a;
}

}  // namespace cfad
