#include <doctest.h>

#include "cfad/scenario.hpp"

using namespace cfad;

TEST_CASE("path loss closed-form values") {
    CHECK(path_loss_db(10.0, 1.0) == doctest::Approx(55.40).epsilon(1e-12));
    CHECK(path_loss_db(100.0, 1.9) == doctest::Approx(83.975072019).epsilon(1e-9));
    CHECK(path_loss_db(1.0, 1.0) == doctest::Approx(32.40).epsilon(1e-12));
    CHECK_THROWS_AS(path_loss_db(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(path_loss_db(10.0, -1.0), std::domain_error);
}

TEST_CASE("path loss strictly increasing in distance and frequency") {
    double prev = path_loss_db(1.0, 1.9);
    for (double d : {2.0, 5.0, 37.0, 120.0, 999.0}) {
        const double pl = path_loss_db(d, 1.9);
        CHECK(pl > prev);
        prev = pl;
    }
    CHECK(path_loss_db(50.0, 2.4) > path_loss_db(50.0, 1.9));
}

TEST_CASE("large-scale coefficient") {
    CHECK(large_scale_coeff(80.0, 0.0, 5.9) == doctest::Approx(1e-8).epsilon(1e-12));
    CHECK(large_scale_coeff(80.0, 1.0, 5.9) ==
          doctest::Approx(3.8904514499e-8).epsilon(1e-9));
    CHECK(large_scale_coeff(0.0, 0.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("deployment sampling is deterministic and uniform") {
    SystemConfig cfg;
    cfg.num_aps = 4;
    cfg.num_users = 10;

    RandomStream r1(42), r2(42);
    const Deployment d1 = sample_deployment(cfg, r1);
    const Deployment d2 = sample_deployment(cfg, r2);
    CHECK((d1.ap_positions - d2.ap_positions).norm() == 0.0);
    CHECK((d1.user_positions - d2.user_positions).norm() == 0.0);

    // Monte-Carlo oracle: coordinate mean -> D/2 within 3 standard errors
    RandomStream rng(7);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.uniform() * cfg.area_side_m;
    const double se = (cfg.area_side_m / std::sqrt(12.0)) / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum / n - cfg.area_side_m / 2.0) < 3.0 * se);

    SystemConfig bad = cfg;
    bad.area_side_m = 0.0;
    RandomStream r3(1);
    CHECK_THROWS_AS(sample_deployment(bad, r3), ConfigError);
}

TEST_CASE("large-scale fading from geometry") {
    SystemConfig cfg;
    cfg.num_aps = 1;
    cfg.num_users = 3;
    cfg.shadow_intensity = 0.0;

    // all users at 100 m from the single AP
    Deployment dep;
    dep.ap_positions.resize(1, 2);
    dep.ap_positions << 500.0, 500.0;
    dep.user_positions.resize(3, 2);
    dep.user_positions << 600.0, 500.0, 400.0, 500.0, 500.0, 600.0;

    RandomStream rng(3);
    const LargeScale ls = sample_large_scale(dep, cfg, rng);
    const double expected = std::pow(10.0, -8.3975072019);
    for (int k = 0; k < 3; ++k)
        CHECK(ls.beta(0, k) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("shadow draws are standard normal; beta monotone in distance") {
    SystemConfig cfg;
    cfg.num_aps = 10;
    cfg.num_users = 100;  // 1000 draws per deployment
    RandomStream rng(11);
    double sq_sum = 0.0;
    long n = 0;
    for (int rep = 0; rep < 100; ++rep) {
        Deployment dep = sample_deployment(cfg, rng);
        const LargeScale ls = sample_large_scale(dep, cfg, rng);
        sq_sum += ls.shadow_draws.array().square().sum();
        n += ls.shadow_draws.size();
        CHECK((ls.beta.array() > 0.0).all());
    }
    // var of s^2 for standard normal is 2
    const double se = std::sqrt(2.0 / static_cast<double>(n));
    CHECK(std::abs(sq_sum / static_cast<double>(n) - 1.0) < 3.0 * se);

    // fixed shadowing: beta decreasing in distance
    const double pl1 = path_loss_db(50.0, 1.9);
    const double pl2 = path_loss_db(200.0, 1.9);
    CHECK(large_scale_coeff(pl1, 0.3, 5.9) > large_scale_coeff(pl2, 0.3, 5.9));
}

TEST_CASE("min-distance resampling keeps users away from APs") {
    SystemConfig cfg;
    cfg.area_side_m = 3.0;  // collisions likely
    cfg.num_aps = 4;
    cfg.num_users = 50;
    RandomStream rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Deployment dep = sample_deployment(cfg, rng);
        sample_large_scale(dep, cfg, rng);
        for (int k = 0; k < cfg.num_users; ++k)
            for (int m = 0; m < cfg.num_aps; ++m)
                CHECK((dep.ap_positions.row(m) - dep.user_positions.row(k)).norm() >=
                      kMinDistanceM);
    }
}

TEST_CASE("activity sampling") {
    RandomStream rng(9);
    const Activity none = sample_activity(200, 0.0, rng);
    CHECK(std::count(none.begin(), none.end(), 1) == 0);
    const Activity all = sample_activity(200, 1.0, rng);
    CHECK(std::count(all.begin(), all.end(), 1) == 200);
    CHECK_THROWS_AS(sample_activity(10, 1.5, rng), std::domain_error);

    // Monte-Carlo oracle: mean active count -> K*eps within 3 SE
    const int draws = 10000;
    long active = 0;
    for (int i = 0; i < draws; ++i) {
        const Activity a = sample_activity(200, 0.1, rng);
        active += std::count(a.begin(), a.end(), 1);
    }
    const double mean = static_cast<double>(active) / draws;
    const double se = std::sqrt(200.0 * 0.1 * 0.9 / draws);
    CHECK(std::abs(mean - 20.0) < 3.0 * se);
}
