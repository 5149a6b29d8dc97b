#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "support/oracles.hpp"
#include "tiltshield/env.hpp"

using namespace tiltshield;

namespace {

SimConfig tiny_config() {
    SimConfig cfg;
    cfg.n_base_stations = 1;
    cfg.sectors_per_station = 3;
    cfg.n_ues = 120;
    cfg.seed = 4;
    return cfg;
}

}  // namespace

TEST_SUITE("env") {

TEST_CASE("reward: pinned values") {
    CHECK(reward({0.0, 0.0, 0.0}) == 0.0);
    CHECK(reward({1.0, 1.0, 1.0}) == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
    CHECK(reward({1.0, 1.0, 1.0}) == doctest::Approx(-1.3862943611198906).epsilon(1e-12));
    CHECK(reward({0.5, 0.0, 0.0}) == doctest::Approx(-0.22314355131420976).epsilon(1e-12));
    CHECK_THROWS_AS(reward({1.2, 0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(reward({0.0, -0.1, 0.0}), DomainError);
}

TEST_CASE("reward: bounded in [-log 4, 0], zero only at zero risk") {
    Rng rng(51);
    for (int i = 0; i < 2000; ++i) {
        const CellKpis k{rng.uniform01(), rng.uniform01(), rng.uniform01()};
        const double r = reward(k);
        CHECK(r <= 0.0);
        CHECK(r >= -std::log(4.0) - 1e-12);
        if (k.cov > 0.0 || k.cap > 0.0 || k.qual > 0.0) CHECK(r < 0.0);
    }
}

TEST_CASE("reward: strictly decreasing in each component") {
    Rng rng(53);
    for (int i = 0; i < 500; ++i) {
        CellKpis k{rng.uniform_real(0.0, 0.9), rng.uniform_real(0.0, 0.9), rng.uniform_real(0.0, 0.9)};
        const double base = reward(k);
        CellKpis up_cov = k;
        up_cov.cov += 0.05;
        CellKpis up_cap = k;
        up_cap.cap += 0.05;
        CellKpis up_qual = k;
        up_qual.qual += 0.05;
        CHECK(reward(up_cov) < base);
        CHECK(reward(up_cap) < base);
        CHECK(reward(up_qual) < base);
    }
}

TEST_CASE("reset: deterministic for fixed seed material, states in range") {
    NetworkEnv env(tiny_config(), 1);
    const auto a = env.reset(77);
    const auto b = env.reset(77);
    REQUIRE(a.size() == b.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
        CHECK(a[c].tilt_norm == b[c].tilt_norm);
        CHECK(a[c].cov == b[c].cov);
        CHECK(a[c].tilt_norm >= 0.0);
        CHECK(a[c].tilt_norm <= 1.0);
    }

    NetworkEnv env2(tiny_config(), 1);
    env2.reset_next_episode();
    NetworkEnv env3(tiny_config(), 1);
    env3.reset_next_episode();
    CHECK(env2.tilts().tilts_deg == env3.tilts().tilts_deg);
}

TEST_CASE("reset: per-cell tilt histogram is uniform over the integer range") {
    SimConfig cfg = tiny_config();
    cfg.n_ues = 30;  // keep KPI recomputation cheap across 1e4 resets
    NetworkEnv env(cfg, 2);
    std::vector<std::array<std::int64_t, 16>> counts(static_cast<std::size_t>(cfg.n_cells()));
    for (auto& c : counts) c.fill(0);
    const int n_resets = 10000;
    for (int i = 0; i < n_resets; ++i) {
        env.reset_next_episode();
        for (int c = 0; c < cfg.n_cells(); ++c) {
            const int tilt = static_cast<int>(env.tilts().tilts_deg[static_cast<std::size_t>(c)]);
            REQUIRE(tilt >= 1);
            REQUIRE(tilt <= 16);
            counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(tilt - 1)]++;
        }
    }
    for (const auto& c : counts) CHECK(oracle::chi2_uniform_ok(c));
}

TEST_CASE("step: zero deltas keep the state, clamping holds at the edges") {
    NetworkEnv env(tiny_config(), 3);
    env.reset(123);
    const auto before = env.states();
    auto result = env.step(std::vector<TiltAction>(3, TiltAction{0}));
    for (std::size_t c = 0; c < before.size(); ++c) {
        CHECK(result.states[c].tilt_norm == before[c].tilt_norm);
        CHECK(result.states[c].cov == before[c].cov);
        CHECK(result.states[c].qual == before[c].qual);
    }

    // drive every cell to max tilt and push further
    for (int i = 0; i < 20; ++i) env.step(std::vector<TiltAction>(3, TiltAction{+1}));
    for (double t : env.tilts().tilts_deg) CHECK(t == 16.0);
    env.step(std::vector<TiltAction>(3, TiltAction{+1}));
    for (double t : env.tilts().tilts_deg) CHECK(t == 16.0);

    for (int i = 0; i < 40; ++i) env.step(std::vector<TiltAction>(3, TiltAction{-1}));
    for (double t : env.tilts().tilts_deg) CHECK(t == 1.0);
}

TEST_CASE("step: uptilting an over-tilted single cell does not raise coverage risk") {
    SimConfig cfg = tiny_config();
    cfg.sectors_per_station = 1;
    cfg.n_ues = 400;
    cfg.inter_site_distance_m = 2000.0;  // wide field, see the radio_sim suite
    NetworkEnv env(cfg, 4);
    env.reset(1);
    // force max tilt
    for (int i = 0; i < 20; ++i) env.step({TiltAction{+1}});
    const double cov_at_max = env.kpis()[0].cov;
    const auto result = env.step({TiltAction{-1}});
    CHECK(env.kpis()[0].cov <= cov_at_max + 1e-12);
    CHECK(result.transitions[0].action.delta == -1);
}

TEST_CASE("transitions are recomputable: reward equals reward(next-state KPIs)") {
    NetworkEnv env(tiny_config(), 5);
    env.reset_next_episode();
    Rng rng(59);
    for (int s = 0; s < 10; ++s) {
        std::vector<TiltAction> actions;
        for (int c = 0; c < 3; ++c) actions.push_back(action_from_index(static_cast<int>(rng.uniform_int(0, 2))));
        const auto result = env.step(actions);
        for (const auto& t : result.transitions) {
            CHECK(t.reward == reward(t.next_state.kpis()));
            CHECK(t.episode == env.current_episode());
        }
    }
}

TEST_CASE("tilt normalisation round-trips exactly at integer degrees") {
    const SimConfig cfg = tiny_config();
    NetworkEnv env(cfg, 6);
    env.reset(99);
    const double span = cfg.max_tilt_deg - cfg.min_tilt_deg;
    for (std::size_t c = 0; c < env.states().size(); ++c) {
        const double tilt = env.tilts().tilts_deg[c];
        const double norm = env.states()[c].tilt_norm;
        CHECK(std::round(norm * span + cfg.min_tilt_deg) == tilt);
        CHECK(std::abs(norm * span + cfg.min_tilt_deg - tilt) < 1e-9);
    }
}

TEST_CASE("step contracts: wrong action count, step before reset") {
    NetworkEnv env(tiny_config(), 7);
    CHECK_THROWS_AS(env.step(std::vector<TiltAction>(3, TiltAction{0})), ContractError);
    env.reset_next_episode();
    CHECK_THROWS_AS(env.step(std::vector<TiltAction>(2, TiltAction{0})), ContractError);
}

TEST_CASE("action index mapping covers exactly {-1, 0, +1}") {
    CHECK(action_index(TiltAction{-1}) == 0);
    CHECK(action_index(TiltAction{0}) == 1);
    CHECK(action_index(TiltAction{+1}) == 2);
    for (int i = 0; i < 3; ++i) CHECK(action_index(action_from_index(i)) == i);
    CHECK_THROWS_AS(action_from_index(3), ContractError);
    CHECK_THROWS_AS(action_index(TiltAction{2}), ContractError);
}

}  // TEST_SUITE
