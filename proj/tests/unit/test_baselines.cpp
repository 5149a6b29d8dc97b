#include <doctest.h>

#include <vector>

#include "support/oracles.hpp"
#include "tiltshield/baselines.hpp"
#include "tiltshield/dataset.hpp"
#include "tiltshield/harness.hpp"

using namespace tiltshield;

namespace {

Mlp forced_q_net(const std::vector<double>& q_values) {
    Mlp net = mlp_init({4, 8, 3}, 1);
    for (auto& w : net.weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
    net.biases.back() = q_values;
    return net;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("rule policy: the three forced cases") {
    RuleBasedPolicy rule;
    CHECK(rule.propose({0.5, 0.5, 0.1, 0.1}, false).delta == -1);  // coverage trouble -> uptilt
    CHECK(rule.propose({0.5, 0.1, 0.1, 0.5}, false).delta == +1);  // quality trouble -> downtilt
    CHECK(rule.propose({0.5, 0.1, 0.9, 0.1}, false).delta == 0);   // capacity never triggers
}

TEST_CASE("rule policy: coverage outranks quality, cap is ignored") {
    RuleBasedPolicy rule;
    CHECK(rule.propose({0.5, 0.6, 0.0, 0.6}, false).delta == -1);

    Rng rng(101);
    for (int i = 0; i < 300; ++i) {
        CellState s{rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
        CellState flipped = s;
        flipped.cap = rng.uniform01();
        CHECK(rule.propose(s, false).delta == rule.propose(flipped, false).delta);
    }
}

TEST_CASE("rule policy: stateless and deterministic") {
    RuleBasedPolicy rule;
    const CellState a{0.2, 0.4, 0.5, 0.1};
    const CellState b{0.9, 0.0, 0.5, 0.8};
    const int first_a = rule.propose(a, false).delta;
    for (int i = 0; i < 10; ++i) {
        rule.propose(b, true);
        CHECK(rule.propose(a, false).delta == first_a);
    }
    CHECK_THROWS_AS(RuleBasedPolicy(RuleThresholds{0.0, 0.3}), ContractError);
}

TEST_CASE("model policy: greedy argmax with smallest-delta tie-break") {
    ModelBasedPolicy mid(forced_q_net({-0.2, -0.1, -0.3}));
    CHECK(mid.propose({0.5, 0.5, 0.5, 0.5}, false).delta == 0);

    ModelBasedPolicy tie(forced_q_net({-0.4, -0.4, -0.4}));
    CHECK(tie.propose({0.5, 0.5, 0.5, 0.5}, false).delta == -1);
}

TEST_CASE("model policy: matches the forward-pass oracle argmax") {
    const Mlp net = mlp_init({4, 32, 32, 3}, 77);
    ModelBasedPolicy policy{Mlp(net)};
    Rng rng(103);
    for (int i = 0; i < 200; ++i) {
        const CellState s{rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
        const auto q = oracle::naive_forward(net, state_features(s));
        int best = 0;
        for (int a = 1; a < 3; ++a) {
            if (q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
        }
        CHECK(action_index(policy.propose(s, false)) == best);
    }
}

TEST_CASE("offline training: recovers a dataset's known optimal action") {
    // hold (delta 0) always scores 0, moving always scores -1
    Rng rng(107);
    std::vector<Transition> dataset;
    for (int i = 0; i < 600; ++i) {
        Transition t;
        t.state = CellState{rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
        t.action = action_from_index(static_cast<int>(rng.uniform_int(0, 2)));
        t.reward = t.action.delta == 0 ? 0.0 : -1.0;
        t.next_state = t.state;
        dataset.push_back(t);
    }
    auto policy = train_offline_baseline(dataset, 1);
    for (int i = 0; i < 50; ++i) {
        const CellState s{rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
        CHECK(policy.propose(s, false).delta == 0);
    }
}

TEST_CASE("offline training: deterministic for a fixed dataset and seed") {
    Rng rng(109);
    std::vector<Transition> dataset;
    for (int i = 0; i < 200; ++i) {
        Transition t;
        t.state = CellState{rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
        t.action = action_from_index(static_cast<int>(rng.uniform_int(0, 2)));
        t.reward = -rng.uniform01();
        t.next_state = t.state;
        dataset.push_back(t);
    }
    const auto a = train_offline_baseline(dataset, 9);
    const auto b = train_offline_baseline(dataset, 9);
    CHECK(a.q_net().weights == b.q_net().weights);
    CHECK(a.q_net().biases == b.q_net().biases);

    CHECK_THROWS_AS(train_offline_baseline(std::vector<Transition>{}, 1), ContractError);
}

TEST_CASE("offline baseline beats a random policy on the simulator") {
    // lone wide-area macro: tilt strongly drives the coverage risk, so a
    // trained policy has real headroom over random actions
    SimConfig sim;
    sim.n_base_stations = 1;
    sim.sectors_per_station = 3;
    sim.n_ues = 250;
    sim.inter_site_distance_m = 2000.0;
    sim.seed = 21;

    const auto dataset = synthesize_dataset(sim, 5000, 11);
    const auto policy = train_offline_baseline(dataset, 3);

    struct RandomPolicy : Proposer {
        std::string name = "random";
        Rng rng{999};
        const std::string& id() const override { return name; }
        TiltAction propose(const CellState&, bool) override {
            return action_from_index(static_cast<int>(rng.uniform_int(0, 2)));
        }
    } random_policy;

    ModelBasedPolicy trained = policy;
    const double trained_reward = evaluate_policy(sim, trained, 25, 20, 55);
    const double random_reward = evaluate_policy(sim, random_policy, 25, 20, 55);
    CHECK(trained_reward >= random_reward);
}

}  // TEST_SUITE
