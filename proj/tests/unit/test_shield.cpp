#include <doctest.h>

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "support/oracles.hpp"
#include "tiltshield/shield.hpp"

using namespace tiltshield;

namespace {

// scripted proposer: fixed action, records everything it proposes and observes
struct ScriptedProposer : Proposer {
    std::string name;
    TiltAction fixed{0};
    std::vector<TiltAction> proposed;
    std::vector<Transition> observed;

    ScriptedProposer(std::string id, int delta) : name(std::move(id)), fixed{delta} {}
    const std::string& id() const override { return name; }
    TiltAction propose(const CellState&, bool) override {
        proposed.push_back(fixed);
        return fixed;
    }
    void observe(const Transition& t) override { observed.push_back(t); }
};

// predictor whose output depends only on the action input, via a hand-built
// single-layer net: out = bias + weight * delta
StatePredictor stub_predictor(double at_minus1, double at_zero, double at_plus1) {
    // fit cov' = a + b*delta through the three points (exact when they are collinear;
    // tests use collinear triples)
    const double b = (at_plus1 - at_minus1) / 2.0;
    const double a = at_zero;
    Mlp net;
    net.layer_dims = {4, 3};
    net.weights = {std::vector<double>(12, 0.0)};
    net.biases = {{a, 0.0, 0.0}};
    net.weights[0][3] = b;  // cov' row, action-delta column
    return StatePredictor(std::move(net));
}

SimConfig tiny_sim() {
    SimConfig cfg;
    cfg.n_base_stations = 1;
    cfg.sectors_per_station = 3;
    cfg.n_ues = 90;
    cfg.seed = 13;
    return cfg;
}

}  // namespace

TEST_SUITE("shield") {

TEST_CASE("predictor training: learns a constant map to low holdout RMSE") {
    Rng rng(111);
    std::vector<PredictorExample> dataset;
    for (int i = 0; i < 4000; ++i) {
        const CellKpis k{rng.uniform01(), rng.uniform01(), rng.uniform01()};
        dataset.push_back({k, action_from_index(static_cast<int>(rng.uniform_int(0, 2))), k});
    }
    const auto result = predictor_train(dataset, 5);
    CHECK(result.holdout_rmse < 0.02);
    CHECK(result.n_train + result.n_holdout == dataset.size());
}

TEST_CASE("predictor training: deterministic, rejects empty datasets") {
    Rng rng(113);
    std::vector<PredictorExample> dataset;
    for (int i = 0; i < 300; ++i) {
        const CellKpis k{rng.uniform01(), rng.uniform01(), rng.uniform01()};
        const CellKpis n{rng.uniform01(), rng.uniform01(), rng.uniform01()};
        dataset.push_back({k, action_from_index(static_cast<int>(rng.uniform_int(0, 2))), n});
    }
    PredictorTrainConfig quick;
    quick.epochs = 3;
    const auto a = predictor_train(dataset, 7, quick);
    const auto b = predictor_train(dataset, 7, quick);
    CHECK(a.predictor.net().weights == b.predictor.net().weights);
    CHECK(a.holdout_rmse == b.holdout_rmse);

    CHECK_THROWS_AS(predictor_train({}, 1), ContractError);
}

TEST_CASE("predictor_decide: picks the lowest predicted risk") {
    const auto predictor = stub_predictor(0.1, 0.3, 0.5);
    const CellState state{0.5, 0.3, 0.0, 0.0};
    const std::vector<Proposal> proposals{{"rule", TiltAction{0}}, {"model", TiltAction{+1}}, {"dqn", TiltAction{-1}}};
    const auto decision = predictor_decide(predictor, state, proposals);
    CHECK(decision.executed.delta == -1);
    CHECK(decision.source_id == "dqn");
    CHECK(decision.predictions.size() == 3);  // one per distinct action
}

TEST_CASE("predictor_decide: ties go to the earlier-registered proposer") {
    const auto predictor = stub_predictor(0.1, 0.3, 0.5);
    const CellState state{0.5, 0.3, 0.0, 0.0};
    const std::vector<Proposal> proposals{{"rule", TiltAction{-1}}, {"dqn", TiltAction{-1}}};
    const auto decision = predictor_decide(predictor, state, proposals);
    CHECK(decision.executed.delta == -1);
    CHECK(decision.source_id == "rule");
    CHECK(decision.predictions.size() == 1);  // the duplicate action is scored once

    CHECK_THROWS_AS(predictor_decide(predictor, state, {}), ContractError);
}

TEST_CASE("predictor_decide: equals brute-force re-scoring on random inputs") {
    const Mlp net = mlp_init({4, 64, 64, 3}, 55);
    const StatePredictor predictor{Mlp(net)};
    Rng rng(117);
    for (int trial = 0; trial < 300; ++trial) {
        const CellState state{rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
        std::vector<Proposal> proposals;
        const int n = 1 + static_cast<int>(rng.uniform_int(0, 3));
        for (int i = 0; i < n; ++i) {
            proposals.push_back({"p" + std::to_string(i), action_from_index(static_cast<int>(rng.uniform_int(0, 2)))});
        }
        const auto decision = predictor_decide(predictor, state, proposals);
        const auto expected = oracle::predictor_choice_oracle(predictor, state, proposals);
        CHECK(decision.source_id == proposals[expected].source_id);
        CHECK(decision.executed.delta == proposals[expected].action.delta);
    }
}

TEST_CASE("kshield_decide: degenerate gates") {
    Rng rng(119);
    KShieldState all_baseline(KShieldConfig{1.0, 0.1, 2, {1.0}});
    KShieldState all_agent(KShieldConfig{0.0, 0.1, 2, {1.0}});
    const Proposal agent{"dqn", TiltAction{+1}};
    const std::vector<Proposal> baselines{{"rule", TiltAction{-1}}};
    for (int i = 0; i < 200; ++i) {
        const auto d1 = kshield_decide(all_baseline, agent, baselines, rng);
        CHECK(d1.source_id == "rule");
        CHECK(d1.executed.delta == -1);
        CHECK(*d1.bernoulli_draw == 1);
        const auto d0 = kshield_decide(all_agent, agent, baselines, rng);
        CHECK(d0.source_id == "dqn");
        CHECK(d0.executed.delta == +1);
        CHECK(*d0.bernoulli_draw == 0);
    }
}

TEST_CASE("kshield_decide: source frequencies follow k times b") {
    Rng rng(121);
    KShieldState state(KShieldConfig{0.6, 0.1, 2, {0.7, 0.3}});
    const Proposal agent{"dqn", TiltAction{0}};
    const std::vector<Proposal> baselines{{"rule", TiltAction{-1}}, {"model", TiltAction{+1}}};
    std::array<std::int64_t, 3> counts{};  // rule, model, agent
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const auto d = kshield_decide(state, agent, baselines, rng);
        if (d.source_id == "rule") counts[0]++;
        else if (d.source_id == "model") counts[1]++;
        else counts[2]++;
    }
    const std::array<double, 3> probs{0.6 * 0.7, 0.6 * 0.3, 0.4};
    CHECK(oracle::chi2_statistic(counts, probs) < oracle::chi2_crit_99(2));

    CHECK_THROWS_AS(kshield_decide(state, agent, std::vector<Proposal>{{"rule", TiltAction{-1}}}, rng), ContractError);
}

TEST_CASE("kshield_update: the three pinned cases") {
    // improvement: recent window mean beats the older window
    KShieldState a(KShieldConfig{1.0, 0.1, 2, {1.0}});
    kshield_update(a, -1.0);
    kshield_update(a, -1.0);
    CHECK(a.k() == 1.0);  // before 2w episodes k never moves
    kshield_update(a, -0.5);
    CHECK(a.k() == 1.0);  // episode 3 is not a multiple of w
    kshield_update(a, -0.5);
    CHECK(a.k() == doctest::Approx(0.9));

    // the floor at zero
    KShieldState b(KShieldConfig{0.05, 0.1, 1, {1.0}});
    kshield_update(b, -1.0);
    kshield_update(b, -0.5);
    CHECK(b.k() == 0.0);

    // no improvement: k unchanged
    KShieldState c(KShieldConfig{0.9, 0.1, 2, {1.0}});
    kshield_update(c, -0.5);
    kshield_update(c, -0.5);
    kshield_update(c, -1.0);
    kshield_update(c, -1.0);
    CHECK(c.k() == 0.9);
}

TEST_CASE("kshield_update: k is non-increasing and stays in [0,1]") {
    Rng rng(123);
    KShieldState state(KShieldConfig{0.95, 0.2, 3, {1.0}});
    double prev = state.k();
    for (int e = 0; e < 500; ++e) {
        const double k = kshield_update(state, -rng.uniform01());
        CHECK(k <= prev);
        CHECK(k >= 0.0);
        CHECK(k <= 1.0);
        prev = k;
    }
    CHECK_THROWS_AS(KShieldState(KShieldConfig{0.95, 0.1, 2, {0.5, 0.4}}), ContractError);
    CHECK_THROWS_AS(KShieldState(KShieldConfig{0.95, 1.5, 2, {1.0}}), ContractError);
}

TEST_CASE("shield: a single registered proposer is always executed") {
    auto env = std::make_unique<NetworkEnv>(tiny_sim(), 1);
    Shield shield(std::move(env), 1);
    ScriptedProposer rule("rule", -1);
    shield.register_proposer(rule, false);
    CHECK_FALSE(shield.has_logic());

    shield.begin_episode();
    const auto outcome = shield.run_step(true);
    for (const auto& d : outcome.decisions) {
        CHECK(d.source_id == "rule");
        CHECK(d.executed.delta == -1);
    }
    CHECK(outcome.agent_decisions == 0);
}

TEST_CASE("shield: k=1 feeds the baseline action back to the agent") {
    auto env = std::make_unique<NetworkEnv>(tiny_sim(), 2);
    Shield shield(std::move(env), 2);
    shield.set_kshield_logic(KShieldConfig{1.0, 0.1, 2, {1.0}});
    ScriptedProposer rule("rule", -1);
    ScriptedProposer agent("dqn", +1);
    shield.register_proposer(rule, false);
    shield.register_proposer(agent, true);

    shield.begin_episode();
    const auto outcome = shield.run_step(true);
    for (const auto& d : outcome.decisions) {
        CHECK(d.source_id == "rule");
        CHECK(d.executed.delta == -1);
    }
    REQUIRE(agent.observed.size() == 3);
    for (const auto& t : agent.observed) CHECK(t.action.delta == -1);  // executed, not proposed
    for (const auto& t : outcome.transitions) CHECK(t.action.delta == -1);
}

TEST_CASE("shield: executed tilt vector equals the per-cell decision log") {
    auto env = std::make_unique<NetworkEnv>(tiny_sim(), 3);
    const NetworkEnv* env_view = env.get();
    Shield shield(std::move(env), 3);
    shield.set_kshield_logic(KShieldConfig{0.5, 0.1, 2, {1.0}});
    ScriptedProposer rule("rule", -1);
    ScriptedProposer agent("dqn", +1);
    shield.register_proposer(rule, false);
    shield.register_proposer(agent, true);

    shield.begin_episode();
    std::vector<double> tilts = env_view->tilts().tilts_deg;
    const auto& cfg = env_view->sim_config();
    for (int s = 0; s < 5; ++s) {
        const auto outcome = shield.run_step(true);
        // replay the decisions onto our own tilt copy
        for (std::size_t c = 0; c < tilts.size(); ++c) {
            tilts[c] = std::clamp(tilts[c] + outcome.decisions[c].executed.delta, cfg.min_tilt_deg, cfg.max_tilt_deg);
            CHECK(tilts[c] == env_view->tilts().tilts_deg[c]);
        }
        // every executed action came from one of the two proposals
        for (const auto& d : outcome.decisions) {
            CHECK((d.executed.delta == -1 || d.executed.delta == +1));
            if (d.executed.delta == -1) CHECK(d.source_id == "rule");
            if (d.executed.delta == +1) CHECK(d.source_id == "dqn");
        }
    }
    CHECK(shield.decision_log().size() == 5 * 3);
}

TEST_CASE("shield: observed transitions always carry the logged executed action") {
    auto env = std::make_unique<NetworkEnv>(tiny_sim(), 4);
    Shield shield(std::move(env), 4);
    shield.set_kshield_logic(KShieldConfig{0.5, 0.1, 2, {1.0}});
    ScriptedProposer rule("rule", -1);
    ScriptedProposer agent("dqn", +1);
    shield.register_proposer(rule, false);
    shield.register_proposer(agent, true);

    for (int e = 0; e < 3; ++e) {
        shield.begin_episode();
        for (int s = 0; s < 4; ++s) shield.run_step(true);
        shield.end_episode();
    }
    const auto& log = shield.decision_log();
    REQUIRE(agent.observed.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(agent.observed[i].action.delta == log[i].action_delta);
        CHECK(agent.observed[i].cell_id == log[i].cell);
        CHECK(agent.observed[i].episode == log[i].episode);
    }
}

TEST_CASE("shield: registration contracts") {
    auto env = std::make_unique<NetworkEnv>(tiny_sim(), 5);
    Shield shield(std::move(env), 5);
    ScriptedProposer rule("rule", -1);
    ScriptedProposer rule2("rule", 0);
    ScriptedProposer agent("dqn", +1);
    shield.register_proposer(rule, false);
    CHECK_THROWS_AS(shield.register_proposer(rule2, false), ContractError);
    shield.register_proposer(agent, true);
    ScriptedProposer late_baseline("model", 0);
    CHECK_THROWS_AS(shield.register_proposer(late_baseline, false), ContractError);

    // pass-through with two proposers is rejected at run time
    CHECK_THROWS_AS(shield.begin_episode(), ContractError);
}

TEST_CASE("shield: k-shield needs exactly one agent and matching weights") {
    auto env = std::make_unique<NetworkEnv>(tiny_sim(), 6);
    Shield shield(std::move(env), 6);
    shield.set_kshield_logic(KShieldConfig{0.9, 0.1, 2, {1.0}});
    ScriptedProposer rule("rule", -1);
    ScriptedProposer model("model", 0);
    shield.register_proposer(rule, false);
    shield.register_proposer(model, false);
    ScriptedProposer agent("dqn", +1);
    shield.register_proposer(agent, true);
    // two baselines registered for a single weight
    CHECK_THROWS_AS(shield.begin_episode(), ContractError);
}

TEST_CASE("shield: k decays across episodes and is logged per decision") {
    auto env = std::make_unique<NetworkEnv>(tiny_sim(), 7);
    Shield shield(std::move(env), 7);
    shield.set_kshield_logic(KShieldConfig{0.95, 0.1, 2, {1.0}});
    ScriptedProposer rule("rule", 0);
    ScriptedProposer agent("dqn", 0);
    shield.register_proposer(rule, false);
    shield.register_proposer(agent, true);

    double prev_k = 1.0;
    for (int e = 0; e < 10; ++e) {
        shield.begin_episode();
        for (int s = 0; s < 3; ++s) shield.run_step(true);
        shield.end_episode();
        const double k = *shield.current_k();
        CHECK(k <= prev_k);
        prev_k = k;
    }
    for (const auto& row : shield.decision_log()) {
        REQUIRE(row.k.has_value());
        CHECK(*row.k >= 0.0);
        CHECK(*row.k <= 1.0);
        REQUIRE(row.bernoulli_draw.has_value());
    }
}

}  // TEST_SUITE
