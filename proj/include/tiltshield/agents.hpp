#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "tiltshield/nn.hpp"
#include "tiltshield/proposer.hpp"
#include "tiltshield/rng.hpp"

namespace tiltshield {

// Linear decay from start to end over the first decay_episodes episodes.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    int decay_episodes = 50;

    double at(int episodes_completed) const {
        if (decay_episodes <= 0) return end;
        const double f = std::clamp(static_cast<double>(episodes_completed) / decay_episodes, 0.0, 1.0);
        return start + (end - start) * f;
    }
};

struct DqnConfig {
    std::vector<int> q_dims{4, 32, 32, 3};
    std::size_t replay_capacity = 10000;
    EpsilonSchedule epsilon_schedule;
    double discount = 0.0;
    SgdConfig sgd{0.001, 50};
};

// Epsilon-greedy deep Q agent with a bounded uniform replay buffer. One
// gradient step per observed transition once the buffer holds a batch.
// Targets are r + discount * max_a' Q(s', a'); the default discount of 0
// collapses that to the immediate reward and the bootstrap term is never
// evaluated.
class DqnAgent : public Proposer {
public:
    DqnAgent(const DqnConfig& cfg, std::uint64_t seed, std::string id = "dqn")
        : cfg_(cfg), id_(std::move(id)), q_net_(mlp_init(cfg.q_dims, splitmix64(seed ^ 0x64716eull))),
          rng_(Rng::derive(seed, {0x64716e2d726e67ull})), epsilon_(cfg.epsilon_schedule.at(0)) {
        if (cfg_.q_dims.front() != 4 || cfg_.q_dims.back() != kNumActions) {
            throw ContractError("dqn: q network must map 4 state features to 3 action values");
        }
        if (!(cfg_.discount >= 0.0 && cfg_.discount < 1.0)) throw ContractError("dqn: discount must be in [0,1)");
    }

    const std::string& id() const override { return id_; }
    double epsilon() const { return epsilon_; }
    const Mlp& q_net() const { return q_net_; }
    Mlp& q_net() { return q_net_; }
    std::size_t replay_size() const { return replay_.size(); }
    const std::vector<std::size_t>& last_batch_indices() const { return last_batch_indices_; }

    void begin_episode(int episode) override {
        epsilon_ = cfg_.epsilon_schedule.at(episode - 1);
    }

    TiltAction propose(const CellState& state, bool explore) override {
        if (explore && rng_.bernoulli(epsilon_)) {
            return action_from_index(static_cast<int>(rng_.uniform_int(0, kNumActions - 1)));
        }
        const auto q = forward(q_net_, state_features(state));
        return action_from_index(argmax(q));
    }

    void observe(const Transition& t) override {
        replay_.push_back(t);
        if (replay_.size() > cfg_.replay_capacity) replay_.pop_front();
        if (static_cast<int>(replay_.size()) < cfg_.sgd.batch_size) return;

        last_batch_indices_.clear();
        std::vector<TrainSample> batch;
        batch.reserve(static_cast<std::size_t>(cfg_.sgd.batch_size));
        for (int i = 0; i < cfg_.sgd.batch_size; ++i) {
            const auto idx = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(replay_.size()) - 1));
            last_batch_indices_.push_back(idx);
            const Transition& tr = replay_[idx];
            double target = tr.reward;
            if (cfg_.discount > 0.0) {
                const auto q_next = forward(q_net_, state_features(tr.next_state));
                target += cfg_.discount * *std::max_element(q_next.begin(), q_next.end());
            }
            TrainSample s;
            s.input = state_features(tr.state);
            s.target.assign(kNumActions, 0.0);
            s.mask.assign(kNumActions, 0);
            const int a = action_index(tr.action);
            s.target[static_cast<std::size_t>(a)] = target;
            s.mask[static_cast<std::size_t>(a)] = 1;
            batch.push_back(std::move(s));
        }
        sgd_step(q_net_, batch, cfg_.sgd);
    }

private:
    static int argmax(std::span<const double> v) {
        int best = 0;
        for (int i = 1; i < static_cast<int>(v.size()); ++i) {
            if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
        }
        return best;  // ties keep the smallest delta
    }

    DqnConfig cfg_;
    std::string id_;
    Mlp q_net_;
    Rng rng_;
    double epsilon_;
    std::deque<Transition> replay_;
    std::vector<std::size_t> last_batch_indices_;
};

struct AcConfig {
    std::vector<int> actor_dims{4, 32, 3};
    std::vector<int> critic_dims{4, 32, 1};
    double discount = 0.0;
    double learning_rate = 0.03;
};

inline std::vector<double> softmax(std::span<const double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
}

// One-step advantage actor-critic. The critic regresses toward the
// (discount 0) return; the actor takes an advantage-weighted likelihood
// step, realised as an equivalent regression step on the logits so both
// networks share the same SGD machinery.
class AcAgent : public Proposer {
public:
    AcAgent(const AcConfig& cfg, std::uint64_t seed, std::string id = "ac")
        : cfg_(cfg), id_(std::move(id)), actor_(mlp_init(cfg.actor_dims, splitmix64(seed ^ 0x6163746full))),
          critic_(mlp_init(cfg.critic_dims, splitmix64(seed ^ 0x63726974ull))),
          rng_(Rng::derive(seed, {0x61632d726e67ull})) {
        if (cfg_.actor_dims.front() != 4 || cfg_.actor_dims.back() != kNumActions) {
            throw ContractError("ac: actor must map 4 state features to 3 logits");
        }
        if (cfg_.critic_dims.front() != 4 || cfg_.critic_dims.back() != 1) {
            throw ContractError("ac: critic must map 4 state features to 1 value");
        }
    }

    const std::string& id() const override { return id_; }
    const Mlp& actor_net() const { return actor_; }
    const Mlp& critic_net() const { return critic_; }

    std::vector<double> policy(const CellState& state) const {
        return softmax(forward(actor_, state_features(state)));
    }

    double value(const CellState& state) const {
        return forward(critic_, state_features(state))[0];
    }

    TiltAction propose(const CellState& state, bool explore) override {
        const auto p = policy(state);
        if (explore) {
            return action_from_index(static_cast<int>(rng_.categorical(p)));
        }
        int best = 0;
        for (int i = 1; i < kNumActions; ++i) {
            if (p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(best)]) best = i;
        }
        return action_from_index(best);
    }

    void observe(const Transition& t) override {
        const auto features = state_features(t.state);
        double target = t.reward;
        if (cfg_.discount > 0.0) target += cfg_.discount * forward(critic_, state_features(t.next_state))[0];
        const double v = forward(critic_, features)[0];
        const double advantage = target - v;

        const SgdConfig sgd_cfg{cfg_.learning_rate, 1};
        TrainSample critic_sample{features, {target}, {}};
        sgd_step(critic_, std::span<const TrainSample>(&critic_sample, 1), sgd_cfg);

        // Logit pseudo-targets chosen so the squared-error gradient equals
        // the advantage-weighted log-likelihood gradient.
        const auto logits = forward(actor_, features);
        const auto p = softmax(logits);
        const int a = action_index(t.action);
        TrainSample actor_sample;
        actor_sample.input = features;
        actor_sample.target.resize(static_cast<std::size_t>(kNumActions));
        for (int j = 0; j < kNumActions; ++j) {
            const double indicator = (j == a) ? 1.0 : 0.0;
            actor_sample.target[static_cast<std::size_t>(j)] =
                logits[static_cast<std::size_t>(j)] +
                (kNumActions / 2.0) * advantage * (indicator - p[static_cast<std::size_t>(j)]);
        }
        sgd_step(actor_, std::span<const TrainSample>(&actor_sample, 1), sgd_cfg);
    }

private:
    AcConfig cfg_;
    std::string id_;
    Mlp actor_;
    Mlp critic_;
    Rng rng_;
};

}  // namespace tiltshield
