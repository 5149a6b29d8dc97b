#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tiltshield/nn.hpp"
#include "tiltshield/proposer.hpp"
#include "tiltshield/rng.hpp"

namespace tiltshield {

struct RuleThresholds {
    double cov_high = 0.3;
    double qual_high = 0.3;
};

// Legacy-style deterministic tilt rules. Coverage takes priority: a cell in
// coverage trouble uptilts to widen its footprint, a cell in quality trouble
// downtilts to cut the interference it radiates, otherwise hold. Capacity
// never triggers a tilt change.
class RuleBasedPolicy : public Proposer {
public:
    explicit RuleBasedPolicy(RuleThresholds thresholds = {}, std::string id = "rule")
        : thresholds_(thresholds), id_(std::move(id)) {
        if (!(thresholds_.cov_high > 0.0 && thresholds_.cov_high < 1.0)) {
            throw ContractError("rule policy: cov_high must be in (0,1)");
        }
        if (!(thresholds_.qual_high > 0.0 && thresholds_.qual_high < 1.0)) {
            throw ContractError("rule policy: qual_high must be in (0,1)");
        }
    }

    const std::string& id() const override { return id_; }
    const RuleThresholds& thresholds() const { return thresholds_; }

    TiltAction propose(const CellState& state, bool) override {
        if (state.cov > thresholds_.cov_high) return TiltAction{-1};
        if (state.qual > thresholds_.qual_high) return TiltAction{+1};
        return TiltAction{0};
    }

private:
    RuleThresholds thresholds_;
    std::string id_;
};

// Frozen greedy policy over an offline-trained Q network.
class ModelBasedPolicy : public Proposer {
public:
    explicit ModelBasedPolicy(Mlp q_net, std::string id = "model") : q_net_(std::move(q_net)), id_(std::move(id)) {
        if (q_net_.input_dim() != 4 || q_net_.output_dim() != kNumActions) {
            throw ContractError("model policy: q network must map 4 state features to 3 action values");
        }
    }

    static ModelBasedPolicy load(const std::filesystem::path& path, std::string id = "model") {
        return ModelBasedPolicy(load_mlp(path), std::move(id));
    }

    const std::string& id() const override { return id_; }
    const Mlp& q_net() const { return q_net_; }

    TiltAction propose(const CellState& state, bool) override {
        const auto q = forward(q_net_, state_features(state));
        int best = 0;
        for (int i = 1; i < kNumActions; ++i) {
            if (q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)]) best = i;
        }
        return action_from_index(best);  // ties keep the smallest delta
    }

private:
    Mlp q_net_;
    std::string id_;
};

struct OfflineTrainConfig {
    std::vector<int> q_dims{4, 32, 32, 3};
    int epochs = 20;
    SgdConfig sgd{0.001, 50};
};

// Fits Q(s, a) -> r by masked regression over a fixed transition dataset
// (discount 0, matching the online agents) and freezes the result.
inline ModelBasedPolicy train_offline_baseline(std::span<const Transition> dataset, std::uint64_t seed,
                                               const OfflineTrainConfig& cfg = {}) {
    if (dataset.empty()) throw ContractError("train_offline_baseline: empty dataset");
    Mlp net = mlp_init(cfg.q_dims, splitmix64(seed ^ 0x6f66666cull));
    Rng rng = Rng::derive(seed, {0x6f66666c2d726e67ull});

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<TrainSample> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the portable rng
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.sgd.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.sgd.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const Transition& t = dataset[order[i]];
                TrainSample s;
                s.input = state_features(t.state);
                s.target.assign(kNumActions, 0.0);
                s.mask.assign(kNumActions, 0);
                const int a = action_index(t.action);
                s.target[static_cast<std::size_t>(a)] = t.reward;
                s.mask[static_cast<std::size_t>(a)] = 1;
                batch.push_back(std::move(s));
            }
            sgd_step(net, batch, cfg.sgd);
        }
    }
    return ModelBasedPolicy(std::move(net));
}

}  // namespace tiltshield
