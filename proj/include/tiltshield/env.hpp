#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tiltshield/radio_sim.hpp"
#include "tiltshield/rng.hpp"

namespace tiltshield {

// Discrete downtilt change in degrees.
struct TiltAction {
    int delta = 0;  // -1, 0 or +1

    friend bool operator==(const TiltAction&, const TiltAction&) = default;
};

inline constexpr std::array<int, 3> kActionDeltas{-1, 0, 1};
inline constexpr int kNumActions = 3;

inline int action_index(TiltAction a) {
    if (a.delta < -1 || a.delta > 1) throw ContractError("action delta " + std::to_string(a.delta) + " not in {-1,0,1}");
    return a.delta + 1;
}

inline TiltAction action_from_index(int i) {
    if (i < 0 || i >= kNumActions) throw ContractError("action index " + std::to_string(i) + " out of range");
    return TiltAction{kActionDeltas[static_cast<std::size_t>(i)]};
}

// Normalised per-cell observation [tilt, cov, cap, qual], all in [0,1].
struct CellState {
    double tilt_norm = 0.0;
    double cov = 0.0;
    double cap = 0.0;
    double qual = 0.0;

    std::array<double, 4> as_array() const { return {tilt_norm, cov, cap, qual}; }
    CellKpis kpis() const { return {cov, cap, qual}; }
};

inline std::vector<double> state_features(const CellState& s) {
    return {s.tilt_norm, s.cov, s.cap, s.qual};
}

struct Transition {
    int cell_id = 0;
    CellState state;
    TiltAction action;
    double reward = 0.0;
    CellState next_state;
    int episode = 0;  // 1-based
    int step = 0;     // 1-based within the episode
};

struct EpisodeConfig {
    int episode_length = 20;
    int n_episodes = 0;
};

// r = -log(1 + cov^2 + cap^2 + qual^2), natural log; in [-log 4, 0].
inline double reward(const CellKpis& k) {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError(std::string("reward: ") + name + " component " + std::to_string(v) + " outside [0,1]");
        }
    };
    check(k.cov, "cov");
    check(k.cap, "cap");
    check(k.qual, "qual");
    return -std::log1p(k.cov * k.cov + k.cap * k.cap + k.qual * k.qual);
}

// MDP wrapper around the simulator. All cells act jointly each step; KPIs
// are recomputed once for the joint tilt vector. Episode resets draw fresh
// integer tilts uniformly from [min_tilt, max_tilt].
class NetworkEnv {
public:
    NetworkEnv(const SimConfig& cfg, std::uint64_t run_seed)
        : cfg_(cfg), run_seed_(run_seed), layout_(build_layout(cfg)), geom_(precompute_geometry(layout_, cfg)) {
        tilts_.tilts_deg.assign(static_cast<std::size_t>(cfg_.n_cells()), cfg_.min_tilt_deg);
    }

    int n_cells() const { return cfg_.n_cells(); }
    const SimConfig& sim_config() const { return cfg_; }
    const NetworkLayout& layout() const { return layout_; }
    const std::vector<CellState>& states() const { return states_; }
    const std::vector<CellKpis>& kpis() const { return kpis_; }
    const TiltVector& tilts() const { return tilts_; }
    int current_episode() const { return episode_; }
    int current_step() const { return step_; }

    // Deterministic function of the seed material only.
    std::vector<CellState> reset(std::uint64_t seed_material) {
        Rng rng(seed_material);
        const auto lo = static_cast<std::int64_t>(std::ceil(cfg_.min_tilt_deg));
        const auto hi = static_cast<std::int64_t>(std::floor(cfg_.max_tilt_deg));
        for (auto& t : tilts_.tilts_deg) {
            t = static_cast<double>(rng.uniform_int(lo, hi));
        }
        refresh();
        step_ = 0;
        if (episode_ == 0) episode_ = 1;
        return states_;
    }

    // Episode-scoped reset, derived from (run seed, episode index).
    std::vector<CellState> reset_next_episode() {
        ++episode_;
        return reset(splitmix64(run_seed_ ^ splitmix64(0x72657365ull + static_cast<std::uint64_t>(episode_))));
    }

    struct StepResult {
        std::vector<CellState> states;
        std::vector<double> rewards;
        std::vector<Transition> transitions;
    };

    StepResult step(const std::vector<TiltAction>& actions) {
        if (static_cast<int>(actions.size()) != n_cells()) {
            throw ContractError("step: got " + std::to_string(actions.size()) + " actions for " +
                                std::to_string(n_cells()) + " cells");
        }
        if (episode_ == 0) throw ContractError("step before first reset");

        const std::vector<CellState> prev = states_;
        for (std::size_t c = 0; c < actions.size(); ++c) {
            const double t = tilts_.tilts_deg[c] + actions[c].delta;
            tilts_.tilts_deg[c] = std::clamp(t, cfg_.min_tilt_deg, cfg_.max_tilt_deg);
        }
        refresh();
        ++step_;

        StepResult out;
        out.states = states_;
        out.rewards.resize(actions.size());
        out.transitions.reserve(actions.size());
        for (std::size_t c = 0; c < actions.size(); ++c) {
            out.rewards[c] = reward(kpis_[c]);
            out.transitions.push_back(Transition{static_cast<int>(c), prev[c], actions[c], out.rewards[c],
                                                 states_[c], episode_, step_});
        }
        return out;
    }

private:
    void refresh() {
        kpis_ = compute_kpis(geom_, tilts_, cfg_);
        states_.resize(kpis_.size());
        const double span = cfg_.max_tilt_deg - cfg_.min_tilt_deg;
        for (std::size_t c = 0; c < kpis_.size(); ++c) {
            states_[c].tilt_norm = span > 0.0 ? (tilts_.tilts_deg[c] - cfg_.min_tilt_deg) / span : 0.0;
            states_[c].cov = kpis_[c].cov;
            states_[c].cap = kpis_[c].cap;
            states_[c].qual = kpis_[c].qual;
        }
    }

    SimConfig cfg_;
    std::uint64_t run_seed_;
    NetworkLayout layout_;
    LinkGeometry geom_;
    TiltVector tilts_;
    std::vector<CellKpis> kpis_;
    std::vector<CellState> states_;
    int episode_ = 0;  // 1-based once running
    int step_ = 0;
};

}  // namespace tiltshield
