#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tiltshield/csv.hpp"
#include "tiltshield/env.hpp"
#include "tiltshield/nn.hpp"
#include "tiltshield/proposer.hpp"
#include "tiltshield/rng.hpp"

namespace tiltshield {

struct Proposal {
    std::string source_id;
    TiltAction action;
};

struct PredictedOutcome {
    TiltAction action;
    CellKpis kpis;
    double score = 0.0;  // cov'^2 + cap'^2 + qual'^2, lower is safer
};

struct ShieldDecision {
    TiltAction executed;
    std::string source_id;
    // logic diagnostics; only the fields the active logic produces are set
    std::optional<double> k;
    std::optional<int> bernoulli_draw;
    std::optional<int> baseline_index;
    std::vector<PredictedOutcome> predictions;
};

// --- state predictor logic --------------------------------------------------

// Multi-target regressor mapping (cov, cap, qual, action delta) to the KPI
// triple after the action. Predictions are clamped into [0,1] at use.
class StatePredictor {
public:
    explicit StatePredictor(Mlp net) : net_(std::move(net)) {
        if (net_.input_dim() != 4 || net_.output_dim() != 3) {
            throw ContractError("state predictor network must map (kpis, action) to 3 kpis");
        }
    }

    static StatePredictor load(const std::filesystem::path& path) { return StatePredictor(load_mlp(path)); }
    void save(const std::filesystem::path& path) const { save_mlp(net_, path); }
    const Mlp& net() const { return net_; }

    CellKpis predict(const CellKpis& kpis, TiltAction action) const {
        const std::vector<double> input{kpis.cov, kpis.cap, kpis.qual, static_cast<double>(action.delta)};
        const auto out = forward(net_, input);
        return {std::clamp(out[0], 0.0, 1.0), std::clamp(out[1], 0.0, 1.0), std::clamp(out[2], 0.0, 1.0)};
    }

private:
    Mlp net_;
};

struct PredictorExample {
    CellKpis kpis;
    TiltAction action;
    CellKpis next_kpis;
};

struct PredictorTrainConfig {
    std::vector<int> dims{4, 64, 64, 3};
    int epochs = 30;
    SgdConfig sgd{0.05, 50};
    double holdout_fraction = 0.2;
};

struct PredictorTrainResult {
    StatePredictor predictor;
    double holdout_rmse = 0.0;                   // over all three outputs
    std::array<double, 3> holdout_rmse_per_kpi;  // cov, cap, qual
    std::size_t n_train = 0;
    std::size_t n_holdout = 0;
};

inline PredictorTrainResult predictor_train(std::span<const PredictorExample> dataset, std::uint64_t seed,
                                            const PredictorTrainConfig& cfg = {}) {
    if (dataset.empty()) throw ContractError("predictor_train: empty dataset");

    Rng rng = Rng::derive(seed, {0x707265642d726e67ull});
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(order[i - 1], order[j]);
    }
    std::size_t n_holdout = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(dataset.size())));
    if (n_holdout >= dataset.size()) n_holdout = dataset.size() - 1;
    const std::size_t n_train = dataset.size() - n_holdout;

    auto to_sample = [&](std::size_t idx) {
        const PredictorExample& e = dataset[idx];
        TrainSample s;
        s.input = {e.kpis.cov, e.kpis.cap, e.kpis.qual, static_cast<double>(e.action.delta)};
        s.target = {e.next_kpis.cov, e.next_kpis.cap, e.next_kpis.qual};
        return s;
    };

    Mlp net = mlp_init(cfg.dims, splitmix64(seed ^ 0x70726564ull));
    std::vector<std::size_t> train_order(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<TrainSample> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = train_order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(train_order[i - 1], train_order[j]);
        }
        for (std::size_t start = 0; start < train_order.size(); start += static_cast<std::size_t>(cfg.sgd.batch_size)) {
            const std::size_t stop = std::min(train_order.size(), start + static_cast<std::size_t>(cfg.sgd.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(to_sample(train_order[i]));
            sgd_step(net, batch, cfg.sgd);
        }
    }

    PredictorTrainResult result{StatePredictor(std::move(net)), 0.0, {0.0, 0.0, 0.0}, n_train, n_holdout};
    if (n_holdout > 0) {
        std::array<double, 3> sq{0.0, 0.0, 0.0};
        for (std::size_t i = n_train; i < order.size(); ++i) {
            const PredictorExample& e = dataset[order[i]];
            const CellKpis pred = result.predictor.predict(e.kpis, e.action);
            const double dc = pred.cov - e.next_kpis.cov;
            const double dp = pred.cap - e.next_kpis.cap;
            const double dq = pred.qual - e.next_kpis.qual;
            sq[0] += dc * dc;
            sq[1] += dp * dp;
            sq[2] += dq * dq;
        }
        for (int j = 0; j < 3; ++j) {
            result.holdout_rmse_per_kpi[static_cast<std::size_t>(j)] =
                std::sqrt(sq[static_cast<std::size_t>(j)] / static_cast<double>(n_holdout));
        }
        result.holdout_rmse = std::sqrt((sq[0] + sq[1] + sq[2]) / (3.0 * static_cast<double>(n_holdout)));
    }
    return result;
}

// Scores each distinct proposed action by the predicted squared-KPI sum (the
// reward's argument) and picks the proposal with the lowest predicted risk.
// Ties go to the earliest-registered proposer, so safe baselines win them.
inline ShieldDecision predictor_decide(const StatePredictor& predictor, const CellState& state,
                                       std::span<const Proposal> proposals) {
    if (proposals.empty()) throw ContractError("predictor_decide: no proposals");

    ShieldDecision decision;
    std::array<std::optional<double>, kNumActions> score_by_action;
    for (const Proposal& p : proposals) {
        const int a = action_index(p.action);
        if (score_by_action[static_cast<std::size_t>(a)]) continue;
        const CellKpis pred = predictor.predict(state.kpis(), p.action);
        const double score = pred.cov * pred.cov + pred.cap * pred.cap + pred.qual * pred.qual;
        score_by_action[static_cast<std::size_t>(a)] = score;
        decision.predictions.push_back(PredictedOutcome{p.action, pred, score});
    }

    const Proposal* best = nullptr;
    double best_score = 0.0;
    for (const Proposal& p : proposals) {
        const double score = *score_by_action[static_cast<std::size_t>(action_index(p.action))];
        if (best == nullptr || score < best_score) {
            best = &p;
            best_score = score;
        }
    }
    decision.executed = best->action;
    decision.source_id = best->source_id;
    return decision;
}

// --- k-shield logic ----------------------------------------------------------

struct KShieldConfig {
    double initial_k = 0.95;
    double d = 0.1;                // diminishing factor
    int w = 2;                     // reward comparison window, in episodes
    std::vector<double> b;         // baseline mixture weights, sums to 1
};

// Bernoulli gate between the baseline mixture and the agent. k decays by d
// whenever the mean reward of the last w episodes has not fallen below the
// mean of the w before them; the comparison runs every w-th episode once
// 2w episodes of history exist.
class KShieldState {
public:
    explicit KShieldState(const KShieldConfig& cfg) : cfg_(cfg), k_(cfg.initial_k) {
        if (!(cfg_.initial_k >= 0.0 && cfg_.initial_k <= 1.0)) throw ContractError("k-shield: initial_k outside [0,1]");
        if (!(cfg_.d > 0.0 && cfg_.d < 1.0)) throw ContractError("k-shield: d must be in (0,1)");
        if (cfg_.w < 1) throw ContractError("k-shield: w must be >= 1");
        if (cfg_.b.empty()) throw ContractError("k-shield: baseline weight vector b is empty");
        double sum = 0.0;
        for (double v : cfg_.b) {
            if (v < 0.0) throw ContractError("k-shield: negative baseline weight");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ContractError("k-shield: baseline weights must sum to 1");
    }

    double k() const { return k_; }
    int n_baselines() const { return static_cast<int>(cfg_.b.size()); }
    const KShieldConfig& config() const { return cfg_; }
    int episodes_recorded() const { return episodes_recorded_; }

    friend ShieldDecision kshield_decide(const KShieldState&, const Proposal&, std::span<const Proposal>, Rng&);
    friend double kshield_update(KShieldState&, double);

private:
    KShieldConfig cfg_;
    double k_;
    int episodes_recorded_ = 0;
    std::deque<double> reward_history_;  // at most the last 2w episode means
};

inline ShieldDecision kshield_decide(const KShieldState& state, const Proposal& agent_proposal,
                                     std::span<const Proposal> baseline_proposals, Rng& rng) {
    if (static_cast<int>(baseline_proposals.size()) != state.n_baselines()) {
        throw ContractError("kshield_decide: " + std::to_string(baseline_proposals.size()) +
                            " baseline proposals for " + std::to_string(state.n_baselines()) + " weights");
    }
    ShieldDecision decision;
    decision.k = state.k_;
    const bool pick_baseline = rng.bernoulli(state.k_);
    decision.bernoulli_draw = pick_baseline ? 1 : 0;
    if (pick_baseline) {
        const auto i = rng.categorical(state.cfg_.b);
        decision.baseline_index = static_cast<int>(i);
        decision.executed = baseline_proposals[i].action;
        decision.source_id = baseline_proposals[i].source_id;
    } else {
        decision.executed = agent_proposal.action;
        decision.source_id = agent_proposal.source_id;
    }
    return decision;
}

// Feeds one completed episode's mean reward into the schedule; returns the
// (possibly updated) k.
inline double kshield_update(KShieldState& state, double completed_episode_mean_reward) {
    if (!std::isfinite(completed_episode_mean_reward)) throw NumericError("kshield_update: non-finite episode reward");
    const int w = state.cfg_.w;
    state.reward_history_.push_back(completed_episode_mean_reward);
    while (static_cast<int>(state.reward_history_.size()) > 2 * w) state.reward_history_.pop_front();
    ++state.episodes_recorded_;

    if (state.episodes_recorded_ >= 2 * w && state.episodes_recorded_ % w == 0) {
        double recent = 0.0;
        double older = 0.0;
        for (int i = 0; i < w; ++i) {
            older += state.reward_history_[static_cast<std::size_t>(i)];
            recent += state.reward_history_[static_cast<std::size_t>(i + w)];
        }
        if (recent / w >= older / w) {
            state.k_ = std::max(0.0, state.k_ - state.cfg_.d);
        }
    }
    return state.k_;
}

// --- the shield ---------------------------------------------------------------

struct DecisionRow {
    int episode = 0;
    int step = 0;
    int cell = 0;
    int proposer_index = 0;
    int action_delta = 0;
    std::optional<double> k;
    std::optional<int> bernoulli_draw;
    std::optional<int> baseline_index;
    std::optional<CellKpis> predicted;
};

inline const std::string kDecisionLogHeader =
    "episode,step,cell,source_id,action,k,p,i,predicted_cov,predicted_cap,predicted_qual";

// One CSV row per (episode, step, cell); logic-specific fields left blank
// where the active logic does not produce them.
inline void write_decision_log(const std::filesystem::path& path, std::span<const DecisionRow> rows,
                               std::span<const std::string> proposer_ids) {
    csv::Writer out(path);
    out.raw_line(kDecisionLogHeader);
    for (const DecisionRow& r : rows) {
        out.row({std::to_string(r.episode), std::to_string(r.step), std::to_string(r.cell),
                 proposer_ids[static_cast<std::size_t>(r.proposer_index)], std::to_string(r.action_delta),
                 csv::format_opt(r.k),
                 r.bernoulli_draw ? std::to_string(*r.bernoulli_draw) : std::string(),
                 r.baseline_index ? std::to_string(*r.baseline_index) : std::string(),
                 r.predicted ? csv::format_double(r.predicted->cov) : std::string(),
                 r.predicted ? csv::format_double(r.predicted->cap) : std::string(),
                 r.predicted ? csv::format_double(r.predicted->qual) : std::string()});
    }
}

// Mediator that owns the environment handle. Proposers (baselines first,
// then agents) see only states and transition feedback; every executed
// action comes from a registered proposer and is logged.
class Shield {
public:
    using Logic = std::variant<std::monostate, StatePredictor, KShieldState>;

    Shield(std::unique_ptr<NetworkEnv> env, std::uint64_t run_seed)
        : env_(std::move(env)), run_seed_(run_seed) {
        if (!env_) throw ContractError("shield: null environment");
    }

    void set_predictor_logic(StatePredictor predictor) { logic_ = std::move(predictor); }
    void set_kshield_logic(const KShieldConfig& cfg) { logic_ = KShieldState(cfg); }

    void register_proposer(Proposer& proposer, bool is_agent) {
        for (const auto& e : proposers_) {
            if (e.proposer->id() == proposer.id()) throw ContractError("duplicate proposer id '" + proposer.id() + "'");
            if (!is_agent && e.is_agent) {
                throw ContractError("baselines must be registered before agents");
            }
        }
        proposers_.push_back({&proposer, is_agent});
    }

    const Logic& logic() const { return logic_; }
    bool has_logic() const { return !std::holds_alternative<std::monostate>(logic_); }
    const NetworkEnv& env() const { return *env_; }
    int n_proposers() const { return static_cast<int>(proposers_.size()); }
    const std::vector<DecisionRow>& decision_log() const { return decision_log_; }
    bool learning_enabled() const { return learning_enabled_; }
    void set_learning_enabled(bool enabled) { learning_enabled_ = enabled; }

    std::optional<double> current_k() const {
        if (const auto* ks = std::get_if<KShieldState>(&logic_)) return ks->k();
        return std::nullopt;
    }

    std::vector<std::string> proposer_ids() const {
        std::vector<std::string> ids;
        for (const auto& e : proposers_) ids.push_back(e.proposer->id());
        return ids;
    }

    std::vector<CellState> begin_episode() {
        validate_roster();
        auto states = env_->reset_next_episode();
        if (learning_enabled_) {
            for (auto& e : proposers_) e.proposer->begin_episode(env_->current_episode());
        }
        episode_reward_sum_ = 0.0;
        episode_steps_ = 0;
        return states;
    }

    struct StepOutcome {
        std::vector<ShieldDecision> decisions;
        std::vector<CellState> states;
        std::vector<double> rewards;
        std::vector<Transition> transitions;
        int agent_decisions = 0;
    };

    StepOutcome run_step(bool explore) {
        validate_roster();
        const int n_cells = env_->n_cells();
        const auto& states = env_->states();

        StepOutcome outcome;
        outcome.decisions.reserve(static_cast<std::size_t>(n_cells));
        std::vector<TiltAction> executed(static_cast<std::size_t>(n_cells));
        std::vector<Proposal> proposals;
        const int episode = env_->current_episode();
        const int step = env_->current_step() + 1;

        for (int c = 0; c < n_cells; ++c) {
            proposals.clear();
            for (const auto& e : proposers_) {
                proposals.push_back(Proposal{e.proposer->id(), e.proposer->propose(states[static_cast<std::size_t>(c)], explore)});
            }
            ShieldDecision decision = decide(states[static_cast<std::size_t>(c)], proposals, episode, step, c);
            executed[static_cast<std::size_t>(c)] = decision.executed;

            DecisionRow row;
            row.episode = episode;
            row.step = step;
            row.cell = c;
            row.proposer_index = proposer_index(decision.source_id);
            row.action_delta = decision.executed.delta;
            row.k = decision.k;
            row.bernoulli_draw = decision.bernoulli_draw;
            row.baseline_index = decision.baseline_index;
            for (const auto& pred : decision.predictions) {
                if (pred.action == decision.executed) {
                    row.predicted = pred.kpis;
                    break;
                }
            }
            decision_log_.push_back(row);
            if (proposers_[static_cast<std::size_t>(row.proposer_index)].is_agent) ++outcome.agent_decisions;
            outcome.decisions.push_back(std::move(decision));
        }

        auto step_result = env_->step(executed);
        if (learning_enabled_) {
            for (const Transition& t : step_result.transitions) {
                for (auto& e : proposers_) e.proposer->observe(t);
            }
        }

        double mean_reward = 0.0;
        for (double r : step_result.rewards) mean_reward += r;
        mean_reward /= static_cast<double>(step_result.rewards.size());
        episode_reward_sum_ += mean_reward;
        ++episode_steps_;

        outcome.states = std::move(step_result.states);
        outcome.rewards = std::move(step_result.rewards);
        outcome.transitions = std::move(step_result.transitions);
        return outcome;
    }

    // Closes the episode; feeds the k schedule while learning is enabled.
    // Returns the episode's mean per-step cell-mean reward.
    double end_episode() {
        const double mean = episode_steps_ > 0 ? episode_reward_sum_ / episode_steps_ : 0.0;
        if (learning_enabled_) {
            if (auto* ks = std::get_if<KShieldState>(&logic_)) kshield_update(*ks, mean);
        }
        return mean;
    }

    void write_decision_log(const std::filesystem::path& path) const {
        tiltshield::write_decision_log(path, decision_log_, proposer_ids());
    }

private:
    struct Entry {
        Proposer* proposer;
        bool is_agent;
    };

    int proposer_index(const std::string& id) const {
        for (std::size_t i = 0; i < proposers_.size(); ++i) {
            if (proposers_[i].proposer->id() == id) return static_cast<int>(i);
        }
        throw ContractError("decision source '" + id + "' is not a registered proposer");
    }

    void validate_roster() const {
        if (proposers_.empty()) throw ContractError("shield has no registered proposers");
        int agents = 0;
        for (const auto& e : proposers_) agents += e.is_agent ? 1 : 0;
        if (std::holds_alternative<std::monostate>(logic_) && proposers_.size() != 1) {
            throw ContractError("pass-through shield requires exactly one proposer");
        }
        if (const auto* ks = std::get_if<KShieldState>(&logic_)) {
            if (agents != 1) throw ContractError("k-shield requires exactly one registered agent");
            const int baselines = static_cast<int>(proposers_.size()) - agents;
            if (baselines != ks->n_baselines()) {
                throw ContractError("k-shield has " + std::to_string(baselines) + " baselines for " +
                                    std::to_string(ks->n_baselines()) + " weights");
            }
        }
    }

    ShieldDecision decide(const CellState& state, std::span<const Proposal> proposals, int episode, int step, int cell) {
        if (std::holds_alternative<std::monostate>(logic_)) {
            ShieldDecision d;
            d.executed = proposals.front().action;
            d.source_id = proposals.front().source_id;
            return d;
        }
        if (const auto* predictor = std::get_if<StatePredictor>(&logic_)) {
            return predictor_decide(*predictor, state, proposals);
        }
        const auto& ks = std::get<KShieldState>(logic_);
        // baselines precede agents in the roster, so the agent proposal is last
        std::vector<Proposal> baseline_proposals;
        const Proposal* agent_proposal = nullptr;
        for (std::size_t i = 0; i < proposals.size(); ++i) {
            if (proposers_[i].is_agent) {
                agent_proposal = &proposals[i];
            } else {
                baseline_proposals.push_back(proposals[i]);
            }
        }
        Rng rng = Rng::derive(run_seed_, {0x6b736869656c64ull, static_cast<std::uint64_t>(episode),
                                          static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(cell)});
        return kshield_decide(ks, *agent_proposal, baseline_proposals, rng);
    }

    std::unique_ptr<NetworkEnv> env_;
    std::uint64_t run_seed_;
    Logic logic_;
    std::vector<Entry> proposers_;
    std::vector<DecisionRow> decision_log_;
    bool learning_enabled_ = true;
    double episode_reward_sum_ = 0.0;
    int episode_steps_ = 0;
};

}  // namespace tiltshield
