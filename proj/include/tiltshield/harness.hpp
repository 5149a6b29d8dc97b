#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tiltshield/agents.hpp"
#include "tiltshield/baselines.hpp"
#include "tiltshield/config.hpp"
#include "tiltshield/csv.hpp"
#include "tiltshield/dataset.hpp"
#include "tiltshield/shield.hpp"

namespace tiltshield {

inline const std::string kAggregatedHeader =
    "episode,reward_mean,reward_min,reward_max,cov_mean,cov_min,cov_max,cap_mean,cap_min,cap_max,"
    "qual_mean,qual_min,qual_max,k_mean,source_fraction_agent";

inline const std::string kSeedHeader = "episode,reward,cov,cap,qual,k,source_fraction_agent";

struct EpisodeStats {
    double reward = 0.0;  // episode mean of per-step cell-mean reward
    double cov = 0.0;
    double cap = 0.0;
    double qual = 0.0;
    std::optional<double> k;  // k after the episode's schedule update (k-shield only)
    double source_fraction_agent = 0.0;
};

struct MetricRow {
    int episode = 0;
    double reward_mean = 0.0, reward_min = 0.0, reward_max = 0.0;
    double cov_mean = 0.0, cov_min = 0.0, cov_max = 0.0;
    double cap_mean = 0.0, cap_min = 0.0, cap_max = 0.0;
    double qual_mean = 0.0, qual_min = 0.0, qual_max = 0.0;
    std::optional<double> k_mean;
    double source_fraction_agent = 0.0;
};

struct SeedRunData {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<EpisodeStats> train;
    std::optional<EpisodeStats> eval_mean;
    std::vector<DecisionRow> decisions;
    std::vector<std::string> proposer_ids;
};

struct RunResult {
    ExperimentConfig config;
    std::vector<SeedRunData> seeds;
    std::vector<MetricRow> aggregated;
    std::filesystem::path output_dir;
    std::vector<std::string> warnings;
};

// Proposer roster plus the shield for one scenario run. Kept as a struct so
// tests can assert which logic a scenario instantiates.
struct ScenarioParts {
    std::unique_ptr<Shield> shield;
    std::vector<std::unique_ptr<Proposer>> proposers;  // owning; registered with the shield
    bool has_agent = false;
};

inline std::unique_ptr<Proposer> make_agent(AgentKind kind, std::uint64_t seed) {
    if (kind == AgentKind::dqn) return std::make_unique<DqnAgent>(DqnConfig{}, seed);
    return std::make_unique<AcAgent>(AcConfig{}, seed);
}

inline ScenarioParts build_scenario(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    SimConfig sim = cfg.sim;
    sim.seed = splitmix64(cfg.sim.seed ^ splitmix64(run_seed));  // independent UE drop per seed

    ScenarioParts parts;
    parts.shield = std::make_unique<Shield>(std::make_unique<NetworkEnv>(sim, run_seed), run_seed);

    int model_count = 0;
    auto add_baseline = [&](const BaselineSpec& spec) {
        if (spec.kind == BaselineSpec::Kind::rule) {
            parts.proposers.push_back(std::make_unique<RuleBasedPolicy>(cfg.rule));
        } else {
            ++model_count;
            const std::string id = model_count == 1 ? "model" : "model" + std::to_string(model_count);
            parts.proposers.push_back(std::make_unique<ModelBasedPolicy>(ModelBasedPolicy::load(spec.model_path, id)));
        }
        parts.shield->register_proposer(*parts.proposers.back(), /*is_agent=*/false);
    };

    switch (cfg.scenario) {
    case Scenario::unrestricted_dqn:
    case Scenario::unrestricted_ac: {
        parts.proposers.push_back(make_agent(cfg.agent_kind, run_seed));
        parts.shield->register_proposer(*parts.proposers.back(), /*is_agent=*/true);
        parts.has_agent = true;
        break;
    }
    case Scenario::baseline_only: {
        add_baseline(cfg.baselines.front());
        break;
    }
    case Scenario::predictor_shield: {
        parts.shield->set_predictor_logic(StatePredictor::load(cfg.predictor_model));
        for (const auto& spec : cfg.baselines) add_baseline(spec);
        parts.proposers.push_back(make_agent(cfg.agent_kind, run_seed));
        parts.shield->register_proposer(*parts.proposers.back(), /*is_agent=*/true);
        parts.has_agent = true;
        break;
    }
    case Scenario::k_shield: {
        parts.shield->set_kshield_logic(KShieldConfig{cfg.k_initial, cfg.d, cfg.w, cfg.b});
        for (const auto& spec : cfg.baselines) add_baseline(spec);
        parts.proposers.push_back(make_agent(cfg.agent_kind, run_seed));
        parts.shield->register_proposer(*parts.proposers.back(), /*is_agent=*/true);
        parts.has_agent = true;
        break;
    }
    }
    return parts;
}

namespace detail {

inline EpisodeStats run_one_episode(Shield& shield, int episode_length, bool explore) {
    shield.begin_episode();
    double cov = 0.0, cap = 0.0, qual = 0.0;
    int agent_decisions = 0;
    int total_decisions = 0;
    for (int s = 0; s < episode_length; ++s) {
        const auto outcome = shield.run_step(explore);
        const auto& kpis = shield.env().kpis();
        double c = 0.0, p = 0.0, q = 0.0;
        for (const auto& k : kpis) {
            c += k.cov;
            p += k.cap;
            q += k.qual;
        }
        const double n = static_cast<double>(kpis.size());
        cov += c / n;
        cap += p / n;
        qual += q / n;
        agent_decisions += outcome.agent_decisions;
        total_decisions += static_cast<int>(outcome.decisions.size());
    }
    EpisodeStats stats;
    stats.reward = shield.end_episode();
    stats.cov = cov / episode_length;
    stats.cap = cap / episode_length;
    stats.qual = qual / episode_length;
    stats.k = shield.current_k();
    stats.source_fraction_agent = total_decisions > 0 ? static_cast<double>(agent_decisions) / total_decisions : 0.0;
    return stats;
}

inline SeedRunData run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    SeedRunData data;
    data.seed = seed;
    ScenarioParts parts = build_scenario(cfg, seed);
    Shield& shield = *parts.shield;
    data.train.reserve(static_cast<std::size_t>(cfg.n_train_episodes));
    for (int e = 0; e < cfg.n_train_episodes; ++e) {
        data.train.push_back(run_one_episode(shield, cfg.episode_length, /*explore=*/true));
    }
    if (cfg.n_eval_episodes > 0) {
        shield.set_learning_enabled(false);
        EpisodeStats sum;
        for (int e = 0; e < cfg.n_eval_episodes; ++e) {
            const EpisodeStats s = run_one_episode(shield, cfg.episode_length, /*explore=*/false);
            sum.reward += s.reward;
            sum.cov += s.cov;
            sum.cap += s.cap;
            sum.qual += s.qual;
            sum.source_fraction_agent += s.source_fraction_agent;
        }
        const double n = static_cast<double>(cfg.n_eval_episodes);
        sum.reward /= n;
        sum.cov /= n;
        sum.cap /= n;
        sum.qual /= n;
        sum.source_fraction_agent /= n;
        sum.k = shield.current_k();
        data.eval_mean = sum;
    }
    data.decisions = shield.decision_log();
    data.proposer_ids = shield.proposer_ids();
    return data;
}

// Trailing running average of width `window` (shorter at the start).
inline std::vector<double> running_average(std::span<const double> values, int window) {
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i];
        if (i >= static_cast<std::size_t>(window)) acc -= values[i - static_cast<std::size_t>(window)];
        const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
        out[i] = acc / static_cast<double>(n);
    }
    return out;
}

}  // namespace detail

// Cross-seed aggregation: per-episode mean/min/max, with the running average
// applied to the mean-type columns only; min/max stay unsmoothed.
inline std::vector<MetricRow> aggregate(const std::vector<SeedRunData>& seeds, int smoothing_window) {
    std::vector<const SeedRunData*> ok;
    for (const auto& s : seeds) {
        if (!s.failed) ok.push_back(&s);
    }
    if (ok.empty()) throw NumericError("aggregate: every seed failed");
    const std::size_t n_episodes = ok.front()->train.size();
    for (const auto* s : ok) {
        if (s->train.size() != n_episodes) throw ContractError("aggregate: seeds disagree on episode count");
    }

    std::vector<MetricRow> rows(n_episodes);
    std::vector<double> reward_mean(n_episodes), cov_mean(n_episodes), cap_mean(n_episodes), qual_mean(n_episodes),
        k_mean(n_episodes), frac_mean(n_episodes);
    const bool has_k = !ok.front()->train.empty() && ok.front()->train.front().k.has_value();

    for (std::size_t e = 0; e < n_episodes; ++e) {
        MetricRow& row = rows[e];
        row.episode = static_cast<int>(e) + 1;
        row.reward_min = row.cov_min = row.cap_min = row.qual_min = std::numeric_limits<double>::infinity();
        row.reward_max = row.cov_max = row.cap_max = row.qual_max = -std::numeric_limits<double>::infinity();
        double k_sum = 0.0;
        for (const auto* s : ok) {
            const EpisodeStats& st = s->train[e];
            reward_mean[e] += st.reward;
            cov_mean[e] += st.cov;
            cap_mean[e] += st.cap;
            qual_mean[e] += st.qual;
            frac_mean[e] += st.source_fraction_agent;
            row.reward_min = std::min(row.reward_min, st.reward);
            row.reward_max = std::max(row.reward_max, st.reward);
            row.cov_min = std::min(row.cov_min, st.cov);
            row.cov_max = std::max(row.cov_max, st.cov);
            row.cap_min = std::min(row.cap_min, st.cap);
            row.cap_max = std::max(row.cap_max, st.cap);
            row.qual_min = std::min(row.qual_min, st.qual);
            row.qual_max = std::max(row.qual_max, st.qual);
            if (has_k) k_sum += st.k.value();
        }
        const double n = static_cast<double>(ok.size());
        reward_mean[e] /= n;
        cov_mean[e] /= n;
        cap_mean[e] /= n;
        qual_mean[e] /= n;
        frac_mean[e] /= n;
        if (has_k) k_mean[e] = k_sum / n;
    }

    const auto sm_reward = detail::running_average(reward_mean, smoothing_window);
    const auto sm_cov = detail::running_average(cov_mean, smoothing_window);
    const auto sm_cap = detail::running_average(cap_mean, smoothing_window);
    const auto sm_qual = detail::running_average(qual_mean, smoothing_window);
    const auto sm_k = detail::running_average(k_mean, smoothing_window);
    const auto sm_frac = detail::running_average(frac_mean, smoothing_window);
    for (std::size_t e = 0; e < n_episodes; ++e) {
        rows[e].reward_mean = sm_reward[e];
        rows[e].cov_mean = sm_cov[e];
        rows[e].cap_mean = sm_cap[e];
        rows[e].qual_mean = sm_qual[e];
        if (has_k) rows[e].k_mean = sm_k[e];
        rows[e].source_fraction_agent = sm_frac[e];
    }
    return rows;
}

inline void write_aggregated_csv(const std::filesystem::path& path, std::span<const MetricRow> rows) {
    csv::Writer out(path);
    out.raw_line(kAggregatedHeader);
    for (const MetricRow& r : rows) {
        out.row({std::to_string(r.episode), csv::format_double(r.reward_mean), csv::format_double(r.reward_min),
                 csv::format_double(r.reward_max), csv::format_double(r.cov_mean), csv::format_double(r.cov_min),
                 csv::format_double(r.cov_max), csv::format_double(r.cap_mean), csv::format_double(r.cap_min),
                 csv::format_double(r.cap_max), csv::format_double(r.qual_mean), csv::format_double(r.qual_min),
                 csv::format_double(r.qual_max), csv::format_opt(r.k_mean),
                 csv::format_double(r.source_fraction_agent)});
    }
}

inline void write_seed_csv(const std::filesystem::path& path, const SeedRunData& data) {
    csv::Writer out(path);
    out.raw_line(kSeedHeader);
    for (std::size_t e = 0; e < data.train.size(); ++e) {
        const EpisodeStats& s = data.train[e];
        out.row({std::to_string(e + 1), csv::format_double(s.reward), csv::format_double(s.cov),
                 csv::format_double(s.cap), csv::format_double(s.qual), csv::format_opt(s.k),
                 csv::format_double(s.source_fraction_agent)});
    }
}

// Runs every seed (concurrently, shared-nothing), writes the run directory
// and returns everything in memory. Seeds that diverge numerically are
// dropped from aggregation with a warning; any other error aborts the run.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    if (cfg.output_dir.empty()) throw ConfigError("config: output_dir is required to run an experiment");

    // fail fast on missing model files
    if (cfg.scenario == Scenario::predictor_shield) {
        if (!std::filesystem::exists(cfg.predictor_model)) {
            throw IoError("predictor model '" + cfg.predictor_model + "' does not exist");
        }
    }
    for (const auto& b : cfg.baselines) {
        if (b.kind == BaselineSpec::Kind::model && !std::filesystem::exists(b.model_path)) {
            throw IoError("baseline model '" + b.model_path + "' does not exist");
        }
    }

    RunResult result;
    result.config = cfg;
    result.output_dir = cfg.output_dir;

    std::vector<std::future<SeedRunData>> futures;
    futures.reserve(cfg.seeds.size());
    for (const std::uint64_t seed : cfg.seeds) {
        futures.push_back(std::async(std::launch::async, [&cfg, seed] { return detail::run_seed(cfg, seed); }));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) {
        try {
            result.seeds.push_back(futures[i].get());
        } catch (const NumericError& e) {
            SeedRunData failed;
            failed.seed = cfg.seeds[i];
            failed.failed = true;
            failed.error = e.what();
            result.seeds.push_back(std::move(failed));
            result.warnings.push_back("seed " + std::to_string(cfg.seeds[i]) + " diverged and was dropped: " + e.what());
        }
    }

    result.aggregated = aggregate(result.seeds, cfg.smoothing_window);

    std::error_code ec;
    std::filesystem::create_directories(result.output_dir, ec);
    if (ec) throw IoError("cannot create output dir '" + result.output_dir.string() + "': " + ec.message());

    write_aggregated_csv(result.output_dir / "aggregated.csv", result.aggregated);
    {
        csv::Writer eval_out(result.output_dir / "evaluation.csv");
        eval_out.raw_line("seed,reward,cov,cap,qual,source_fraction_agent");
        double r = 0.0, c = 0.0, p = 0.0, q = 0.0, f = 0.0;
        int n_ok = 0;
        for (const auto& s : result.seeds) {
            if (s.failed || !s.eval_mean) continue;
            const EpisodeStats& ev = *s.eval_mean;
            eval_out.row({std::to_string(s.seed), csv::format_double(ev.reward), csv::format_double(ev.cov),
                          csv::format_double(ev.cap), csv::format_double(ev.qual),
                          csv::format_double(ev.source_fraction_agent)});
            r += ev.reward;
            c += ev.cov;
            p += ev.cap;
            q += ev.qual;
            f += ev.source_fraction_agent;
            ++n_ok;
        }
        if (n_ok > 0) {
            const double n = static_cast<double>(n_ok);
            eval_out.row({"mean", csv::format_double(r / n), csv::format_double(c / n), csv::format_double(p / n),
                          csv::format_double(q / n), csv::format_double(f / n)});
        }
    }
    for (const auto& s : result.seeds) {
        if (s.failed) continue;
        write_seed_csv(result.output_dir / ("seed_" + std::to_string(s.seed) + ".csv"), s);
        write_decision_log(result.output_dir / ("decisions_seed_" + std::to_string(s.seed) + ".csv"), s.decisions,
                           s.proposer_ids);
    }
    {
        std::ofstream log(result.output_dir / "run.log");
        log << "scenario=" << scenario_name(cfg.scenario) << "\n";
        log << "seeds=";
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) log << (i ? "," : "") << cfg.seeds[i];
        log << "\nn_train_episodes=" << cfg.n_train_episodes << " episode_length=" << cfg.episode_length
            << " n_eval_episodes=" << cfg.n_eval_episodes << "\n";
        for (const auto& s : result.seeds) {
            log << "seed " << s.seed << ": " << (s.failed ? ("FAILED: " + s.error) : std::string("ok")) << "\n";
        }
        for (const auto& w : result.warnings) log << "warning: " << w << "\n";
    }
    return result;
}

// --- cross-run comparison -----------------------------------------------------

struct ComparisonTable {
    std::string metric_column;
    std::vector<std::string> run_dirs;
    std::vector<int> episodes;
    std::vector<std::vector<double>> values;  // [run][episode]
    std::vector<double> early_mean;           // first quartile of episodes
    std::vector<double> final_mean;           // last quartile of episodes
};

inline std::string resolve_metric_column(const std::string& metric) {
    if (metric == "reward" || metric == "cov" || metric == "cap" || metric == "qual") return metric + "_mean";
    if (metric == "k") return "k_mean";
    return metric;  // exact column name
}

inline ComparisonTable compare_runs(std::span<const std::string> run_dirs, const std::string& metric) {
    if (run_dirs.size() < 2) throw ConfigError("compare: need at least two run directories");
    ComparisonTable table;
    table.metric_column = resolve_metric_column(metric);
    table.run_dirs.assign(run_dirs.begin(), run_dirs.end());

    for (const auto& dir : run_dirs) {
        const auto path = std::filesystem::path(dir) / "aggregated.csv";
        const auto csv_table = csv::read_table(path);
        const auto col = csv_table.column(table.metric_column, "run '" + dir + "'");
        const auto ep_col = csv_table.column("episode", "run '" + dir + "'");
        std::vector<int> episodes;
        std::vector<double> values;
        for (const auto& row : csv_table.rows) {
            episodes.push_back(static_cast<int>(csv::parse_long(row[ep_col], path.string())));
            if (row[col].empty()) {
                throw ConfigError("run '" + dir + "' has no values for metric '" + table.metric_column + "'");
            }
            values.push_back(csv::parse_double(row[col], path.string()));
        }
        if (table.episodes.empty()) {
            table.episodes = episodes;
        } else if (table.episodes != episodes) {
            throw ConfigError("episode counts differ between runs '" + run_dirs.front() + "' (" +
                              std::to_string(table.episodes.size()) + " episodes) and '" + dir + "' (" +
                              std::to_string(episodes.size()) + " episodes)");
        }
        table.values.push_back(std::move(values));
    }

    const std::size_t n = table.episodes.size();
    const std::size_t quartile = std::max<std::size_t>(1, n / 4);
    for (const auto& values : table.values) {
        double early = 0.0, final_ = 0.0;
        for (std::size_t i = 0; i < quartile; ++i) early += values[i];
        for (std::size_t i = n - quartile; i < n; ++i) final_ += values[i];
        table.early_mean.push_back(early / static_cast<double>(quartile));
        table.final_mean.push_back(final_ / static_cast<double>(quartile));
    }
    return table;
}

inline void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
    out << "episode";
    for (const auto& dir : table.run_dirs) out << ',' << dir;
    out << '\n';
    for (std::size_t e = 0; e < table.episodes.size(); ++e) {
        out << table.episodes[e];
        for (const auto& values : table.values) out << ',' << csv::format_double(values[e]);
        out << '\n';
    }
    out << "early_mean";
    for (double v : table.early_mean) out << ',' << csv::format_double(v);
    out << '\n';
    out << "final_mean";
    for (double v : table.final_mean) out << ',' << csv::format_double(v);
    out << '\n';
}

// Greedy evaluation of a single policy on a fresh environment; returns the
// mean episode reward. Shared by tests and offline-baseline checks.
inline double evaluate_policy(const SimConfig& sim, Proposer& policy, int n_episodes, int episode_length,
                              std::uint64_t seed) {
    NetworkEnv env(sim, seed);
    double total = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
        env.reset_next_episode();
        double ep = 0.0;
        for (int s = 0; s < episode_length; ++s) {
            std::vector<TiltAction> actions;
            actions.reserve(static_cast<std::size_t>(env.n_cells()));
            for (const CellState& st : env.states()) actions.push_back(policy.propose(st, /*explore=*/false));
            const auto result = env.step(actions);
            double mean = 0.0;
            for (double r : result.rewards) mean += r;
            ep += mean / static_cast<double>(result.rewards.size());
        }
        total += ep / episode_length;
    }
    return total / n_episodes;
}

}  // namespace tiltshield
