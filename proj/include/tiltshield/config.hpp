#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tiltshield/baselines.hpp"
#include "tiltshield/csv.hpp"
#include "tiltshield/radio_sim.hpp"

namespace tiltshield {

enum class Scenario {
    unrestricted_dqn,
    unrestricted_ac,
    baseline_only,
    predictor_shield,
    k_shield,
};

enum class AgentKind { dqn, ac };

struct BaselineSpec {
    enum class Kind { rule, model } kind = Kind::rule;
    std::string model_path;  // for model baselines
};

// One experiment = one config file. Flat `key = value` lines; '#' starts a
// comment; unknown keys are errors. Lists are comma-separated.
struct ExperimentConfig {
    Scenario scenario = Scenario::baseline_only;
    AgentKind agent_kind = AgentKind::dqn;
    std::vector<BaselineSpec> baselines;
    std::vector<double> b;  // k-shield baseline weights
    double d = 0.1;
    int w = 2;
    double k_initial = 0.95;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6};
    int n_train_episodes = 200;
    int episode_length = 20;
    int n_eval_episodes = 25;
    int smoothing_window = 5;
    std::string predictor_model;  // .mlp path, predictor-shield only
    std::string output_dir;
    RuleThresholds rule;
    SimConfig sim;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long n = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& v) {
    if (v == "unrestricted-dqn") return Scenario::unrestricted_dqn;
    if (v == "unrestricted-ac") return Scenario::unrestricted_ac;
    if (v == "baseline-only") return Scenario::baseline_only;
    if (v == "predictor-shield") return Scenario::predictor_shield;
    if (v == "k-shield") return Scenario::k_shield;
    throw ConfigError("unknown scenario '" + v +
                      "' (expected unrestricted-dqn, unrestricted-ac, baseline-only, predictor-shield or k-shield)");
}

inline std::string scenario_name(Scenario s) {
    switch (s) {
    case Scenario::unrestricted_dqn: return "unrestricted-dqn";
    case Scenario::unrestricted_ac: return "unrestricted-ac";
    case Scenario::baseline_only: return "baseline-only";
    case Scenario::predictor_shield: return "predictor-shield";
    case Scenario::k_shield: return "k-shield";
    }
    return "?";
}

inline ExperimentConfig parse_experiment_config_text(const std::string& text, bool require_scenario = true) {
    ExperimentConfig cfg;
    bool scenario_seen = false;
    bool agent_kind_seen = false;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                              detail::trim(raw) + "'");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
        }

        if (key == "scenario") {
            cfg.scenario = parse_scenario(value);
            scenario_seen = true;
        } else if (key == "agent_kind") {
            if (value == "dqn") cfg.agent_kind = AgentKind::dqn;
            else if (value == "ac") cfg.agent_kind = AgentKind::ac;
            else throw ConfigError("config key 'agent_kind': expected dqn or ac, got '" + value + "'");
            agent_kind_seen = true;
        } else if (key == "baselines") {
            cfg.baselines.clear();
            for (const auto& item : detail::split_list(value)) {
                if (item == "rule") {
                    cfg.baselines.push_back({BaselineSpec::Kind::rule, ""});
                } else if (item.rfind("model:", 0) == 0) {
                    const std::string path = detail::trim(item.substr(6));
                    if (path.empty()) throw ConfigError("config key 'baselines': model entry needs a path");
                    cfg.baselines.push_back({BaselineSpec::Kind::model, path});
                } else {
                    throw ConfigError("config key 'baselines': expected rule or model:<path>, got '" + item + "'");
                }
            }
        } else if (key == "b") {
            cfg.b.clear();
            for (const auto& item : detail::split_list(value)) cfg.b.push_back(detail::to_double(key, item));
        } else if (key == "d") {
            cfg.d = detail::to_double(key, value);
        } else if (key == "w") {
            cfg.w = static_cast<int>(detail::to_long(key, value));
        } else if (key == "k_initial") {
            cfg.k_initial = detail::to_double(key, value);
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const auto& item : detail::split_list(value)) {
                cfg.seeds.push_back(static_cast<std::uint64_t>(detail::to_long(key, item)));
            }
        } else if (key == "n_train_episodes") {
            cfg.n_train_episodes = static_cast<int>(detail::to_long(key, value));
        } else if (key == "episode_length") {
            cfg.episode_length = static_cast<int>(detail::to_long(key, value));
        } else if (key == "n_eval_episodes") {
            cfg.n_eval_episodes = static_cast<int>(detail::to_long(key, value));
        } else if (key == "smoothing_window") {
            cfg.smoothing_window = static_cast<int>(detail::to_long(key, value));
        } else if (key == "predictor_model") {
            cfg.predictor_model = value;
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "rule.cov_high") {
            cfg.rule.cov_high = detail::to_double(key, value);
        } else if (key == "rule.qual_high") {
            cfg.rule.qual_high = detail::to_double(key, value);
        } else if (key == "sim.n_base_stations") {
            cfg.sim.n_base_stations = static_cast<int>(detail::to_long(key, value));
        } else if (key == "sim.sectors_per_station") {
            cfg.sim.sectors_per_station = static_cast<int>(detail::to_long(key, value));
        } else if (key == "sim.n_ues") {
            cfg.sim.n_ues = static_cast<int>(detail::to_long(key, value));
        } else if (key == "sim.carrier_freq_hz") {
            cfg.sim.carrier_freq_hz = detail::to_double(key, value);
        } else if (key == "sim.traffic_volume_mbps") {
            cfg.sim.traffic_volume_mbps = detail::to_double(key, value);
        } else if (key == "sim.antenna_height_m") {
            cfg.sim.antenna_height_m = detail::to_double(key, value);
        } else if (key == "sim.min_tilt_deg") {
            cfg.sim.min_tilt_deg = detail::to_double(key, value);
        } else if (key == "sim.max_tilt_deg") {
            cfg.sim.max_tilt_deg = detail::to_double(key, value);
        } else if (key == "sim.inter_site_distance_m") {
            cfg.sim.inter_site_distance_m = detail::to_double(key, value);
        } else if (key == "sim.ue_height_m") {
            cfg.sim.ue_height_m = detail::to_double(key, value);
        } else if (key == "sim.rsrp_coverage_threshold_dbm") {
            cfg.sim.rsrp_coverage_threshold_dbm = detail::to_double(key, value);
        } else if (key == "sim.sinr_quality_threshold_db") {
            cfg.sim.sinr_quality_threshold_db = detail::to_double(key, value);
        } else if (key == "sim.tx_power_dbm") {
            cfg.sim.tx_power_dbm = detail::to_double(key, value);
        } else if (key == "sim.vertical_beamwidth_deg") {
            cfg.sim.vertical_beamwidth_deg = detail::to_double(key, value);
        } else if (key == "sim.horizontal_beamwidth_deg") {
            cfg.sim.horizontal_beamwidth_deg = detail::to_double(key, value);
        } else if (key == "sim.max_antenna_gain_dbi") {
            cfg.sim.max_antenna_gain_dbi = detail::to_double(key, value);
        } else if (key == "sim.noise_floor_dbm") {
            cfg.sim.noise_floor_dbm = detail::to_double(key, value);
        } else if (key == "sim.seed") {
            cfg.sim.seed = static_cast<std::uint64_t>(detail::to_long(key, value));
        } else {
            throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(line_no) + ")");
        }
    }

    if (require_scenario && !scenario_seen) throw ConfigError("config is missing required key 'scenario'");
    if (scenario_seen) {
        if (cfg.scenario == Scenario::unrestricted_dqn) {
            if (agent_kind_seen && cfg.agent_kind != AgentKind::dqn) {
                throw ConfigError("scenario unrestricted-dqn conflicts with agent_kind");
            }
            cfg.agent_kind = AgentKind::dqn;
        }
        if (cfg.scenario == Scenario::unrestricted_ac) {
            if (agent_kind_seen && cfg.agent_kind != AgentKind::ac) {
                throw ConfigError("scenario unrestricted-ac conflicts with agent_kind");
            }
            cfg.agent_kind = AgentKind::ac;
        }
    }
    return cfg;
}

inline ExperimentConfig parse_experiment_config(const std::filesystem::path& path, bool require_scenario = true) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config_text(buf.str(), require_scenario);
}

// Scenario-level validation, beyond per-key parsing.
inline void validate(const ExperimentConfig& cfg) {
    validate(cfg.sim);
    if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
    if (cfg.n_train_episodes < 1) throw ConfigError("config: n_train_episodes must be >= 1");
    if (cfg.episode_length < 1) throw ConfigError("config: episode_length must be >= 1");
    if (cfg.n_eval_episodes < 0) throw ConfigError("config: n_eval_episodes must be >= 0");
    if (cfg.smoothing_window < 1) throw ConfigError("config: smoothing_window must be >= 1");

    switch (cfg.scenario) {
    case Scenario::unrestricted_dqn:
    case Scenario::unrestricted_ac:
        if (!cfg.baselines.empty()) {
            throw ConfigError("config: unrestricted scenarios take no baselines");
        }
        break;
    case Scenario::baseline_only:
        if (cfg.baselines.size() != 1) {
            throw ConfigError("config: baseline-only requires exactly one baseline, got " +
                              std::to_string(cfg.baselines.size()));
        }
        break;
    case Scenario::predictor_shield:
        if (cfg.baselines.empty()) throw ConfigError("config: predictor-shield requires at least one baseline");
        if (cfg.predictor_model.empty()) throw ConfigError("config: predictor-shield requires predictor_model");
        break;
    case Scenario::k_shield: {
        if (cfg.baselines.empty()) throw ConfigError("config: k-shield requires at least one baseline");
        if (cfg.b.size() != cfg.baselines.size()) {
            throw ConfigError("config: k-shield weight vector b has " + std::to_string(cfg.b.size()) +
                              " entries for " + std::to_string(cfg.baselines.size()) + " baselines");
        }
        double sum = 0.0;
        for (double v : cfg.b) {
            if (v < 0.0) throw ConfigError("config: k-shield weights must be non-negative");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("config: k-shield weights must sum to 1");
        if (!(cfg.d > 0.0 && cfg.d < 1.0)) throw ConfigError("config: d must be in (0,1)");
        if (cfg.w < 1) throw ConfigError("config: w must be >= 1");
        if (!(cfg.k_initial >= 0.0 && cfg.k_initial <= 1.0)) {
            throw ConfigError("config: k_initial must be in [0,1]");
        }
        break;
    }
    }
}

}  // namespace tiltshield
