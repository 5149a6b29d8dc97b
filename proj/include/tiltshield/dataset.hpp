#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tiltshield/csv.hpp"
#include "tiltshield/env.hpp"
#include "tiltshield/shield.hpp"

namespace tiltshield {

inline const std::string kDatasetHeader =
    "episode,step,cell,tilt_norm,cov,cap,qual,action,reward,next_tilt_norm,next_cov,next_cap,next_qual";

// Random-policy rollouts with frequent random resets, giving a varied spread
// of tilt configurations. One record per (step, cell); exactly n_samples
// records are kept. Feeds both the offline Q baseline (full transitions)
// and the state predictor ((kpis, action, next kpis) view).
inline std::vector<Transition> synthesize_dataset(const SimConfig& sim, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ContractError("synthesize_dataset: n_samples must be >= 1");
    validate(sim);

    NetworkEnv env(sim, seed);
    Rng action_rng = Rng::derive(seed, {0x73796e7468ull});
    constexpr int kStepsPerReset = 10;

    std::vector<Transition> records;
    records.reserve(static_cast<std::size_t>(n_samples));
    while (static_cast<int>(records.size()) < n_samples) {
        env.reset_next_episode();
        for (int s = 0; s < kStepsPerReset && static_cast<int>(records.size()) < n_samples; ++s) {
            std::vector<TiltAction> actions(static_cast<std::size_t>(env.n_cells()));
            for (auto& a : actions) a = action_from_index(static_cast<int>(action_rng.uniform_int(0, kNumActions - 1)));
            auto result = env.step(actions);
            for (auto& t : result.transitions) {
                if (static_cast<int>(records.size()) >= n_samples) break;
                records.push_back(std::move(t));
            }
        }
    }
    return records;
}

inline std::vector<PredictorExample> predictor_view(std::span<const Transition> dataset) {
    std::vector<PredictorExample> out;
    out.reserve(dataset.size());
    for (const Transition& t : dataset) {
        out.push_back(PredictorExample{t.state.kpis(), t.action, t.next_state.kpis()});
    }
    return out;
}

inline void write_dataset(const std::filesystem::path& path, std::span<const Transition> records) {
    csv::Writer out(path);
    out.raw_line(kDatasetHeader);
    for (const Transition& t : records) {
        out.row({std::to_string(t.episode), std::to_string(t.step), std::to_string(t.cell_id),
                 csv::format_double(t.state.tilt_norm), csv::format_double(t.state.cov),
                 csv::format_double(t.state.cap), csv::format_double(t.state.qual),
                 std::to_string(t.action.delta), csv::format_double(t.reward),
                 csv::format_double(t.next_state.tilt_norm), csv::format_double(t.next_state.cov),
                 csv::format_double(t.next_state.cap), csv::format_double(t.next_state.qual)});
    }
}

inline std::vector<Transition> read_dataset(const std::filesystem::path& path) {
    const auto table = csv::read_table(path);
    const std::string ctx = "dataset '" + path.string() + "'";
    if (table.header != csv::split_row(kDatasetHeader)) {
        throw FormatError("unexpected header in " + ctx);
    }
    std::vector<Transition> records;
    records.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (row.size() != 13) throw FormatError("malformed row in " + ctx);
        Transition t;
        t.episode = static_cast<int>(csv::parse_long(row[0], ctx));
        t.step = static_cast<int>(csv::parse_long(row[1], ctx));
        t.cell_id = static_cast<int>(csv::parse_long(row[2], ctx));
        t.state.tilt_norm = csv::parse_double(row[3], ctx);
        t.state.cov = csv::parse_double(row[4], ctx);
        t.state.cap = csv::parse_double(row[5], ctx);
        t.state.qual = csv::parse_double(row[6], ctx);
        t.action.delta = static_cast<int>(csv::parse_long(row[7], ctx));
        t.reward = csv::parse_double(row[8], ctx);
        t.next_state.tilt_norm = csv::parse_double(row[9], ctx);
        t.next_state.cov = csv::parse_double(row[10], ctx);
        t.next_state.cap = csv::parse_double(row[11], ctx);
        t.next_state.qual = csv::parse_double(row[12], ctx);
        records.push_back(t);
    }
    return records;
}

}  // namespace tiltshield
