#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tiltshield/tiltshield.hpp"

namespace ts = tiltshield;

namespace {

int run_synth(const std::string& config_path, int samples, std::uint64_t seed, const std::string& out_path) {
    const auto cfg = ts::parse_experiment_config(config_path, /*require_scenario=*/false);
    ts::validate(cfg.sim);
    const auto records = ts::synthesize_dataset(cfg.sim, samples, seed);
    ts::write_dataset(out_path, records);
    std::cout << "wrote " << records.size() << " transitions to " << out_path << "\n";
    return 0;
}

int run_train_baseline(const std::string& data_path, const std::string& out_path, std::uint64_t seed, int epochs) {
    const auto dataset = ts::read_dataset(data_path);
    ts::OfflineTrainConfig cfg;
    cfg.epochs = epochs;
    const auto policy = ts::train_offline_baseline(dataset, seed, cfg);
    ts::save_mlp(policy.q_net(), out_path);
    std::cout << "trained offline baseline on " << dataset.size() << " transitions -> " << out_path << "\n";
    return 0;
}

int run_train_predictor(const std::string& data_path, const std::string& out_path, std::uint64_t seed, int epochs) {
    const auto dataset = ts::read_dataset(data_path);
    const auto examples = ts::predictor_view(dataset);
    ts::PredictorTrainConfig cfg;
    cfg.epochs = epochs;
    const auto result = ts::predictor_train(examples, seed, cfg);
    result.predictor.save(out_path);
    std::cout << "trained state predictor on " << result.n_train << " examples -> " << out_path << "\n";
    std::cout << "held-out rmse: overall " << ts::csv::format_double(result.holdout_rmse) << " (cov "
              << ts::csv::format_double(result.holdout_rmse_per_kpi[0]) << ", cap "
              << ts::csv::format_double(result.holdout_rmse_per_kpi[1]) << ", qual "
              << ts::csv::format_double(result.holdout_rmse_per_kpi[2]) << ") over " << result.n_holdout
              << " examples\n";
    return 0;
}

int run_run(const std::string& config_path) {
    const auto cfg = ts::parse_experiment_config(config_path);
    const auto result = ts::run_experiment(cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "scenario " << ts::scenario_name(cfg.scenario) << ": " << result.seeds.size() << " seeds, "
              << cfg.n_train_episodes << " training episodes -> " << result.output_dir.string() << "\n";
    return 0;
}

int run_compare(const std::vector<std::string>& dirs, const std::string& metric, const std::string& out_path) {
    const auto table = ts::compare_runs(dirs, metric);
    if (out_path.empty()) {
        ts::write_comparison_csv(std::cout, table);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw ts::IoError("cannot open '" + out_path + "' for writing");
        ts::write_comparison_csv(out, table);
        std::cout << "wrote comparison of " << dirs.size() << " runs to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe-RL antenna tilt experiments on a simulated cellular network"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, metric = "reward";
    std::vector<std::string> run_dirs;
    int samples = 5000;
    std::uint64_t seed = 1;
    int baseline_epochs = 20;
    int predictor_epochs = 30;

    auto* synth = app.add_subcommand("synth", "Synthesise a random-policy transition dataset");
    synth->add_option("--config", config_path, "experiment config file (sim.* block is used)")->required();
    synth->add_option("--samples", samples, "number of transitions to record");
    synth->add_option("--seed", seed, "dataset seed");
    synth->add_option("--out", out_path, "output dataset CSV")->required();

    auto* train_b = app.add_subcommand("train-baseline", "Train the offline model-based baseline");
    train_b->add_option("--data", data_path, "dataset CSV from synth")->required();
    train_b->add_option("--out", out_path, "output .mlp file")->required();
    train_b->add_option("--seed", seed, "training seed");
    train_b->add_option("--epochs", baseline_epochs, "training epochs");

    auto* train_p = app.add_subcommand("train-predictor", "Train the state predictor");
    train_p->add_option("--data", data_path, "dataset CSV from synth")->required();
    train_p->add_option("--out", out_path, "output .mlp file")->required();
    train_p->add_option("--seed", seed, "training seed");
    train_p->add_option("--epochs", predictor_epochs, "training epochs");

    auto* run = app.add_subcommand("run", "Run a multi-seed experiment");
    run->add_option("--config", config_path, "experiment config file")->required();

    auto* compare = app.add_subcommand("compare", "Compare a metric across run directories");
    compare->add_option("--metric", metric, "reward, cov, cap, qual, k or an exact column name");
    compare->add_option("--out", out_path, "output CSV (default: stdout)");
    compare->add_option("dirs", run_dirs, "run directories with aggregated.csv")->expected(-2);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(config_path, samples, seed, out_path);
        if (train_b->parsed()) return run_train_baseline(data_path, out_path, seed, baseline_epochs);
        if (train_p->parsed()) return run_train_predictor(data_path, out_path, seed, predictor_epochs);
        if (run->parsed()) return run_run(config_path);
        if (compare->parsed()) return run_compare(run_dirs, metric, out_path);
    } catch (const ts::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
