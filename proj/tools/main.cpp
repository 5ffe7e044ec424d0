// morl: multi-objective RL training/evaluation/plotting command-line tool.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "morl/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

int cmd_train(const std::string& config_path, std::int64_t seed_override, int jobs) {
    morl::RunConfig cfg = morl::load_config(config_path);
    if (seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
    cfg.validate();
    morl::RunGroupResult group = morl::run_training(cfg, jobs);
    for (const auto& s : group.seeds) {
        std::cout << "seed " << s.seed << ": " << (s.ok ? "ok" : "FAILED") << "  "
                  << s.dir;
        if (s.ok)
            std::cout << "  return " << s.final_eval_return << "  energy "
                      << s.final_eval_energy;
        else
            std::cout << "  (" << s.error << ")";
        std::cout << '\n';
    }
    return group.all_ok() ? kExitOk : kExitRunFailure;
}

int cmd_eval(const std::string& checkpoint_path, int episodes, std::uint64_t seed,
             const std::string& out_path) {
    morl::EvalSummary s = morl::evaluate_checkpoint(checkpoint_path, episodes, seed);
    const std::string text = morl::format_summary(s);
    std::cout << text;
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for writing: " + out_path);
        f << text;
    }
    return kExitOk;
}

int cmd_sweep(const std::string& config_path, std::vector<double> lambdas, int jobs) {
    morl::RunConfig cfg = morl::load_config(config_path);
    cfg.validate();
    if (lambdas.empty()) lambdas = {0.001, 0.01, 0.1, 0.5};
    auto points = morl::run_sweep(cfg, lambdas, jobs);
    if (points.empty()) {
        std::cerr << "sweep: no run completed\n";
        return kExitRunFailure;
    }
    for (const auto& p : points)
        std::cout << p.run_id << ": mean return " << p.mean_final_return
                  << ", mean energy " << p.mean_final_energy << " ("
                  << p.per_seed.size() << " seeds)\n";
    std::cout << "pareto table: " << cfg.out_dir << "/pareto.csv\n";
    return kExitOk;
}

int cmd_plot(const std::string& index_path, const std::string& kind,
             const std::string& out_path) {
    morl::plot_from_index(index_path, morl::parse_plot_kind(kind), out_path);
    std::cout << "wrote " << out_path << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective RL: train, evaluate, sweep, plot"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, index_path, kind, out_path;
    std::int64_t seed_override = -1;
    std::uint64_t eval_seed = 777;
    int episodes = 50, jobs = 1;
    std::vector<double> lambdas;

    auto* train = app.add_subcommand("train", "Run training for every config seed");
    train->add_option("--config", config_path, "Run config file")->required();
    train->add_option("--seed-override", seed_override, "Train this single seed only");
    train->add_option("--jobs", jobs, "Concurrent seed runs");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint deterministically");
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
    eval->add_option("--episodes", episodes, "Evaluation episodes (default 50)");
    eval->add_option("--seed", eval_seed, "Evaluation seed");
    eval->add_option("--out", out_path, "Also write the summary to this file");

    auto* sweep = app.add_subcommand(
        "sweep", "Scalarized lambda grid plus pegrad and pcgrad_plus");
    sweep->add_option("--config", config_path, "Run config file")->required();
    sweep->add_option("--lambdas", lambdas,
                      "Lambda grid (default 0.001 0.01 0.1 0.5)");
    sweep->add_option("--jobs", jobs, "Concurrent seed runs");

    auto* plot = app.add_subcommand("plot", "Emit an SVG from a runs index");
    plot->add_option("--runs", index_path, "runs.csv index file")->required();
    plot->add_option("--kind", kind, "pareto | sample | energy")->required();
    plot->add_option("--out", out_path, "Output SVG path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(config_path, seed_override, jobs);
        if (*eval) return cmd_eval(checkpoint_path, episodes, eval_seed, out_path);
        if (*sweep) return cmd_sweep(config_path, lambdas, jobs);
        if (*plot) {
            if (out_path.empty()) out_path = kind + ".svg";
            return cmd_plot(index_path, kind, out_path);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRunFailure;
    }
    return kExitOk;
}
