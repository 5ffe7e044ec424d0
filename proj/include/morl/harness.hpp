#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morl/config.hpp"
#include "morl/plot.hpp"

namespace morl {

// Outcome of one seeded training run.
struct SeedRunResult {
    std::uint64_t seed = 0;
    std::string dir;
    bool ok = false;
    bool diverged = false;
    std::string error;
    double final_eval_return = 0.0;
    double final_eval_energy = 0.0;
};

struct RunGroupResult {
    std::string label;
    std::vector<SeedRunResult> seeds;
    bool all_ok() const;
};

struct EvalSummary {
    double mean_return = 0.0, std_return = 0.0;
    double mean_energy = 0.0, std_energy = 0.0;
    int episodes = 0;
};

// Filesystem-safe form of a combiner label ("scalarized(0.01)" ->
// "scalarized_0.01").
std::string run_label(const RunConfig& cfg);

// Trains one seed into dir/: metrics.csv, checkpoint.txt, summary.txt and a
// copy of the resolved config. Divergence yields partial artifacts plus a
// FAILED marker file instead of an exception.
SeedRunResult run_single_seed(const RunConfig& cfg, std::uint64_t seed,
                              const std::string& dir);

// One run per config seed under <out_dir>/<label>/seed<N>/. Appends every
// completed run to the index <out_dir>/runs.csv ("label,seed,dir"). jobs > 1
// launches seeds on independent threads (no shared mutable state; files are
// the only communication channel).
RunGroupResult run_training(const RunConfig& cfg, int jobs = 1);

// Scalarized grid over lambdas plus pegrad and pcgrad_plus, each across all
// seeds. Writes <out_dir>/pareto.csv and returns the aggregated points
// (completed seeds only).
std::vector<ParetoPoint> run_sweep(const RunConfig& cfg,
                                   const std::vector<double>& lambdas, int jobs = 1);

// Deterministic-policy (mean action) evaluation of a saved checkpoint on its
// own environment.
EvalSummary evaluate_checkpoint(const std::string& checkpoint_path, int episodes,
                                std::uint64_t eval_seed = 777);
std::string format_summary(const EvalSummary& s);

// Reads a runs index and emits one SVG. Pareto aggregates final evaluation
// points per label; sample/energy draw eval curves over training steps.
void plot_from_index(const std::string& index_path, PlotKind kind,
                     const std::string& out_path);

PlotKind parse_plot_kind(const std::string& name);

}  // namespace morl
