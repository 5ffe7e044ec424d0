#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace morl {

// One aggregated point on the trade-off frontier.
struct ParetoPoint {
    std::string run_id;
    std::string combiner_label;
    double mean_final_return = 0.0;
    double mean_final_energy = 0.0;
    std::vector<std::pair<double, double>> per_seed;  // (energy, return)
};

// (lo, hi) percentile band of the mean over seeds via seeded bootstrap
// resampling (1000 resamples by default).
struct BootstrapBand {
    double lo = 0.0;
    double hi = 0.0;
};

BootstrapBand bootstrap_ci(const std::vector<double>& values, std::uint64_t seed,
                           int resamples = 1000, double coverage = 0.95);

// One labelled group of seed curves sampled at shared x positions.
struct CurveGroup {
    std::string label;
    std::vector<double> steps;
    std::vector<std::vector<double>> per_seed;  // per_seed[s][i] aligned with steps
};

enum class PlotKind { Pareto, Sample, Energy };

// Static SVG emission. Curves get a mean line and a 95% bootstrap band when
// at least two seeds are present (raw curves otherwise, with a warning on
// stderr). Pareto scatters per-seed light markers plus solid mean markers.
void write_curve_svg(const std::vector<CurveGroup>& groups, const std::string& y_label,
                     const std::string& path, std::uint64_t bootstrap_seed = 2024);
void write_pareto_svg(const std::vector<ParetoPoint>& points, const std::string& path);

}  // namespace morl
