#pragma once

#include <span>
#include <string>
#include <vector>

namespace morl {

// Pair of flat policy-parameter gradients: task-loss gradient and
// energy-loss gradient.
struct GradPair {
    std::vector<double> g_task;
    std::vector<double> g_energy;
};

// Combined update direction plus diagnostics. beta_scale is the applied norm
// clamp factor min(1, ||g_R|| / ||g_E_perp||) (1 when the projection is zero);
// cos_g is the cosine between the raw gradients.
struct CombinerOutput {
    std::vector<double> direction;
    double beta_scale = 1.0;
    double cos_g = 0.0;
    double norm_g_task = 0.0;
    double norm_g_energy = 0.0;
    double norm_g_energy_perp = 0.0;
};

enum class CombinerKind { Pegrad, PcgradPlus, Scalarized };

struct CombinerChoice {
    CombinerKind kind = CombinerKind::Pegrad;
    double lambda = 0.0;  // Scalarized only
};

std::string combiner_label(const CombinerChoice& choice);
CombinerChoice parse_combiner(const std::string& name, double lambda);

// Component of g_energy orthogonal to g_task:
//   v = g_E - (g_R . g_E) / (g_R . g_R) * g_R
// When ||g_task|| < 1e-12 returns g_energy unchanged (everything is
// orthogonal to the zero vector).
std::vector<double> project_orthogonal(std::span<const double> g_energy,
                                       std::span<const double> g_task);

// Projection with adaptive norm clamp: the projected energy component is
// rescaled so its norm never exceeds ||g_task||; direction = g_task + v.
CombinerOutput pegrad_combine(const GradPair& pair);

// Conditional asymmetric projection: project g_energy only when it conflicts
// with g_task (negative dot product), otherwise sum directly. No norm clamp.
CombinerOutput pcgrad_plus_combine(const GradPair& pair);

// direction = g_task + lambda * g_energy; lambda = 0 is the unconstrained
// single-objective baseline.
CombinerOutput scalarized_combine(const GradPair& pair, double lambda);

CombinerOutput combine(const GradPair& pair, const CombinerChoice& choice);

}  // namespace morl
