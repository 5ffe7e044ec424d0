#pragma once

#include <functional>
#include <span>
#include <vector>

namespace morl::oracle {

// Verdict of an elementwise gradient comparison.
// Relative error is |a - b| / max(|a|, |b|, 1e-12).
struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::size_t argmax = 0;
    double epsilon = 0.0;
};

using LossFn = std::function<double(std::span<const double>)>;

// Central finite differences per coordinate:
//   (L(theta + eps e_i) - L(theta - eps e_i)) / (2 eps)
// loss_fn must be deterministic (any sampling noise frozen by the caller).
std::vector<double> finite_diff(const LossFn& loss_fn, std::span<const double> theta,
                                double eps = 1e-5);

FiniteDiffReport compare_gradients(std::span<const double> analytic,
                                   std::span<const double> numeric, double eps);

// |L(theta - eta u) - L(theta)| for each eta. Along a direction orthogonal
// to the gradient the change is second order: halving eta quarters it.
std::vector<double> first_order_invariance_probe(const LossFn& loss_fn,
                                                 std::span<const double> theta,
                                                 std::span<const double> unit_direction,
                                                 std::span<const double> etas);

// Dense grid search for argmin_v ||g_energy - v|| subject to g_task . v = 0.
// Dimensions 2 and 3 only; accuracy equals the grid pitch. Validates the
// closed-form projection independently.
std::vector<double> projection_bruteforce(std::span<const double> g_energy,
                                          std::span<const double> g_task,
                                          int grid_resolution = 2000);

}  // namespace morl::oracle
