#include "morl/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace morl::oracle {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double eval_checked(const LossFn& fn, std::span<const double> theta) {
    const double v = fn(theta);
    if (!std::isfinite(v)) throw std::runtime_error("non-finite loss at probe point");
    return v;
}

}  // namespace

std::vector<double> finite_diff(const LossFn& loss_fn, std::span<const double> theta,
                                double eps) {
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = point[i];
        point[i] = orig + eps;
        const double hi = eval_checked(loss_fn, point);
        point[i] = orig - eps;
        const double lo = eval_checked(loss_fn, point);
        point[i] = orig;
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

FiniteDiffReport compare_gradients(std::span<const double> analytic,
                                   std::span<const double> numeric, double eps) {
    if (analytic.size() != numeric.size())
        throw std::invalid_argument("gradient length mismatch");
    FiniteDiffReport report;
    report.epsilon = eps;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-12});
        const double rel = std::abs(analytic[i] - numeric[i]) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.argmax = i;
        }
    }
    return report;
}

std::vector<double> first_order_invariance_probe(const LossFn& loss_fn,
                                                 std::span<const double> theta,
                                                 std::span<const double> unit_direction,
                                                 std::span<const double> etas) {
    if (unit_direction.size() != theta.size())
        throw std::invalid_argument("direction length mismatch");
    if (std::abs(norm2(unit_direction) - 1.0) > 1e-9)
        throw std::invalid_argument("direction must be a unit vector");
    const double base = eval_checked(loss_fn, theta);
    std::vector<double> deltas;
    deltas.reserve(etas.size());
    std::vector<double> point(theta.size());
    for (double eta : etas) {
        for (std::size_t i = 0; i < theta.size(); ++i)
            point[i] = theta[i] - eta * unit_direction[i];
        deltas.push_back(std::abs(eval_checked(loss_fn, point) - base));
    }
    return deltas;
}

std::vector<double> projection_bruteforce(std::span<const double> g_energy,
                                          std::span<const double> g_task,
                                          int grid_resolution) {
    const std::size_t dim = g_task.size();
    if (dim != 2 && dim != 3) throw std::invalid_argument("bruteforce supports dims 2 and 3 only");
    if (g_energy.size() != dim) throw std::invalid_argument("gradient length mismatch");
    if (grid_resolution < 2) throw std::invalid_argument("grid resolution too small");

    std::vector<double> result(g_energy.begin(), g_energy.end());
    const double task_norm = norm2(g_task);
    if (task_norm < 1e-12) return result;  // same degenerate convention as the closed form

    // Orthonormal basis of the hyperplane {v : g_task . v = 0} by
    // Gram-Schmidt against the most independent standard basis vectors.
    std::vector<std::vector<double>> basis;
    for (std::size_t e = 0; e < dim && basis.size() < dim - 1; ++e) {
        std::vector<double> cand(dim, 0.0);
        cand[e] = 1.0;
        const double along = dot(cand, g_task) / (task_norm * task_norm);
        for (std::size_t i = 0; i < dim; ++i) cand[i] -= along * g_task[i];
        for (const auto& b : basis) {
            const double c = dot(cand, b);
            for (std::size_t i = 0; i < dim; ++i) cand[i] -= c * b[i];
        }
        const double n = norm2(cand);
        if (n < 1e-9) continue;
        for (auto& v : cand) v /= n;
        basis.push_back(std::move(cand));
    }
    if (basis.size() != dim - 1) throw std::runtime_error("failed to build hyperplane basis");

    const double radius = std::max(norm2(g_energy), 1e-12);
    const double pitch = 2.0 * radius / grid_resolution;
    auto objective = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = g_energy[i] - v[i];
            s += d * d;
        }
        return s;
    };

    std::vector<double> best(dim, 0.0), cand(dim);
    double best_obj = objective(best);
    if (dim == 2) {
        for (int i = 0; i <= grid_resolution; ++i) {
            const double t = -radius + pitch * i;
            for (std::size_t k = 0; k < dim; ++k) cand[k] = t * basis[0][k];
            const double obj = objective(cand);
            if (obj < best_obj) { best_obj = obj; best = cand; }
        }
    } else {
        for (int i = 0; i <= grid_resolution; ++i) {
            const double t1 = -radius + pitch * i;
            for (int j = 0; j <= grid_resolution; ++j) {
                const double t2 = -radius + pitch * j;
                for (std::size_t k = 0; k < dim; ++k)
                    cand[k] = t1 * basis[0][k] + t2 * basis[1][k];
                const double obj = objective(cand);
                if (obj < best_obj) { best_obj = obj; best = cand; }
            }
        }
    }
    return best;
}

}  // namespace morl::oracle
