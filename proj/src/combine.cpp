#include "morl/combine.hpp"

#include <cmath>
#include <stdexcept>

namespace morl {

namespace {

constexpr double kZeroNormGuard = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void validate_pair(std::span<const double> g_energy, std::span<const double> g_task) {
    if (g_energy.size() != g_task.size())
        throw std::invalid_argument("gradient length mismatch");
    for (double v : g_energy)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite energy gradient");
    for (double v : g_task)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite task gradient");
}

CombinerOutput make_output(const GradPair& pair) {
    CombinerOutput out;
    out.norm_g_task = norm2(pair.g_task);
    out.norm_g_energy = norm2(pair.g_energy);
    const double denom = out.norm_g_task * out.norm_g_energy;
    out.cos_g = denom > 0.0 ? dot(pair.g_task, pair.g_energy) / denom : 0.0;
    return out;
}

}  // namespace

std::string combiner_label(const CombinerChoice& choice) {
    switch (choice.kind) {
        case CombinerKind::Pegrad: return "pegrad";
        case CombinerKind::PcgradPlus: return "pcgrad_plus";
        case CombinerKind::Scalarized: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "scalarized(%g)", choice.lambda);
            return buf;
        }
    }
    return "unknown";
}

CombinerChoice parse_combiner(const std::string& name, double lambda) {
    if (name == "pegrad") return {CombinerKind::Pegrad, 0.0};
    if (name == "pcgrad_plus") return {CombinerKind::PcgradPlus, 0.0};
    if (name == "scalarized") {
        if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
        return {CombinerKind::Scalarized, lambda};
    }
    throw std::invalid_argument("unknown combiner: " + name);
}

std::vector<double> project_orthogonal(std::span<const double> g_energy,
                                       std::span<const double> g_task) {
    validate_pair(g_energy, g_task);
    std::vector<double> v(g_energy.begin(), g_energy.end());
    const double task_sq = dot(g_task, g_task);
    if (std::sqrt(task_sq) < kZeroNormGuard) return v;
    const double coeff = dot(g_task, g_energy) / task_sq;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= coeff * g_task[i];
    return v;
}

CombinerOutput pegrad_combine(const GradPair& pair) {
    CombinerOutput out = make_output(pair);
    std::vector<double> v = project_orthogonal(pair.g_energy, pair.g_task);
    const double v_norm = norm2(v);
    out.beta_scale = v_norm > 0.0 ? std::min(1.0, out.norm_g_task / v_norm) : 1.0;
    if (v_norm > out.norm_g_task) {
        const double s = out.norm_g_task / v_norm;
        for (auto& x : v) x *= s;
    }
    out.norm_g_energy_perp = norm2(v);
    out.direction = pair.g_task;
    for (std::size_t i = 0; i < v.size(); ++i) out.direction[i] += v[i];
    return out;
}

CombinerOutput pcgrad_plus_combine(const GradPair& pair) {
    CombinerOutput out = make_output(pair);
    if (dot(pair.g_task, pair.g_energy) < 0.0) {
        std::vector<double> v = project_orthogonal(pair.g_energy, pair.g_task);
        out.norm_g_energy_perp = norm2(v);
        out.direction = pair.g_task;
        for (std::size_t i = 0; i < v.size(); ++i) out.direction[i] += v[i];
    } else {
        out.norm_g_energy_perp = out.norm_g_energy;
        out.direction = pair.g_task;
        for (std::size_t i = 0; i < out.direction.size(); ++i)
            out.direction[i] += pair.g_energy[i];
    }
    return out;
}

CombinerOutput scalarized_combine(const GradPair& pair, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    validate_pair(pair.g_energy, pair.g_task);
    CombinerOutput out = make_output(pair);
    out.direction = pair.g_task;
    for (std::size_t i = 0; i < out.direction.size(); ++i)
        out.direction[i] += lambda * pair.g_energy[i];
    return out;
}

CombinerOutput combine(const GradPair& pair, const CombinerChoice& choice) {
    switch (choice.kind) {
        case CombinerKind::Pegrad: return pegrad_combine(pair);
        case CombinerKind::PcgradPlus: return pcgrad_plus_combine(pair);
        case CombinerKind::Scalarized: return scalarized_combine(pair, choice.lambda);
    }
    throw std::logic_error("unreachable");
}

}  // namespace morl
