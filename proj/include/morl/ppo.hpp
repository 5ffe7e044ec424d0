#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "morl/combine.hpp"
#include "morl/envs.hpp"
#include "morl/metrics.hpp"
#include "morl/nets.hpp"

namespace morl {

struct PpoConfig {
    double clip_eps = 0.2;
    double gae_lambda = 0.95;
    double gamma = 0.99;
    int rollout_len = 2048;
    int epochs = 10;
    int minibatch_size = 64;
    double entropy_coef = 0.0;
    double lr = 3e-4;
    double lambda = 0.0;  // scalarized trade-off
    CombinerChoice combiner{CombinerKind::Scalarized, 0.0};
    // Per-channel zero-mean/unit-variance normalization of the advantages
    // before scalarization / combination. Disable to expose raw scales.
    bool normalize_advantages = true;
    std::vector<int> hidden{256, 256};
    std::int64_t total_steps = 100000;
    std::int64_t eval_every = 10000;
    int eval_episodes = 50;
    std::int64_t log_every = 2048;

    void validate() const;
};

// On-policy experience record; both reward channels plus per-channel value
// estimates. pre_squash stores the Gaussian sample before tanh so ratios can
// be rebuilt without atanh.
struct RolloutStep {
    std::vector<double> state;
    std::vector<double> action;
    std::vector<double> pre_squash;
    double log_prob_old = 0.0;
    double reward_task = 0.0;
    double reward_energy = 0.0;
    double value_task = 0.0;
    double value_energy = 0.0;
    double next_value_task = 0.0;
    double next_value_energy = 0.0;
    bool terminated = false;
    bool truncated = false;
};

struct RolloutBuffer {
    std::vector<RolloutStep> steps;
    std::vector<double> adv_task, adv_energy;
    std::vector<double> ret_task, ret_energy;
};

// Standard GAE recursion with (1 - terminated) masking; truncated steps
// bootstrap from the stored next-state value and stop the lambda propagation.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const double> next_values,
                        std::span<const std::uint8_t> terminated,
                        std::span<const std::uint8_t> truncated, double gamma,
                        double gae_lambda);

// Elementwise A^r - lambda * A^e.
std::vector<double> scalarized_advantage(std::span<const double> adv_task,
                                         std::span<const double> adv_energy, double lambda);

// -E[min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv)]; gradient flows
// through the ratios only (advantages are constants).
Tensor clipped_surrogate(const Tensor& ratios, const Tensor& advantages, double clip_eps);

struct PpoDiagnostics {
    double loss_task = 0.0;
    double loss_energy = 0.0;
    double beta_scale = 1.0;
    double cos_g = 0.0;
    double norm_g_task = 0.0;
    double norm_g_energy_perp = 0.0;
};

// Multi-objective PPO: per-channel GAE, scalarized-advantage baseline, and
// split clipped surrogates combined in gradient space.
class PpoTrainer {
public:
    PpoTrainer(const EnvSpec& env_spec, PpoConfig cfg, std::uint64_t seed);

    // Computes advantages/returns for a filled buffer (in place).
    void compute_advantages(RolloutBuffer& buffer) const;

    // epochs x minibatch sweep over the buffer; one policy optimizer step per
    // minibatch; value heads regressed to per-channel returns.
    PpoDiagnostics update(RolloutBuffer& buffer);

    MetricsLog train(Env& env, Env& eval_env, std::uint64_t seed);

    std::pair<double, double> evaluate(Env& env, std::uint64_t seed, int episodes) const;

    // One combined policy-gradient direction for a minibatch, without
    // stepping the optimizer (used by equivalence tests).
    CombinerOutput policy_direction(const RolloutBuffer& buffer,
                                    std::span<const std::size_t> indices) const;

    SquashedGaussianPolicy& policy() { return policy_; }
    ValueNetwork& value_task() { return v_task_; }
    ValueNetwork& value_energy() { return v_energy_; }
    Rng& rng() { return rng_; }
    const PpoConfig& config() const { return cfg_; }

private:
    EnvSpec env_spec_;
    PpoConfig cfg_;
    Rng rng_;
    SquashedGaussianPolicy policy_;
    ValueNetwork v_task_, v_energy_;
    std::unique_ptr<Adam> policy_adam_, v_task_adam_, v_energy_adam_;

    struct MinibatchView {
        Tensor states, pre_squash, adv_task, adv_energy, log_prob_old;
        Tensor ret_task, ret_energy;
        int size = 0;
    };
    MinibatchView gather(const RolloutBuffer& buffer,
                         std::span<const std::size_t> indices) const;
    std::vector<double> policy_loss_grad(const MinibatchView& mb, bool energy_channel,
                                         double* loss_out) const;
    void value_update(const MinibatchView& mb);
};

}  // namespace morl
