#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "morl/combine.hpp"
#include "morl/envs.hpp"
#include "morl/metrics.hpp"
#include "morl/nets.hpp"
#include "morl/replay.hpp"

namespace morl {

enum class Channel { Task, Energy };

struct SacConfig {
    double gamma = 0.99;
    double entropy_alpha = 0.2;
    int batch_size = 256;
    double actor_lr = 3e-4;
    double critic_lr = 1e-3;
    int actor_update_every = 2;
    int critic_update_every = 1;
    double polyak_tau = 0.005;
    std::int64_t warmup_steps = 5000;
    std::int64_t total_steps = 100000;
    CombinerChoice combiner{CombinerKind::Scalarized, 0.0};
    std::vector<int> hidden{256, 256};
    std::size_t replay_capacity = 1000000;
    std::int64_t eval_every = 10000;
    int eval_episodes = 50;
    std::int64_t log_every = 1000;
    // Clipped double-Q toggle; off by default (single critic per objective).
    bool twin_q = false;

    void validate() const;
};

// Sampled minibatch view assembled into dense matrices.
struct SacBatch {
    Mat states;       // (b, obs)
    Mat actions;      // (b, act)
    Mat next_states;  // (b, obs)
    Vec reward_task;
    Vec reward_energy;
    Vec terminated;   // 0/1
};

// Multi-objective SAC: one critic pair per reward channel, split actor
// losses, combiner-driven policy updates.
class SacTrainer {
public:
    SacTrainer(const EnvSpec& env_spec, SacConfig cfg, std::uint64_t seed);

    // One Adam step on the given channel's critic(s) against the soft TD
    // target; returns the scalar MSE loss.
    double critic_update(const SacBatch& batch, Channel channel);

    // Both actor losses on the same minibatch with shared reparameterization
    // noise. Fills grads with g_R and g_E; returns (L_R, L_E).
    std::pair<double, double> actor_losses(const SacBatch& batch, GradPair& grads);

    // Two backward passes, combine, one optimizer step.
    CombinerOutput actor_update(const SacBatch& batch);

    void polyak_step();

    // Full off-policy loop. env and eval_env must be independent instances
    // of the same environment.
    MetricsLog train(Env& env, Env& eval_env, std::uint64_t seed);

    // Mean (return, energy) of n deterministic-policy episodes.
    std::pair<double, double> evaluate(Env& env, std::uint64_t seed, int episodes) const;

    SacBatch assemble_batch(const ReplayBuffer& buffer,
                            const std::vector<std::size_t>& indices) const;

    SquashedGaussianPolicy& policy() { return policy_; }
    QNetwork& critic(Channel c, int twin = 0);
    QNetwork& target_critic(Channel c, int twin = 0);
    Adam& policy_optimizer() { return *policy_adam_; }
    ReplayBuffer& replay() { return replay_; }
    Rng& rng() { return rng_; }
    const SacConfig& config() const { return cfg_; }

private:
    EnvSpec env_spec_;
    SacConfig cfg_;
    Rng rng_;

    SquashedGaussianPolicy policy_;
    QNetwork q_task_, q_energy_, q_task2_, q_energy2_;
    QNetwork t_task_, t_energy_, t_task2_, t_energy2_;
    std::unique_ptr<Adam> policy_adam_, q_task_adam_, q_energy_adam_, q_task2_adam_,
        q_energy2_adam_;
    ReplayBuffer replay_;

    // Batched stochastic policy sample on the plain path: actions and
    // log-probs for a batch of states.
    void sample_plain(const Mat& states, Mat& actions, Vec& log_probs, Rng& rng) const;

    double critic_update_one(QNetwork& online, Adam& adam, const SacBatch& batch,
                             const Vec& target) const;
    Vec td_target(const SacBatch& batch, Channel channel);
};

}  // namespace morl
