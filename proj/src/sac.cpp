#include "morl/sac.hpp"

#include <cmath>
#include <stdexcept>

namespace morl {

void SacConfig::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
    if (entropy_alpha < 0.0) throw std::invalid_argument("entropy_alpha must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (actor_lr <= 0.0 || critic_lr <= 0.0) throw std::invalid_argument("learning rates must be positive");
    if (actor_update_every < 1 || critic_update_every < 1)
        throw std::invalid_argument("update frequencies must be >= 1");
    if (!(polyak_tau > 0.0 && polyak_tau <= 1.0)) throw std::invalid_argument("polyak_tau must be in (0, 1]");
    if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("hidden layer list must be non-empty");
    if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
}

SacTrainer::SacTrainer(const EnvSpec& env_spec, SacConfig cfg, std::uint64_t seed)
    : env_spec_(env_spec), cfg_(std::move(cfg)), rng_(Rng::derive(seed, 0)),
      replay_(cfg_.replay_capacity) {
    cfg_.validate();
    Rng init(Rng::derive(seed, 1));
    policy_ = SquashedGaussianPolicy(env_spec_.obs_dim, cfg_.hidden, env_spec_.act_dim,
                                     env_spec_.action_low, env_spec_.action_high, init);
    q_task_ = QNetwork(env_spec_.obs_dim, env_spec_.act_dim, cfg_.hidden, init);
    q_energy_ = QNetwork(env_spec_.obs_dim, env_spec_.act_dim, cfg_.hidden, init);
    t_task_ = q_task_;
    t_energy_ = q_energy_;
    if (cfg_.twin_q) {
        q_task2_ = QNetwork(env_spec_.obs_dim, env_spec_.act_dim, cfg_.hidden, init);
        q_energy2_ = QNetwork(env_spec_.obs_dim, env_spec_.act_dim, cfg_.hidden, init);
        t_task2_ = q_task2_;
        t_energy2_ = q_energy2_;
    }
    policy_adam_ = std::make_unique<Adam>(policy_.params().flat_size(), cfg_.actor_lr);
    q_task_adam_ = std::make_unique<Adam>(q_task_.params().flat_size(), cfg_.critic_lr);
    q_energy_adam_ = std::make_unique<Adam>(q_energy_.params().flat_size(), cfg_.critic_lr);
    if (cfg_.twin_q) {
        q_task2_adam_ = std::make_unique<Adam>(q_task2_.params().flat_size(), cfg_.critic_lr);
        q_energy2_adam_ = std::make_unique<Adam>(q_energy2_.params().flat_size(), cfg_.critic_lr);
    }
}

QNetwork& SacTrainer::critic(Channel c, int twin) {
    if (twin == 0) return c == Channel::Task ? q_task_ : q_energy_;
    return c == Channel::Task ? q_task2_ : q_energy2_;
}

QNetwork& SacTrainer::target_critic(Channel c, int twin) {
    if (twin == 0) return c == Channel::Task ? t_task_ : t_energy_;
    return c == Channel::Task ? t_task2_ : t_energy2_;
}

SacBatch SacTrainer::assemble_batch(const ReplayBuffer& buffer,
                                    const std::vector<std::size_t>& indices) const {
    const int b = static_cast<int>(indices.size());
    SacBatch batch;
    batch.states.resize(b, env_spec_.obs_dim);
    batch.actions.resize(b, env_spec_.act_dim);
    batch.next_states.resize(b, env_spec_.obs_dim);
    batch.reward_task.resize(b);
    batch.reward_energy.resize(b);
    batch.terminated.resize(b);
    for (int i = 0; i < b; ++i) {
        const auto& t = buffer.at(indices[static_cast<std::size_t>(i)]);
        for (int j = 0; j < env_spec_.obs_dim; ++j) {
            batch.states(i, j) = t.state[static_cast<std::size_t>(j)];
            batch.next_states(i, j) = t.next_state[static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < env_spec_.act_dim; ++j)
            batch.actions(i, j) = t.action[static_cast<std::size_t>(j)];
        batch.reward_task[i] = t.reward_task;
        batch.reward_energy[i] = t.reward_energy;
        batch.terminated[i] = t.terminated ? 1.0 : 0.0;
    }
    return batch;
}

void SacTrainer::sample_plain(const Mat& states, Mat& actions, Vec& log_probs,
                              Rng& rng) const {
    Mat mu, log_std;
    policy_.dist_plain(states, mu, log_std);
    const int b = static_cast<int>(states.rows());
    const int n = policy_.act_dim();
    actions.resize(b, n);
    log_probs.resize(b);
    for (int i = 0; i < b; ++i) {
        Eigen::RowVectorXd u(n);
        for (int d = 0; d < n; ++d)
            u[d] = mu(i, d) + std::exp(log_std(i, d)) * rng.normal();
        for (int d = 0; d < n; ++d)
            actions(i, d) = policy_.action_bias()[static_cast<std::size_t>(d)] +
                            policy_.action_scale()[static_cast<std::size_t>(d)] * std::tanh(u[d]);
        log_probs[i] = policy_.log_prob_from_presquash(u, mu.row(i), log_std.row(i));
    }
}

Vec SacTrainer::td_target(const SacBatch& batch, Channel channel) {
    Mat next_actions;
    Vec next_log_probs;
    sample_plain(batch.next_states, next_actions, next_log_probs, rng_);

    Mat qt = target_critic(channel, 0).forward_plain(batch.next_states, next_actions);
    if (cfg_.twin_q) {
        Mat qt2 = target_critic(channel, 1).forward_plain(batch.next_states, next_actions);
        qt = qt.cwiseMin(qt2);
    }
    const Vec& r = channel == Channel::Task ? batch.reward_task : batch.reward_energy;
    Vec target(r.size());
    for (int i = 0; i < r.size(); ++i) {
        target[i] = r[i] + cfg_.gamma * (1.0 - batch.terminated[i]) *
                               (qt(i, 0) - cfg_.entropy_alpha * next_log_probs[i]);
        if (!std::isfinite(target[i])) throw std::runtime_error("non-finite TD target");
    }
    return target;
}

double SacTrainer::critic_update_one(QNetwork& online, Adam& adam, const SacBatch& batch,
                                     const Vec& target) const {
    const int b = static_cast<int>(batch.states.rows());
    Tape tape;
    auto bound = bind_params(tape, online.params(), true);
    Tensor s({b, env_spec_.obs_dim},
             std::vector<double>(batch.states.data(), batch.states.data() + batch.states.size()));
    Tensor a({b, env_spec_.act_dim},
             std::vector<double>(batch.actions.data(), batch.actions.data() + batch.actions.size()));
    Tensor q = online.forward(tape, s, a, bound);
    Tensor y({b, 1}, std::vector<double>(target.data(), target.data() + target.size()));
    Tensor loss = mean(square(sub(q, y)));
    const double loss_value = loss.item();
    tape.backward(loss);
    auto grad = collect_grad(tape, bound, online.params());
    auto flat = online.params().flatten();
    adam.step(flat, grad);
    online.params().load_flat(flat);
    return loss_value;
}

double SacTrainer::critic_update(const SacBatch& batch, Channel channel) {
    const Vec target = td_target(batch, channel);
    double loss = critic_update_one(critic(channel, 0),
                                    channel == Channel::Task ? *q_task_adam_ : *q_energy_adam_,
                                    batch, target);
    if (cfg_.twin_q)
        critic_update_one(critic(channel, 1),
                          channel == Channel::Task ? *q_task2_adam_ : *q_energy2_adam_, batch,
                          target);
    return loss;
}

std::pair<double, double> SacTrainer::actor_losses(const SacBatch& batch, GradPair& grads) {
    const int b = static_cast<int>(batch.states.rows());
    const int n = policy_.act_dim();
    // Both losses share the minibatch and the reparameterization noise so
    // g_R and g_E are gradients of the same stochastic estimate.
    std::vector<double> xi = rng_.normal_vec(static_cast<std::size_t>(b) * n);
    std::vector<double> state_data(batch.states.data(), batch.states.data() + batch.states.size());

    auto build = [&](Channel channel, double q_sign) {
        Tape tape;
        auto policy_bound = bind_params(tape, policy_.params(), true);
        Tensor s({b, env_spec_.obs_dim}, state_data);
        auto [mu, log_std] = policy_.forward_dist(tape, s, policy_bound);
        Tensor noise({b, n}, xi);
        auto [action, log_prob] = policy_.sample_with_noise(tape, mu, log_std, noise);
        // Critic parameters enter as constants: no gradient flows into them.
        QNetwork& q_net = critic(channel, 0);
        auto critic_bound = bind_params(tape, q_net.params(), false);
        Tensor q = q_net.forward(tape, s, action, critic_bound);
        if (cfg_.twin_q) {
            QNetwork& q_net2 = critic(channel, 1);
            auto critic_bound2 = bind_params(tape, q_net2.params(), false);
            q = minimum(q, q_net2.forward(tape, s, action, critic_bound2));
        }
        Tensor loss = mean(add(scale(log_prob, cfg_.entropy_alpha), scale(q, q_sign)));
        const double value = loss.item();
        tape.backward(loss);
        return std::pair{value, collect_grad(tape, policy_bound, policy_.params())};
    };

    auto [l_task, g_task] = build(Channel::Task, -1.0);      // L_R = E[a log pi - Q^r]
    auto [l_energy, g_energy] = build(Channel::Energy, 1.0); // L_E = E[a log pi + Q^e]
    grads.g_task = std::move(g_task);
    grads.g_energy = std::move(g_energy);
    return {l_task, l_energy};
}

CombinerOutput SacTrainer::actor_update(const SacBatch& batch) {
    GradPair grads;
    actor_losses(batch, grads);
    CombinerOutput out = combine(grads, cfg_.combiner);
    auto flat = policy_.params().flatten();
    policy_adam_->step(flat, out.direction);
    policy_.params().load_flat(flat);
    return out;
}

void SacTrainer::polyak_step() {
    polyak_update(t_task_.params(), q_task_.params(), cfg_.polyak_tau);
    polyak_update(t_energy_.params(), q_energy_.params(), cfg_.polyak_tau);
    if (cfg_.twin_q) {
        polyak_update(t_task2_.params(), q_task2_.params(), cfg_.polyak_tau);
        polyak_update(t_energy2_.params(), q_energy2_.params(), cfg_.polyak_tau);
    }
}

std::pair<double, double> SacTrainer::evaluate(Env& env, std::uint64_t seed,
                                               int episodes) const {
    double sum_return = 0.0, sum_energy = 0.0;
    Rng unused(0);
    for (int ep = 0; ep < episodes; ++ep) {
        auto obs = env.reset(Rng::derive(seed, static_cast<std::uint64_t>(ep)));
        bool done = false;
        while (!done) {
            auto [action, lp] = policy_.act(obs, unused, /*deterministic=*/true);
            auto res = env.step(action);
            sum_return += res.reward.task;
            sum_energy += res.reward.energy;
            obs = std::move(res.next_obs);
            done = res.terminated || res.truncated;
        }
    }
    return {sum_return / episodes, sum_energy / episodes};
}

MetricsLog SacTrainer::train(Env& env, Env& eval_env, std::uint64_t seed) {
    MetricsLog log;
    std::uint64_t episode_index = 0;
    auto obs = env.reset(Rng::derive(seed, 1000 + episode_index));
    double ep_return = 0.0, ep_energy = 0.0;
    double last_ep_return = 0.0, last_ep_energy = 0.0;
    bool have_episode = false;
    double last_closs_task = 0.0, last_closs_energy = 0.0;
    double last_aloss_task = 0.0, last_aloss_energy = 0.0;
    CombinerOutput last_diag;
    bool have_updates = false;

    const std::uint64_t eval_seed = Rng::derive(seed, 777);

    auto append_eval = [&](std::int64_t step) {
        auto [ret, energy] = evaluate(eval_env, eval_seed, cfg_.eval_episodes);
        // Keep global_step strictly increasing: extend an existing row at
        // this step instead of appending a duplicate.
        if (!log.rows.empty() && log.rows.back().global_step == step) {
            log.rows.back().eval_return_mean = ret;
            log.rows.back().eval_energy_mean = energy;
        } else {
            MetricsRow row;
            row.global_step = step;
            row.eval_return_mean = ret;
            row.eval_energy_mean = energy;
            log.rows.push_back(row);
        }
        log.final_eval_return = ret;
        log.final_eval_energy = energy;
    };

    try {
        for (std::int64_t step = 1; step <= cfg_.total_steps; ++step) {
            std::vector<double> action(static_cast<std::size_t>(env_spec_.act_dim));
            if (step <= cfg_.warmup_steps) {
                for (int d = 0; d < env_spec_.act_dim; ++d)
                    action[static_cast<std::size_t>(d)] =
                        rng_.uniform(env_spec_.action_low[static_cast<std::size_t>(d)],
                                     env_spec_.action_high[static_cast<std::size_t>(d)]);
            } else {
                action = policy_.act(obs, rng_).first;
            }
            auto res = env.step(action);
            ep_return += res.reward.task;
            ep_energy += res.reward.energy;
            replay_.push({obs, action, res.reward.task, res.reward.energy, res.next_obs,
                          res.terminated});
            obs = std::move(res.next_obs);
            if (res.terminated || res.truncated) {
                last_ep_return = ep_return;
                last_ep_energy = ep_energy;
                have_episode = true;
                ep_return = ep_energy = 0.0;
                ++episode_index;
                obs = env.reset(Rng::derive(seed, 1000 + episode_index));
            }

            if (step > cfg_.warmup_steps &&
                replay_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
                if (step % cfg_.critic_update_every == 0) {
                    auto idx = replay_.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_);
                    auto batch = assemble_batch(replay_, idx);
                    last_closs_task = critic_update(batch, Channel::Task);
                    last_closs_energy = critic_update(batch, Channel::Energy);
                    polyak_step();
                    have_updates = true;
                }
                if (step % cfg_.actor_update_every == 0) {
                    auto idx = replay_.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng_);
                    auto batch = assemble_batch(replay_, idx);
                    GradPair grads;
                    auto [lr_task, lr_energy] = actor_losses(batch, grads);
                    last_aloss_task = lr_task;
                    last_aloss_energy = lr_energy;
                    last_diag = combine(grads, cfg_.combiner);
                    auto flat = policy_.params().flatten();
                    policy_adam_->step(flat, last_diag.direction);
                    policy_.params().load_flat(flat);
                }
            }

            if (step % cfg_.log_every == 0) {
                MetricsRow row;
                row.global_step = step;
                if (have_episode) {
                    row.episode_return_task = last_ep_return;
                    row.episode_energy_sum = last_ep_energy;
                }
                if (have_updates) {
                    row.critic_loss_task = last_closs_task;
                    row.critic_loss_energy = last_closs_energy;
                    row.actor_loss_task = last_aloss_task;
                    row.actor_loss_energy = last_aloss_energy;
                    row.beta_scale = last_diag.beta_scale;
                    row.cos_g = last_diag.cos_g;
                    row.norm_g_task = last_diag.norm_g_task;
                    row.norm_g_energy_perp = last_diag.norm_g_energy_perp;
                }
                log.rows.push_back(row);
            }
            if (cfg_.eval_every > 0 && step % cfg_.eval_every == 0) append_eval(step);
        }
        if (cfg_.eval_every <= 0 || cfg_.total_steps % cfg_.eval_every != 0)
            append_eval(cfg_.total_steps);
    } catch (const std::exception& e) {
        log.diverged = true;
        log.abort_reason = e.what();
    }
    return log;
}

}  // namespace morl
