#include "morl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace morl {

void PpoConfig::validate() const {
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("clip_eps must be in (0, 1)");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
        throw std::invalid_argument("gae_lambda must be in [0, 1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
    if (rollout_len < 1 || epochs < 1 || minibatch_size < 1)
        throw std::invalid_argument("rollout/epoch/minibatch sizes must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    if (hidden.empty()) throw std::invalid_argument("hidden layer list must be non-empty");
    if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be >= 1");
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        std::span<const double> next_values,
                        std::span<const std::uint8_t> terminated,
                        std::span<const std::uint8_t> truncated, double gamma,
                        double gae_lambda) {
    const std::size_t n = rewards.size();
    if (values.size() != n || next_values.size() != n || terminated.size() != n ||
        truncated.size() != n)
        throw std::invalid_argument("gae input length mismatch");
    std::vector<double> adv(n, 0.0);
    double carry = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double not_term = terminated[i] ? 0.0 : 1.0;
        const double delta = rewards[i] + gamma * not_term * next_values[i] - values[i];
        const double stop = (terminated[i] || truncated[i]) ? 0.0 : 1.0;
        carry = delta + gamma * gae_lambda * stop * carry;
        adv[i] = carry;
    }
    return adv;
}

std::vector<double> scalarized_advantage(std::span<const double> adv_task,
                                         std::span<const double> adv_energy, double lambda) {
    if (adv_task.size() != adv_energy.size())
        throw std::invalid_argument("advantage length mismatch");
    std::vector<double> out(adv_task.begin(), adv_task.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lambda * adv_energy[i];
    return out;
}

Tensor clipped_surrogate(const Tensor& ratios, const Tensor& advantages, double clip_eps) {
    for (double r : ratios.data())
        if (!(r > 0.0) || !std::isfinite(r)) throw std::runtime_error("non-positive or non-finite ratio");
    Tensor unclipped = mul(ratios, advantages);
    Tensor clipped = mul(clamp(ratios, 1.0 - clip_eps, 1.0 + clip_eps), advantages);
    return scale(mean(minimum(unclipped, clipped)), -1.0);
}

// ---------------------------------------------------------------------------

PpoTrainer::PpoTrainer(const EnvSpec& env_spec, PpoConfig cfg, std::uint64_t seed)
    : env_spec_(env_spec), cfg_(std::move(cfg)), rng_(Rng::derive(seed, 0)) {
    cfg_.validate();
    Rng init(Rng::derive(seed, 1));
    policy_ = SquashedGaussianPolicy(env_spec_.obs_dim, cfg_.hidden, env_spec_.act_dim,
                                     env_spec_.action_low, env_spec_.action_high, init);
    // Two separate value heads, no shared trunk.
    v_task_ = ValueNetwork(env_spec_.obs_dim, cfg_.hidden, init);
    v_energy_ = ValueNetwork(env_spec_.obs_dim, cfg_.hidden, init);
    policy_adam_ = std::make_unique<Adam>(policy_.params().flat_size(), cfg_.lr);
    v_task_adam_ = std::make_unique<Adam>(v_task_.params().flat_size(), cfg_.lr);
    v_energy_adam_ = std::make_unique<Adam>(v_energy_.params().flat_size(), cfg_.lr);
}

namespace {

void normalize_in_place(std::vector<double>& v) {
    if (v.empty()) return;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size())) + 1e-8;
    for (auto& x : v) x = (x - mean) / sd;
}

}  // namespace

void PpoTrainer::compute_advantages(RolloutBuffer& buffer) const {
    const std::size_t n = buffer.steps.size();
    std::vector<double> r_task(n), r_energy(n), v_task(n), v_energy(n), nv_task(n), nv_energy(n);
    std::vector<std::uint8_t> term(n), trunc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = buffer.steps[i];
        r_task[i] = s.reward_task;
        r_energy[i] = s.reward_energy;
        v_task[i] = s.value_task;
        v_energy[i] = s.value_energy;
        nv_task[i] = s.next_value_task;
        nv_energy[i] = s.next_value_energy;
        term[i] = s.terminated ? 1 : 0;
        trunc[i] = s.truncated ? 1 : 0;
    }
    buffer.adv_task = gae(r_task, v_task, nv_task, term, trunc, cfg_.gamma, cfg_.gae_lambda);
    buffer.adv_energy = gae(r_energy, v_energy, nv_energy, term, trunc, cfg_.gamma, cfg_.gae_lambda);
    buffer.ret_task.resize(n);
    buffer.ret_energy.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        buffer.ret_task[i] = buffer.adv_task[i] + v_task[i];
        buffer.ret_energy[i] = buffer.adv_energy[i] + v_energy[i];
    }
    if (cfg_.normalize_advantages) {
        normalize_in_place(buffer.adv_task);
        normalize_in_place(buffer.adv_energy);
    }
}

PpoTrainer::MinibatchView PpoTrainer::gather(const RolloutBuffer& buffer,
                                             std::span<const std::size_t> indices) const {
    const int b = static_cast<int>(indices.size());
    const int od = env_spec_.obs_dim, ad = env_spec_.act_dim;
    std::vector<double> states(static_cast<std::size_t>(b) * od);
    std::vector<double> pre(static_cast<std::size_t>(b) * ad);
    std::vector<double> at(static_cast<std::size_t>(b)), ae(static_cast<std::size_t>(b));
    std::vector<double> lpo(static_cast<std::size_t>(b));
    std::vector<double> rt(static_cast<std::size_t>(b)), re(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
        const std::size_t k = indices[static_cast<std::size_t>(i)];
        const auto& s = buffer.steps[k];
        std::copy(s.state.begin(), s.state.end(), states.begin() + static_cast<std::ptrdiff_t>(i) * od);
        std::copy(s.pre_squash.begin(), s.pre_squash.end(), pre.begin() + static_cast<std::ptrdiff_t>(i) * ad);
        at[static_cast<std::size_t>(i)] = buffer.adv_task[k];
        ae[static_cast<std::size_t>(i)] = buffer.adv_energy[k];
        lpo[static_cast<std::size_t>(i)] = s.log_prob_old;
        rt[static_cast<std::size_t>(i)] = buffer.ret_task[k];
        re[static_cast<std::size_t>(i)] = buffer.ret_energy[k];
    }
    MinibatchView mb;
    mb.size = b;
    mb.states = Tensor({b, od}, std::move(states));
    mb.pre_squash = Tensor({b, ad}, std::move(pre));
    mb.adv_task = Tensor({b, 1}, std::move(at));
    mb.adv_energy = Tensor({b, 1}, std::move(ae));
    mb.log_prob_old = Tensor({b, 1}, std::move(lpo));
    mb.ret_task = Tensor({b, 1}, std::move(rt));
    mb.ret_energy = Tensor({b, 1}, std::move(re));
    return mb;
}

std::vector<double> PpoTrainer::policy_loss_grad(const MinibatchView& mb, bool energy_channel,
                                                 double* loss_out) const {
    Tape tape;
    auto bound = bind_params(tape, policy_.params(), true);
    auto [mu, log_std] = policy_.forward_dist(tape, mb.states, bound);
    Tensor log_prob = policy_.log_prob_of_presquash(tape, mb.pre_squash, mu, log_std);
    Tensor ratios = exp(sub(log_prob, mb.log_prob_old));
    Tensor adv = energy_channel ? scale(mb.adv_energy, -1.0) : mb.adv_task;
    Tensor loss = clipped_surrogate(ratios, adv, cfg_.clip_eps);
    // Exploration pressure goes on the prioritized objective only.
    if (!energy_channel && cfg_.entropy_coef != 0.0)
        loss = sub(loss, scale(mean(policy_.presquash_entropy(log_std)), cfg_.entropy_coef));
    if (loss_out) *loss_out = loss.item();
    tape.backward(loss);
    return collect_grad(tape, bound, policy_.params());
}

CombinerOutput PpoTrainer::policy_direction(const RolloutBuffer& buffer,
                                            std::span<const std::size_t> indices) const {
    MinibatchView mb = gather(buffer, indices);
    if (cfg_.combiner.kind == CombinerKind::Scalarized) {
        // Single surrogate on the scalarized advantage.
        Tape tape;
        auto bound = bind_params(tape, policy_.params(), true);
        auto [mu, log_std] = policy_.forward_dist(tape, mb.states, bound);
        Tensor log_prob = policy_.log_prob_of_presquash(tape, mb.pre_squash, mu, log_std);
        Tensor ratios = exp(sub(log_prob, mb.log_prob_old));
        auto adv_total = scalarized_advantage(mb.adv_task.data(), mb.adv_energy.data(),
                                              cfg_.combiner.lambda);
        Tensor adv({mb.size, 1}, std::move(adv_total));
        Tensor loss = clipped_surrogate(ratios, adv, cfg_.clip_eps);
        if (cfg_.entropy_coef != 0.0)
            loss = sub(loss, scale(mean(policy_.presquash_entropy(log_std)), cfg_.entropy_coef));
        CombinerOutput out;
        tape.backward(loss);
        out.direction = collect_grad(tape, bound, policy_.params());
        return out;
    }
    GradPair grads;
    double l_task = 0.0, l_energy = 0.0;
    grads.g_task = policy_loss_grad(mb, false, &l_task);
    grads.g_energy = policy_loss_grad(mb, true, &l_energy);
    return combine(grads, cfg_.combiner);
}

void PpoTrainer::value_update(const MinibatchView& mb) {
    auto fit = [&](ValueNetwork& net, Adam& adam, const Tensor& target) {
        Tape tape;
        auto bound = bind_params(tape, net.params(), true);
        Tensor v = net.forward(tape, mb.states, bound);
        Tensor loss = mean(square(sub(v, target)));
        tape.backward(loss);
        auto grad = collect_grad(tape, bound, net.params());
        auto flat = net.params().flatten();
        adam.step(flat, grad);
        net.params().load_flat(flat);
    };
    fit(v_task_, *v_task_adam_, mb.ret_task);
    fit(v_energy_, *v_energy_adam_, mb.ret_energy);
}

PpoDiagnostics PpoTrainer::update(RolloutBuffer& buffer) {
    const std::size_t n = buffer.steps.size();
    if (buffer.adv_task.size() != n) compute_advantages(buffer);
    PpoDiagnostics diag;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        // Fisher-Yates with the trainer RNG keeps the sweep deterministic.
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = rng_.index(i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg_.minibatch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg_.minibatch_size));
            std::span<const std::size_t> idx(order.data() + start, end - start);
            MinibatchView mb = gather(buffer, idx);
            if (cfg_.combiner.kind == CombinerKind::Scalarized) {
                Tape tape;
                auto bound = bind_params(tape, policy_.params(), true);
                auto [mu, log_std] = policy_.forward_dist(tape, mb.states, bound);
                Tensor log_prob = policy_.log_prob_of_presquash(tape, mb.pre_squash, mu, log_std);
                Tensor ratios = exp(sub(log_prob, mb.log_prob_old));
                auto adv_total = scalarized_advantage(mb.adv_task.data(), mb.adv_energy.data(),
                                                      cfg_.combiner.lambda);
                Tensor adv({mb.size, 1}, std::move(adv_total));
                Tensor loss = clipped_surrogate(ratios, adv, cfg_.clip_eps);
                if (cfg_.entropy_coef != 0.0)
                    loss = sub(loss, scale(mean(policy_.presquash_entropy(log_std)), cfg_.entropy_coef));
                diag.loss_task = loss.item();
                diag.loss_energy = 0.0;
                tape.backward(loss);
                auto grad = collect_grad(tape, bound, policy_.params());
                auto flat = policy_.params().flatten();
                policy_adam_->step(flat, grad);
                policy_.params().load_flat(flat);
            } else {
                GradPair grads;
                grads.g_task = policy_loss_grad(mb, false, &diag.loss_task);
                grads.g_energy = policy_loss_grad(mb, true, &diag.loss_energy);
                CombinerOutput out = combine(grads, cfg_.combiner);
                diag.beta_scale = out.beta_scale;
                diag.cos_g = out.cos_g;
                diag.norm_g_task = out.norm_g_task;
                diag.norm_g_energy_perp = out.norm_g_energy_perp;
                auto flat = policy_.params().flatten();
                policy_adam_->step(flat, out.direction);
                policy_.params().load_flat(flat);
            }
            value_update(mb);
        }
    }
    return diag;
}

std::pair<double, double> PpoTrainer::evaluate(Env& env, std::uint64_t seed,
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

MetricsLog PpoTrainer::train(Env& env, Env& eval_env, std::uint64_t seed) {
    MetricsLog log;
    std::uint64_t episode_index = 0;
    auto obs = env.reset(Rng::derive(seed, 1000 + episode_index));
    double ep_return = 0.0, ep_energy = 0.0;
    double last_ep_return = 0.0, last_ep_energy = 0.0;
    bool have_episode = false;
    const std::uint64_t eval_seed = Rng::derive(seed, 777);
    std::int64_t step = 0;
    std::int64_t next_eval = cfg_.eval_every;

    std::int64_t last_eval_step = -1;
    auto append_eval = [&](std::int64_t at_step) {
        if (at_step == last_eval_step) return;
        last_eval_step = at_step;
        auto [ret, energy] = evaluate(eval_env, eval_seed, cfg_.eval_episodes);
        // Keep global_step strictly increasing: extend an existing row at
        // this step instead of appending a duplicate.
        if (!log.rows.empty() && log.rows.back().global_step == at_step) {
            log.rows.back().eval_return_mean = ret;
            log.rows.back().eval_energy_mean = energy;
        } else {
            MetricsRow row;
            row.global_step = at_step;
            row.eval_return_mean = ret;
            row.eval_energy_mean = energy;
            log.rows.push_back(row);
        }
        log.final_eval_return = ret;
        log.final_eval_energy = energy;
    };

    try {
        while (step < cfg_.total_steps) {
            RolloutBuffer buffer;
            buffer.steps.reserve(static_cast<std::size_t>(cfg_.rollout_len));
            std::vector<double> next_obs_flat;
            for (int i = 0; i < cfg_.rollout_len; ++i) {
                auto sample = policy_.sample_full(obs, rng_);
                auto res = env.step(sample.action);
                ep_return += res.reward.task;
                ep_energy += res.reward.energy;
                RolloutStep s;
                s.state = obs;
                s.action = std::move(sample.action);
                s.pre_squash = std::move(sample.pre_squash);
                s.log_prob_old = sample.log_prob;
                s.reward_task = res.reward.task;
                s.reward_energy = res.reward.energy;
                s.terminated = res.terminated;
                s.truncated = res.truncated;
                next_obs_flat.insert(next_obs_flat.end(), res.next_obs.begin(), res.next_obs.end());
                buffer.steps.push_back(std::move(s));
                obs = std::move(res.next_obs);
                ++step;
                if (buffer.steps.back().terminated || buffer.steps.back().truncated) {
                    last_ep_return = ep_return;
                    last_ep_energy = ep_energy;
                    have_episode = true;
                    ep_return = ep_energy = 0.0;
                    ++episode_index;
                    obs = env.reset(Rng::derive(seed, 1000 + episode_index));
                }
            }
            // Per-channel value estimates for states and next states, under
            // the pre-update parameters.
            const std::size_t n = buffer.steps.size();
            Mat states(static_cast<int>(n), env_spec_.obs_dim);
            Mat next_states(static_cast<int>(n), env_spec_.obs_dim);
            for (std::size_t i = 0; i < n; ++i)
                for (int j = 0; j < env_spec_.obs_dim; ++j) {
                    states(static_cast<int>(i), j) = buffer.steps[i].state[static_cast<std::size_t>(j)];
                    next_states(static_cast<int>(i), j) =
                        next_obs_flat[i * static_cast<std::size_t>(env_spec_.obs_dim) + static_cast<std::size_t>(j)];
                }
            Mat vt = v_task_.forward_plain(states);
            Mat ve = v_energy_.forward_plain(states);
            Mat nvt = v_task_.forward_plain(next_states);
            Mat nve = v_energy_.forward_plain(next_states);
            for (std::size_t i = 0; i < n; ++i) {
                buffer.steps[i].value_task = vt(static_cast<int>(i), 0);
                buffer.steps[i].value_energy = ve(static_cast<int>(i), 0);
                buffer.steps[i].next_value_task = nvt(static_cast<int>(i), 0);
                buffer.steps[i].next_value_energy = nve(static_cast<int>(i), 0);
            }
            compute_advantages(buffer);
            PpoDiagnostics diag = update(buffer);

            MetricsRow row;
            row.global_step = step;
            if (have_episode) {
                row.episode_return_task = last_ep_return;
                row.episode_energy_sum = last_ep_energy;
            }
            row.actor_loss_task = diag.loss_task;
            row.actor_loss_energy = diag.loss_energy;
            row.beta_scale = diag.beta_scale;
            row.cos_g = diag.cos_g;
            row.norm_g_task = diag.norm_g_task;
            row.norm_g_energy_perp = diag.norm_g_energy_perp;
            log.rows.push_back(row);
            if (cfg_.eval_every > 0 && step >= next_eval) {
                append_eval(step);
                next_eval += cfg_.eval_every;
            }
        }
        append_eval(step);
    } catch (const std::exception& e) {
        log.diverged = true;
        log.abort_reason = e.what();
    }
    return log;
}

}  // namespace morl
