#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "morl/envs.hpp"
#include "morl/oracle.hpp"
#include "morl/replay.hpp"
#include "morl/rng.hpp"
#include "morl/sac.hpp"

using namespace morl;

namespace {

SacConfig small_config() {
    SacConfig cfg;
    cfg.hidden = {16, 16};
    cfg.batch_size = 32;
    cfg.warmup_steps = 100;
    cfg.total_steps = 600;
    cfg.eval_every = 300;
    cfg.eval_episodes = 2;
    cfg.log_every = 100;
    cfg.replay_capacity = 10000;
    return cfg;
}

void fill_buffer(SacTrainer& trainer, Env& env, int n, std::uint64_t seed) {
    Rng rng(seed);
    auto obs = env.reset(seed);
    for (int i = 0; i < n; ++i) {
        std::vector<double> action(static_cast<std::size_t>(env.spec().act_dim));
        for (auto& a : action) a = rng.uniform(-1.0, 1.0);
        auto res = env.step(action);
        trainer.replay().push(
            {obs, action, res.reward.task, res.reward.energy, res.next_obs, res.terminated});
        obs = res.terminated || res.truncated ? env.reset(seed + static_cast<std::uint64_t>(i))
                                              : res.next_obs;
    }
}

}  // namespace

TEST_CASE("replay ring buffer overwrites oldest entries at capacity") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) {
        Transition t;
        t.reward_task = i;
        buf.push(std::move(t));
    }
    CHECK(buf.size() == 3);
    // Entries 3, 4 replaced slots 0, 1.
    CHECK(buf.at(0).reward_task == 3.0);
    CHECK(buf.at(1).reward_task == 4.0);
    CHECK(buf.at(2).reward_task == 2.0);
}

TEST_CASE("replay sampling is uniform (chi-square over a filled buffer)") {
    const std::size_t n = 100;
    ReplayBuffer buf(n);
    for (std::size_t i = 0; i < n; ++i) buf.push({});
    Rng rng(2024);
    std::vector<std::int64_t> counts(n, 0);
    const std::int64_t draws = 1000000;
    for (std::int64_t d = 0; d < draws; d += static_cast<std::int64_t>(n))
        for (std::size_t i : buf.sample_indices(n, rng)) ++counts[i];
    const double expected = static_cast<double>(draws) / static_cast<double>(n);
    double chi2 = 0.0;
    for (auto c : counts) {
        const double diff = static_cast<double>(c) - expected;
        chi2 += diff * diff / expected;
    }
    // dof = 99; chi-square critical value at p = 0.001 is 148.23. A uniform
    // sampler exceeds it with probability 0.1%.
    CHECK(chi2 < 148.23);
    // Non-degenerate: also not suspiciously concentrated.
    CHECK(chi2 > 40.0);
    CHECK_THROWS(buf.sample_indices(n + 1, rng));
}

TEST_CASE("sampling before the batch is available is rejected") {
    ReplayBuffer buf(10);
    buf.push({});
    Rng rng(1);
    CHECK_THROWS(buf.sample_indices(2, rng));
}

TEST_CASE("terminated transitions use the reward alone as critic target") {
    ChainMdp3Env env;
    SacTrainer trainer(env.spec(), small_config(), 3);
    fill_buffer(trainer, env, 200, 4);

    // Build a batch of artificially terminated transitions: the TD target
    // reduces to r, so a critic driven to that target has loss close to the
    // batch variance of r around Q. One update must move the loss toward it.
    SacBatch batch = trainer.assemble_batch(
        trainer.replay(), trainer.replay().sample_indices(32, trainer.rng()));
    batch.terminated.setOnes();
    const double loss1 = trainer.critic_update(batch, Channel::Task);
    double loss_latest = loss1;
    for (int i = 0; i < 200; ++i) loss_latest = trainer.critic_update(batch, Channel::Task);
    CHECK(loss_latest < loss1);
    CHECK(loss_latest < 0.05);  // regressing a fixed finite target
}

TEST_CASE("actor losses share noise: zero critics make g_R equal g_E") {
    ChainMdp3Env env;
    SacTrainer trainer(env.spec(), small_config(), 7);
    fill_buffer(trainer, env, 100, 8);

    for (Channel c : {Channel::Task, Channel::Energy}) {
        auto flat = trainer.critic(c).params().flatten();
        std::fill(flat.begin(), flat.end(), 0.0);
        trainer.critic(c).params().load_flat(flat);
    }
    SacBatch batch = trainer.assemble_batch(
        trainer.replay(), trainer.replay().sample_indices(32, trainer.rng()));
    GradPair grads;
    auto [l_r, l_e] = trainer.actor_losses(batch, grads);
    // With Q == 0 both losses collapse to the entropy term E[alpha log pi].
    CHECK(l_r == doctest::Approx(l_e).epsilon(1e-12));
    REQUIRE(grads.g_task.size() == grads.g_energy.size());
    for (std::size_t i = 0; i < grads.g_task.size(); ++i)
        CHECK(grads.g_task[i] == doctest::Approx(grads.g_energy[i]).epsilon(1e-10));
}

TEST_CASE("actor gradients match finite differences with frozen noise") {
    ChainMdp3Env env;
    SacConfig cfg = small_config();
    cfg.hidden = {8};
    SacTrainer trainer(env.spec(), cfg, 11);
    fill_buffer(trainer, env, 100, 12);
    SacBatch batch = trainer.assemble_batch(
        trainer.replay(), trainer.replay().sample_indices(16, trainer.rng()));

    // actor_losses derives its reparameterization noise from the trainer rng;
    // freeze it by reconstructing the trainer state for every probe through a
    // parameter save/restore around a deterministic call sequence.
    auto theta0 = trainer.policy().params().flatten();
    GradPair grads;
    // Capture the noise indirectly: evaluate twice at theta0 and confirm the
    // loss pair is deterministic per rng state only. We instead use the
    // public seam: identical trainers with identical seeds produce identical
    // losses, so finite differences are run on a twin trainer sequence.
    auto loss_pair_at = [&](std::span<const double> theta, int which) {
        SacTrainer twin(env.spec(), cfg, 11);
        fill_buffer(twin, env, 100, 12);
        SacBatch b = twin.assemble_batch(twin.replay(),
                                         twin.replay().sample_indices(16, twin.rng()));
        twin.policy().params().load_flat(theta);
        GradPair g;
        auto [lr, le] = twin.actor_losses(b, g);
        return which == 0 ? lr : le;
    };
    {
        SacTrainer twin(env.spec(), cfg, 11);
        fill_buffer(twin, env, 100, 12);
        SacBatch b = twin.assemble_batch(twin.replay(),
                                         twin.replay().sample_indices(16, twin.rng()));
        auto [lr, le] = twin.actor_losses(b, grads);
        (void)lr;
        (void)le;
    }
    auto num_r = oracle::finite_diff(
        [&](std::span<const double> t) { return loss_pair_at(t, 0); }, theta0);
    auto num_e = oracle::finite_diff(
        [&](std::span<const double> t) { return loss_pair_at(t, 1); }, theta0);
    auto rep_r = oracle::compare_gradients(grads.g_task, num_r, 1e-5);
    auto rep_e = oracle::compare_gradients(grads.g_energy, num_e, 1e-5);
    CHECK(rep_r.max_rel_error <= 1e-5);
    CHECK(rep_e.max_rel_error <= 1e-5);

    // cos_g diagnostic against the finite-difference gradients.
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    const double cos_fd = dot(num_r, num_e) /
                          (std::sqrt(dot(num_r, num_r)) * std::sqrt(dot(num_e, num_e)));
    CombinerOutput out = combine(grads, {CombinerKind::Pegrad, 0.0});
    CHECK(out.cos_g == doctest::Approx(cos_fd).epsilon(1e-3));
}

TEST_CASE("actor update never touches critics and vice versa") {
    ChainMdp3Env env;
    SacTrainer trainer(env.spec(), small_config(), 13);
    fill_buffer(trainer, env, 100, 14);
    SacBatch batch = trainer.assemble_batch(
        trainer.replay(), trainer.replay().sample_indices(32, trainer.rng()));

    auto critic_before = trainer.critic(Channel::Task).params().flatten();
    auto critic_e_before = trainer.critic(Channel::Energy).params().flatten();
    trainer.actor_update(batch);
    CHECK(trainer.critic(Channel::Task).params().flatten() == critic_before);
    CHECK(trainer.critic(Channel::Energy).params().flatten() == critic_e_before);

    auto policy_before = trainer.policy().params().flatten();
    trainer.critic_update(batch, Channel::Task);
    trainer.critic_update(batch, Channel::Energy);
    CHECK(trainer.policy().params().flatten() == policy_before);
}

TEST_CASE("scalarized lambda-zero actor step is bitwise single-objective") {
    ChainMdp3Env env;
    SacConfig base_cfg = small_config();
    base_cfg.combiner = {CombinerKind::Scalarized, 0.0};
    SacTrainer trainer(env.spec(), base_cfg, 17);
    fill_buffer(trainer, env, 100, 18);
    SacBatch batch = trainer.assemble_batch(
        trainer.replay(), trainer.replay().sample_indices(32, trainer.rng()));

    // Reference: direct Adam step on g_R alone, replicated structurally.
    SacTrainer ref(env.spec(), base_cfg, 17);
    fill_buffer(ref, env, 100, 18);
    SacBatch ref_batch = ref.assemble_batch(
        ref.replay(), ref.replay().sample_indices(32, ref.rng()));
    GradPair g;
    ref.actor_losses(ref_batch, g);
    auto flat = ref.policy().params().flatten();
    ref.policy_optimizer().step(flat, g.g_task);  // single-objective update

    trainer.actor_update(batch);
    auto updated = trainer.policy().params().flatten();
    REQUIRE(updated.size() == flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) CHECK(updated[i] == flat[i]);
}

TEST_CASE("pegrad with zero energy gradient reproduces the lambda-zero step") {
    GradPair g{{0.5, -1.5, 2.0}, {0.0, 0.0, 0.0}};
    auto pegrad_dir = combine(g, {CombinerKind::Pegrad, 0.0}).direction;
    auto base_dir = combine(g, {CombinerKind::Scalarized, 0.0}).direction;
    CHECK(pegrad_dir == base_dir);
}

TEST_CASE("raising stored energies raises the energy critic's targets") {
    // Monotonicity smoke on the chain MDP: the energy channel's TD targets
    // are strictly increasing in the stored reward_energy values.
    ChainMdp3Env env;
    SacTrainer trainer(env.spec(), small_config(), 23);
    fill_buffer(trainer, env, 200, 24);
    SacBatch batch = trainer.assemble_batch(
        trainer.replay(), trainer.replay().sample_indices(32, trainer.rng()));

    const double loss_before = trainer.critic_update(batch, Channel::Energy);
    for (int i = 0; i < 300; ++i) trainer.critic_update(batch, Channel::Energy);
    (void)loss_before;
    Mat q_small = trainer.critic(Channel::Energy).forward_plain(batch.states, batch.actions);

    SacTrainer bigger(env.spec(), small_config(), 23);
    fill_buffer(bigger, env, 200, 24);
    SacBatch batch2 = bigger.assemble_batch(
        bigger.replay(), bigger.replay().sample_indices(32, bigger.rng()));
    batch2.reward_energy.array() += 2.0;
    for (int i = 0; i < 301; ++i) bigger.critic_update(batch2, Channel::Energy);
    Mat q_big = bigger.critic(Channel::Energy).forward_plain(batch2.states, batch2.actions);

    CHECK(q_big.mean() > q_small.mean() + 1.0);
}

TEST_CASE("training is deterministic and runs the documented phases") {
    ChainMdp3Env env, eval_env;
    SacConfig cfg = small_config();
    cfg.combiner = {CombinerKind::Pegrad, 0.0};
    SacTrainer t1(env.spec(), cfg, 31);
    MetricsLog log1 = t1.train(env, eval_env, 31);
    REQUIRE(!log1.diverged);
    REQUIRE(!log1.rows.empty());

    // global_step strictly increasing; eval fields only on eval rows.
    for (std::size_t i = 1; i < log1.rows.size(); ++i)
        CHECK(log1.rows[i].global_step > log1.rows[i - 1].global_step);
    int eval_rows = 0;
    for (const auto& row : log1.rows)
        if (row.eval_return_mean) {
            ++eval_rows;
            CHECK(row.eval_energy_mean.has_value());
        }
    CHECK(eval_rows >= 2);

    ChainMdp3Env env2, eval_env2;
    SacTrainer t2(env2.spec(), cfg, 31);
    MetricsLog log2 = t2.train(env2, eval_env2, 31);
    REQUIRE(log2.rows.size() == log1.rows.size());
    CHECK(log1.final_eval_return == log2.final_eval_return);
    CHECK(log1.final_eval_energy == log2.final_eval_energy);
}

TEST_CASE("deterministic evaluation is repeatable") {
    ChainMdp3Env env;
    SacTrainer trainer(env.spec(), small_config(), 37);
    auto [r1, e1] = trainer.evaluate(env, 99, 3);
    auto [r2, e2] = trainer.evaluate(env, 99, 3);
    CHECK(r1 == r2);
    CHECK(e1 == e2);
    CHECK(std::isfinite(r1));
    CHECK(e1 >= 0.0);
}

TEST_CASE("config validation rejects out-of-range values") {
    SacConfig cfg = small_config();
    cfg.gamma = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg = small_config();
    cfg.actor_lr = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = small_config();
    cfg.batch_size = 0;
    CHECK_THROWS(cfg.validate());
}
