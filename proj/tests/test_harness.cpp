#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "morl/checkpoint.hpp"
#include "morl/config.hpp"
#include "morl/harness.hpp"
#include "morl/metrics.hpp"
#include "morl/nets.hpp"
#include "morl/plot.hpp"

using namespace morl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("morl_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig tiny_run_config(const std::string& out_dir) {
    RunConfig cfg;
    cfg.algorithm = "sac";
    cfg.env = "chain3";
    cfg.combiner = "pegrad";
    cfg.seeds = {7};
    cfg.total_steps = 400;
    cfg.eval_every = 200;
    cfg.eval_episodes = 2;
    cfg.log_every = 100;
    cfg.warmup_steps = 64;
    cfg.batch_size = 32;
    cfg.hidden = {16, 16};
    cfg.replay_capacity = 2000;
    cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

TEST_CASE("config text round-trips through parse and serialize") {
    RunConfig cfg;
    cfg.algorithm = "ppo";
    cfg.env = "pendulum";
    cfg.combiner = "scalarized";
    cfg.lambda = 0.012345678901234567;
    cfg.seeds = {1, 2, 5};
    cfg.hidden = {32, 64};
    cfg.energy_mode = "mech_power";
    cfg.normalize_advantages = false;
    const std::string text = serialize_config(cfg);
    RunConfig back = parse_config_text(text);
    CHECK(back == cfg);
    CHECK(serialize_config(back) == text);
    // Defaults fill fields a sparse file omits.
    RunConfig sparse = parse_config_text("env chain3\nalgorithm sac\n");
    CHECK(sparse.env == "chain3");
    CHECK(sparse.gamma == 0.99);
}

TEST_CASE("config errors name the offending key") {
    try {
        parse_config_text("env chain3\nalgorithm sac\nbogus_knob 3\n");
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("bogus_knob") != std::string::npos);
    }
    try {
        RunConfig cfg = parse_config_text("algorithm sac\n");
        cfg.validate();
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("env") != std::string::npos);
    }
}

TEST_CASE("metrics csv header is the fixed thirteen-column contract") {
    CHECK(metrics_csv_header() ==
          "global_step,episode_return_task,episode_energy_sum,critic_loss_task,"
          "critic_loss_energy,actor_loss_task,actor_loss_energy,beta_scale,cos_g,"
          "norm_gR,norm_gE_perp,eval_return_mean,eval_energy_mean");
}

TEST_CASE("metrics csv round-trips rows with empty optional cells") {
    MetricsLog log;
    MetricsRow r1;
    r1.global_step = 10;
    r1.critic_loss_task = 0.125;
    r1.beta_scale = 1.0;
    MetricsRow r2;
    r2.global_step = 20;
    r2.eval_return_mean = -3.5;
    r2.eval_energy_mean = 0.017;
    log.rows = {r1, r2};
    log.final_eval_return = -3.5;
    log.final_eval_energy = 0.017;

    fs::path dir = fresh_dir("metrics_roundtrip");
    const std::string path = (dir / "metrics.csv").string();
    write_metrics_csv(log, path);
    MetricsLog back = read_metrics_csv(path);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].critic_loss_task == 0.125);
    CHECK(!back.rows[0].eval_return_mean.has_value());
    CHECK(back.rows[1].eval_return_mean == -3.5);
    CHECK(!back.rows[1].critic_loss_task.has_value());
}

TEST_CASE("checkpoint save -> load -> save is byte-identical") {
    Rng init_rng(99);
    SquashedGaussianPolicy policy(3, {8, 8}, 1, {-2.0}, {2.0}, init_rng);
    Checkpoint ckpt = Checkpoint::from_store(policy.params());
    ckpt.algorithm = "sac";
    ckpt.env = "pendulum";
    ckpt.hidden = {8, 8};
    ckpt.step = 1234;
    ckpt.seed = 99;

    fs::path dir = fresh_dir("checkpoint_roundtrip");
    const std::string p1 = (dir / "a.txt").string();
    const std::string p2 = (dir / "b.txt").string();
    save_checkpoint(ckpt, p1);
    Checkpoint back = load_checkpoint(p1);
    save_checkpoint(back, p2);
    CHECK(slurp(p1) == slurp(p2));

    // Loading restores the exact parameter values.
    Rng other_rng(1);
    SquashedGaussianPolicy other(3, {8, 8}, 1, {-2.0}, {2.0}, other_rng);
    back.load_into(other.params());
    CHECK(other.params().flatten() == policy.params().flatten());

    // Mismatched layout is rejected.
    Rng wrong_rng(1);
    SquashedGaussianPolicy wrong(3, {4}, 1, {-2.0}, {2.0}, wrong_rng);
    CHECK_THROWS(back.load_into(wrong.params()));
}

TEST_CASE("bootstrap band degenerates correctly and is seed-deterministic") {
    std::vector<double> constant(5, 2.5);
    BootstrapBand band = bootstrap_ci(constant, 7);
    CHECK(band.lo == 2.5);
    CHECK(band.hi == 2.5);

    std::vector<double> values{1.0, 4.0, 2.0, 8.0, 3.0};
    BootstrapBand b1 = bootstrap_ci(values, 7);
    BootstrapBand b2 = bootstrap_ci(values, 7);
    CHECK(b1.lo == b2.lo);
    CHECK(b1.hi == b2.hi);
    CHECK(b1.lo < b1.hi);
    const double mean = (1.0 + 4.0 + 2.0 + 8.0 + 3.0) / 5.0;
    CHECK(b1.lo <= mean);
    CHECK(b1.hi >= mean);
}

TEST_CASE("a single-seed run produces the documented artifact layout") {
    fs::path out = fresh_dir("single_seed");
    RunConfig cfg = tiny_run_config(out.string());
    fs::path dir = out / run_label(cfg) / "seed7";
    SeedRunResult res = run_single_seed(cfg, 7, dir.string());
    REQUIRE(res.ok);
    CHECK(fs::exists(dir / "config.txt"));
    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "checkpoint.txt"));
    CHECK(fs::exists(dir / "summary.txt"));
    CHECK(!fs::exists(dir / "FAILED"));

    // The stored config reproduces the run inputs.
    RunConfig stored = load_config((dir / "config.txt").string());
    CHECK(stored == cfg);

    MetricsLog log = read_metrics_csv((dir / "metrics.csv").string());
    REQUIRE(!log.rows.empty());
    for (std::size_t i = 1; i < log.rows.size(); ++i)
        CHECK(log.rows[i].global_step > log.rows[i - 1].global_step);
}

TEST_CASE("rerunning the same seed yields byte-identical metrics") {
    fs::path out1 = fresh_dir("rerun_a");
    fs::path out2 = fresh_dir("rerun_b");
    RunConfig cfg = tiny_run_config(out1.string());
    SeedRunResult r1 = run_single_seed(cfg, 7, (out1 / "run").string());
    cfg.out_dir = out2.string();
    SeedRunResult r2 = run_single_seed(cfg, 7, (out2 / "run").string());
    REQUIRE(r1.ok);
    REQUIRE(r2.ok);
    CHECK(slurp(out1 / "run" / "metrics.csv") == slurp(out2 / "run" / "metrics.csv"));
    CHECK(slurp(out1 / "run" / "checkpoint.txt") == slurp(out2 / "run" / "checkpoint.txt"));
}

TEST_CASE("run_training writes the completed-run index") {
    fs::path out = fresh_dir("group");
    RunConfig cfg = tiny_run_config(out.string());
    cfg.seeds = {1, 2};
    RunGroupResult group = run_training(cfg);
    REQUIRE(group.all_ok());
    CHECK(group.seeds.size() == 2);

    const std::string index = slurp(out / "runs.csv");
    CHECK(index.rfind("label,seed,dir\n", 0) == 0);
    CHECK(index.find("pegrad,1,") != std::string::npos);
    CHECK(index.find("pegrad,2,") != std::string::npos);
}

TEST_CASE("evaluating a zero policy on the point mass spends zero energy") {
    // tanh(0) = 0 action everywhere -> |a|_1 energy is exactly zero.
    fs::path dir = fresh_dir("zero_policy");
    PointMassReach env;
    Rng init_rng(3);
    SquashedGaussianPolicy policy(env.spec().obs_dim, {8}, env.spec().act_dim,
                                  env.spec().action_low, env.spec().action_high, init_rng);
    auto flat = policy.params().flatten();
    std::fill(flat.begin(), flat.end(), 0.0);
    policy.params().load_flat(flat);
    Checkpoint ckpt = Checkpoint::from_store(policy.params());
    ckpt.algorithm = "sac";
    ckpt.env = "pointmass";
    ckpt.hidden = {8};
    const std::string path = (dir / "checkpoint.txt").string();
    save_checkpoint(ckpt, path);

    EvalSummary summary = evaluate_checkpoint(path, 4);
    CHECK(summary.episodes == 4);
    CHECK(summary.mean_energy == 0.0);
    CHECK(summary.std_energy == 0.0);
}

TEST_CASE("plots regenerate byte-identically from the same run index") {
    fs::path out = fresh_dir("plots");
    RunConfig cfg = tiny_run_config(out.string());
    cfg.seeds = {1, 2};
    RunGroupResult group = run_training(cfg);
    REQUIRE(group.all_ok());

    const std::string index = (out / "runs.csv").string();
    plot_from_index(index, PlotKind::Sample, (out / "s1.svg").string());
    plot_from_index(index, PlotKind::Sample, (out / "s2.svg").string());
    CHECK(slurp(out / "s1.svg") == slurp(out / "s2.svg"));
    plot_from_index(index, PlotKind::Pareto, (out / "p1.svg").string());
    plot_from_index(index, PlotKind::Pareto, (out / "p2.svg").string());
    CHECK(slurp(out / "p1.svg") == slurp(out / "p2.svg"));
    const std::string svg = slurp(out / "s1.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("width=\"720\"") != std::string::npos);
}

TEST_CASE("plot kind parsing accepts the documented names only") {
    CHECK(parse_plot_kind("pareto") == PlotKind::Pareto);
    CHECK(parse_plot_kind("sample") == PlotKind::Sample);
    CHECK(parse_plot_kind("energy") == PlotKind::Energy);
    CHECK_THROWS_AS(parse_plot_kind("histogram"), std::invalid_argument);
}
