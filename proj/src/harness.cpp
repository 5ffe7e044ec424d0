#include "morl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "morl/checkpoint.hpp"
#include "morl/metrics.hpp"
#include "morl/ppo.hpp"
#include "morl/sac.hpp"

namespace fs = std::filesystem;

namespace morl {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

EnergyMode parse_energy_mode(const std::string& s) {
    if (s == "abs_torque") return EnergyMode::AbsTorque;
    if (s == "mech_power") return EnergyMode::MechPower;
    throw std::invalid_argument("unknown energy mode: " + s);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
}

}  // namespace

bool RunGroupResult::all_ok() const {
    for (const auto& s : seeds)
        if (!s.ok) return false;
    return !seeds.empty();
}

std::string run_label(const RunConfig& cfg) {
    std::string label = combiner_label(cfg.combiner_choice());
    std::string out;
    for (char c : label) {
        if (c == '(') out += '_';
        else if (c != ')') out += c;
    }
    return out;
}

SeedRunResult run_single_seed(const RunConfig& cfg, std::uint64_t seed,
                              const std::string& dir) {
    SeedRunResult res;
    res.seed = seed;
    res.dir = dir;
    try {
        cfg.validate();
        fs::create_directories(dir);
        save_config(cfg, dir + "/config.txt");

        const EnergyMode mode = cfg.energy_mode_enum();
        auto env = make_env(cfg.env, mode);
        auto eval_env = make_env(cfg.env, mode);

        MetricsLog log;
        Checkpoint ckpt;
        if (cfg.algorithm == "sac") {
            SacTrainer trainer(env->spec(), cfg.sac_config(), seed);
            log = trainer.train(*env, *eval_env, seed);
            ckpt = Checkpoint::from_store(trainer.policy().params());
        } else if (cfg.algorithm == "ppo") {
            PpoTrainer trainer(env->spec(), cfg.ppo_config(), seed);
            log = trainer.train(*env, *eval_env, seed);
            ckpt = Checkpoint::from_store(trainer.policy().params());
        } else {
            throw std::invalid_argument("unknown algorithm: " + cfg.algorithm);
        }

        write_metrics_csv(log, dir + "/metrics.csv");
        res.diverged = log.diverged;
        res.final_eval_return = log.final_eval_return;
        res.final_eval_energy = log.final_eval_energy;

        if (log.diverged) {
            res.ok = false;
            res.error = log.abort_reason;
            write_text(dir + "/FAILED", log.abort_reason + "\n");
        } else {
            ckpt.algorithm = cfg.algorithm;
            ckpt.env = cfg.env;
            ckpt.energy_mode = cfg.energy_mode;
            ckpt.hidden = cfg.hidden;
            ckpt.step = cfg.total_steps;
            ckpt.seed = seed;
            save_checkpoint(ckpt, dir + "/checkpoint.txt");
            res.ok = true;
        }

        std::ostringstream summary;
        summary << "label " << run_label(cfg) << '\n'
                << "algorithm " << cfg.algorithm << '\n'
                << "env " << cfg.env << '\n'
                << "seed " << seed << '\n'
                << "status " << (res.ok ? "ok" : "diverged") << '\n'
                << "final_eval_return " << fmt_double(res.final_eval_return) << '\n'
                << "final_eval_energy " << fmt_double(res.final_eval_energy) << '\n';
        write_text(dir + "/summary.txt", summary.str());
    } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
        std::error_code ec;
        if (fs::exists(dir, ec)) write_text(dir + "/FAILED", res.error + "\n");
    }
    return res;
}

RunGroupResult run_training(const RunConfig& cfg, int jobs) {
    cfg.validate();
    RunGroupResult group;
    group.label = run_label(cfg);
    group.seeds.resize(cfg.seeds.size());

    auto run_one = [&](std::size_t i) {
        const std::uint64_t seed = cfg.seeds[i];
        const std::string dir =
            cfg.out_dir + "/" + group.label + "/seed" + std::to_string(seed);
        group.seeds[i] = run_single_seed(cfg, seed, dir);
    };

    if (jobs <= 1 || cfg.seeds.size() <= 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < cfg.seeds.size();
                 i = next.fetch_add(1))
                run_one(i);
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(jobs, static_cast<int>(cfg.seeds.size()));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Index aggregation is a single-threaded post-pass over the result files.
    fs::create_directories(cfg.out_dir);
    const std::string index_path = cfg.out_dir + "/runs.csv";
    const bool fresh = !fs::exists(index_path);
    std::ofstream idx(index_path, std::ios::binary | std::ios::app);
    if (!idx) throw std::runtime_error("cannot open for writing: " + index_path);
    if (fresh) idx << "label,seed,dir\n";
    for (const auto& s : group.seeds)
        if (s.ok) idx << group.label << ',' << s.seed << ',' << s.dir << '\n';
    return group;
}

std::vector<ParetoPoint> run_sweep(const RunConfig& cfg,
                                   const std::vector<double>& lambdas, int jobs) {
    std::vector<RunConfig> variants;
    for (double lam : lambdas) {
        RunConfig v = cfg;
        v.combiner = "scalarized";
        v.lambda = lam;
        variants.push_back(v);
    }
    for (const char* name : {"pegrad", "pcgrad_plus"}) {
        RunConfig v = cfg;
        v.combiner = name;
        v.lambda = 0.0;
        variants.push_back(v);
    }

    std::vector<ParetoPoint> points;
    for (const auto& v : variants) {
        RunGroupResult group = run_training(v, jobs);
        ParetoPoint p;
        p.run_id = group.label;
        p.combiner_label = combiner_label(v.combiner_choice());
        double sum_r = 0.0, sum_e = 0.0;
        for (const auto& s : group.seeds) {
            if (!s.ok) continue;
            p.per_seed.emplace_back(s.final_eval_energy, s.final_eval_return);
            sum_r += s.final_eval_return;
            sum_e += s.final_eval_energy;
        }
        if (!p.per_seed.empty()) {
            p.mean_final_return = sum_r / static_cast<double>(p.per_seed.size());
            p.mean_final_energy = sum_e / static_cast<double>(p.per_seed.size());
            points.push_back(std::move(p));
        }
    }

    fs::create_directories(cfg.out_dir);
    std::ofstream f(cfg.out_dir + "/pareto.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + cfg.out_dir + "/pareto.csv");
    f << "run_id,combiner,mean_final_return,mean_final_energy,seed_final_energy,"
         "seed_final_return\n";
    for (const auto& p : points)
        for (const auto& [e, r] : p.per_seed)
            f << p.run_id << ',' << p.combiner_label << ','
              << fmt_double(p.mean_final_return) << ',' << fmt_double(p.mean_final_energy)
              << ',' << fmt_double(e) << ',' << fmt_double(r) << '\n';
    return points;
}

EvalSummary evaluate_checkpoint(const std::string& checkpoint_path, int episodes,
                                std::uint64_t eval_seed) {
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    auto env = make_env(ckpt.env, parse_energy_mode(ckpt.energy_mode));
    const EnvSpec& spec = env->spec();

    Rng init_rng(0);  // overwritten by the checkpoint below
    SquashedGaussianPolicy policy(spec.obs_dim, ckpt.hidden, spec.act_dim,
                                  spec.action_low, spec.action_high, init_rng);
    ckpt.load_into(policy.params());

    std::vector<double> returns(static_cast<std::size_t>(episodes));
    std::vector<double> energies(static_cast<std::size_t>(episodes));
    Rng action_rng(0);  // unused on the deterministic path
    for (int ep = 0; ep < episodes; ++ep) {
        auto obs = env->reset(Rng::derive(eval_seed, static_cast<std::uint64_t>(ep)));
        double ret = 0.0, energy = 0.0;
        while (true) {
            auto [action, logp] = policy.act(obs, action_rng, /*deterministic=*/true);
            (void)logp;
            StepResult sr = env->step(action);
            ret += sr.reward.task;
            energy += sr.reward.energy;
            obs = std::move(sr.next_obs);
            if (sr.terminated || sr.truncated) break;
        }
        returns[static_cast<std::size_t>(ep)] = ret;
        energies[static_cast<std::size_t>(ep)] = energy;
    }

    auto mean_std = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - m) * (x - m);
        var /= static_cast<double>(xs.size());
        return std::pair<double, double>{m, std::sqrt(var)};
    };
    EvalSummary s;
    s.episodes = episodes;
    std::tie(s.mean_return, s.std_return) = mean_std(returns);
    std::tie(s.mean_energy, s.std_energy) = mean_std(energies);
    return s;
}

std::string format_summary(const EvalSummary& s) {
    std::ostringstream out;
    out << "episodes " << s.episodes << '\n'
        << "mean_return " << fmt_double(s.mean_return) << '\n'
        << "std_return " << fmt_double(s.std_return) << '\n'
        << "mean_energy " << fmt_double(s.mean_energy) << '\n'
        << "std_energy " << fmt_double(s.std_energy) << '\n';
    return out.str();
}

PlotKind parse_plot_kind(const std::string& name) {
    if (name == "pareto") return PlotKind::Pareto;
    if (name == "sample") return PlotKind::Sample;
    if (name == "energy") return PlotKind::Energy;
    throw std::invalid_argument("unknown plot kind: " + name);
}

namespace {

struct IndexEntry {
    std::string label;
    std::uint64_t seed = 0;
    std::string dir;
};

std::vector<IndexEntry> read_index(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open runs index: " + path);
    std::string line;
    if (!std::getline(f, line) || line != "label,seed,dir")
        throw std::runtime_error("unexpected runs index header in " + path);
    std::vector<IndexEntry> entries;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error("malformed runs index line: " + line);
        IndexEntry e;
        e.label = line.substr(0, c1);
        e.seed = std::stoull(line.substr(c1 + 1, c2 - c1 - 1));
        e.dir = line.substr(c2 + 1);
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw std::runtime_error("runs index is empty: " + path);
    return entries;
}

}  // namespace

void plot_from_index(const std::string& index_path, PlotKind kind,
                     const std::string& out_path) {
    const auto entries = read_index(index_path);
    // Group logs by label, preserving first-appearance order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<MetricsLog>> by_label;
    for (const auto& e : entries) {
        if (!by_label.count(e.label)) order.push_back(e.label);
        by_label[e.label].push_back(read_metrics_csv(e.dir + "/metrics.csv"));
    }

    if (kind == PlotKind::Pareto) {
        std::vector<ParetoPoint> points;
        for (const auto& label : order) {
            ParetoPoint p;
            p.run_id = label;
            p.combiner_label = label;
            double sum_r = 0.0, sum_e = 0.0;
            for (const auto& log : by_label[label]) {
                p.per_seed.emplace_back(log.final_eval_energy, log.final_eval_return);
                sum_r += log.final_eval_return;
                sum_e += log.final_eval_energy;
            }
            p.mean_final_return = sum_r / static_cast<double>(p.per_seed.size());
            p.mean_final_energy = sum_e / static_cast<double>(p.per_seed.size());
            points.push_back(std::move(p));
        }
        write_pareto_svg(points, out_path);
        return;
    }

    const bool energy = kind == PlotKind::Energy;
    std::vector<CurveGroup> groups;
    for (const auto& label : order) {
        CurveGroup g;
        g.label = label;
        std::size_t min_len = static_cast<std::size_t>(-1);
        for (const auto& log : by_label[label]) {
            std::vector<double> curve;
            std::vector<double> steps;
            for (const auto& row : log.rows) {
                const auto& field = energy ? row.eval_energy_mean : row.eval_return_mean;
                if (field) {
                    curve.push_back(*field);
                    steps.push_back(static_cast<double>(row.global_step));
                }
            }
            if (curve.empty())
                throw std::runtime_error("run '" + label + "' has no evaluation rows");
            if (g.steps.empty()) g.steps = steps;
            min_len = std::min(min_len, curve.size());
            g.per_seed.push_back(std::move(curve));
        }
        g.steps.resize(min_len);
        for (auto& c : g.per_seed) c.resize(min_len);
        groups.push_back(std::move(g));
    }
    write_curve_svg(groups, energy ? "mean evaluation episode energy"
                                   : "mean evaluation return",
                    out_path);
}

}  // namespace morl
