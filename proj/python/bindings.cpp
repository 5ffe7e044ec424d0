// Python bindings for the core operations: gradient combiners, GAE,
// environments, tabular oracles, and config-driven training.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "morl/combine.hpp"
#include "morl/config.hpp"
#include "morl/envs.hpp"
#include "morl/harness.hpp"
#include "morl/ppo.hpp"

namespace py = pybind11;
using namespace morl;

namespace {

GradPair make_pair(std::vector<double> g_task, std::vector<double> g_energy) {
    GradPair pair;
    pair.g_task = std::move(g_task);
    pair.g_energy = std::move(g_energy);
    return pair;
}

py::dict output_dict(const CombinerOutput& out) {
    py::dict d;
    d["direction"] = out.direction;
    d["beta_scale"] = out.beta_scale;
    d["cos_g"] = out.cos_g;
    d["norm_g_task"] = out.norm_g_task;
    d["norm_g_energy"] = out.norm_g_energy;
    d["norm_g_energy_perp"] = out.norm_g_energy_perp;
    return d;
}

std::unique_ptr<Env> make_env_checked(const std::string& id) {
    auto env = make_env(id, EnergyMode::AbsTorque);
    if (!env) throw std::invalid_argument("unknown environment: " + id);
    return env;
}

}  // namespace

PYBIND11_MODULE(_morl, m) {
    m.doc() = "Multi-objective policy-gradient toolkit: orthogonal energy-gradient "
              "projection, scalarization baselines, and desk-scale control environments.";

    m.def(
        "project_orthogonal",
        [](std::vector<double> g_energy, std::vector<double> g_task) {
            return project_orthogonal(g_energy, g_task);
        },
        py::arg("g_energy"), py::arg("g_task"),
        "Component of g_energy orthogonal to g_task.");

    m.def(
        "pegrad_combine",
        [](std::vector<double> g_task, std::vector<double> g_energy) {
            return output_dict(pegrad_combine(make_pair(std::move(g_task), std::move(g_energy))));
        },
        py::arg("g_task"), py::arg("g_energy"),
        "Projected, norm-clamped energy step added to the task gradient.");

    m.def(
        "pcgrad_plus_combine",
        [](std::vector<double> g_task, std::vector<double> g_energy) {
            return output_dict(
                pcgrad_plus_combine(make_pair(std::move(g_task), std::move(g_energy))));
        },
        py::arg("g_task"), py::arg("g_energy"),
        "Conditional projection: g_energy is projected only on conflict.");

    m.def(
        "scalarized_combine",
        [](std::vector<double> g_task, std::vector<double> g_energy, double lam) {
            return output_dict(
                scalarized_combine(make_pair(std::move(g_task), std::move(g_energy)), lam));
        },
        py::arg("g_task"), py::arg("g_energy"), py::arg("lam"),
        "g_task + lam * g_energy.");

    m.def(
        "gae",
        [](std::vector<double> rewards, std::vector<double> values,
           std::vector<double> next_values, std::vector<bool> terminated,
           std::vector<bool> truncated, double gamma, double gae_lambda) {
            std::vector<std::uint8_t> term(terminated.begin(), terminated.end());
            std::vector<std::uint8_t> trunc(truncated.begin(), truncated.end());
            return gae(rewards, values, next_values, term, trunc, gamma, gae_lambda);
        },
        py::arg("rewards"), py::arg("values"), py::arg("next_values"), py::arg("terminated"),
        py::arg("truncated"), py::arg("gamma") = 0.99, py::arg("gae_lambda") = 0.95,
        "Generalized advantage estimation with terminal masking.");

    py::class_<Env>(m, "Env")
        .def("reset", &Env::reset, py::arg("seed"))
        .def(
            "step",
            [](Env& env, std::vector<double> action) {
                StepResult res = env.step(action);
                py::dict d;
                d["next_obs"] = res.next_obs;
                d["reward_task"] = res.reward.task;
                d["reward_energy"] = res.reward.energy;
                d["terminated"] = res.terminated;
                d["truncated"] = res.truncated;
                return d;
            },
            py::arg("action"))
        .def_property_readonly("obs_dim", [](const Env& e) { return e.spec().obs_dim; })
        .def_property_readonly("act_dim", [](const Env& e) { return e.spec().act_dim; })
        .def_property_readonly("horizon", [](const Env& e) { return e.spec().horizon; })
        .def_property_readonly("id", [](const Env& e) { return e.spec().id; });

    m.def("make_env", &make_env_checked, py::arg("id"),
          "Construct one of: pendulum, pointmass, chain3.");

    m.def(
        "chain3_value_iteration",
        []() {
            auto res = value_iteration(make_chain3());
            py::dict d;
            d["q_task"] = res.q_task;
            d["q_energy"] = res.q_energy;
            d["iterations"] = res.iterations;
            return d;
        },
        "Per-channel Bellman-optimality Q tables for the 3-state chain fixture.");

    m.def(
        "train",
        [](const std::string& config_path) {
            RunConfig cfg = load_config(config_path);
            RunGroupResult group = run_training(cfg);
            py::list seeds;
            for (const auto& s : group.seeds) {
                py::dict d;
                d["seed"] = s.seed;
                d["dir"] = s.dir;
                d["ok"] = s.ok;
                d["final_eval_return"] = s.final_eval_return;
                d["final_eval_energy"] = s.final_eval_energy;
                seeds.append(d);
            }
            py::dict out;
            out["label"] = group.label;
            out["seeds"] = seeds;
            out["all_ok"] = group.all_ok();
            return out;
        },
        py::arg("config_path"), "Run all seeds of a config file; returns per-seed results.");
}
