#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "morl/rng.hpp"

namespace morl {

// Two-channel per-step reward: task reward and energy expenditure.
// energy >= 0 always.
struct VectorReward {
    double task = 0.0;
    double energy = 0.0;
};

enum class EnergyMode { AbsTorque, MechPower };

struct EnvSpec {
    std::string id;
    int obs_dim = 0;
    int act_dim = 0;
    std::vector<double> action_low, action_high;
    double dt = 0.0;
    int horizon = 0;
    EnergyMode energy_mode = EnergyMode::AbsTorque;
};

struct StepResult {
    std::vector<double> next_obs;
    VectorReward reward;
    bool terminated = false;  // MDP-terminal; the only flag that gates bootstrap
    bool truncated = false;   // horizon hit
};

// Deterministic environments: (seed, action sequence) fully determines the
// trajectory. Out-of-bounds actions are clamped and counted, not rejected.
class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    virtual StepResult step(std::span<const double> action) = 0;
    std::int64_t clamped_action_count() const { return clamped_actions_; }

protected:
    // Clamps into bounds, incrementing the diagnostic counter on violation.
    std::vector<double> clamp_action(std::span<const double> action);
    std::int64_t clamped_actions_ = 0;
};

// Pendulum swing-up. State (theta, theta_dot) with theta = 0 upright;
// observation (cos theta, sin theta, theta_dot); torque in [-2, 2].
// Dynamics (semi-implicit Euler, m = l = 1, g = 9.81, max |theta_dot| = 8):
//   theta_dot' = theta_dot + dt * (3 g / (2 l) * sin(theta) + 3 / (m l^2) * tau)
//   theta'     = theta + dt * theta_dot'
// Task reward = -(wrap(theta)^2 + 0.1 * theta_dot^2); no action cost in the
// task channel. Reset: theta ~ U[-pi, pi], theta_dot ~ U[-1, 1].
class PendulumSwingup final : public Env {
public:
    explicit PendulumSwingup(EnergyMode mode = EnergyMode::AbsTorque);
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(std::span<const double> action) override;

private:
    EnvSpec spec_;
    double theta_ = 0.0, theta_dot_ = 0.0;
    int t_ = 0;
    std::vector<double> observe() const;
};

// Point-mass reach: 2-D double integrator. Observation (pos, vel, goal-pos)
// in R^6; action = force in [-1, 1]^2. Per step:
//   vel' = 0.95 * (vel + dt * F);  pos' = pos + dt * vel'
// Task reward = -||pos - goal||_2 + 1.0 while within 0.05 of the goal.
// Reset: pos, goal ~ U[-1, 1]^2, vel = 0.
class PointMassReach final : public Env {
public:
    explicit PointMassReach(EnergyMode mode = EnergyMode::AbsTorque);
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(std::span<const double> action) override;

private:
    EnvSpec spec_;
    double pos_[2] = {0, 0}, vel_[2] = {0, 0}, goal_[2] = {0, 0};
    int t_ = 0;
    std::vector<double> observe() const;
};

// Deterministic tabular MDP with a two-channel reward.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<int>> transition;   // [s][a] -> s'
    std::vector<std::vector<double>> reward;    // task channel
    std::vector<std::vector<double>> energy;    // energy channel
    double gamma = 0.99;
};

// The documented 3-state chain fixture: action 1 ("high effort") climbs the
// chain with higher task reward and energy 1.0; action 0 ("low effort")
// descends with lower task reward and energy 0.1. Task-optimal and
// energy-optimal policies differ.
TabularMdp make_chain3(double gamma = 0.9);

struct ValueIterationResult {
    std::vector<std::vector<double>> q_task;    // [s][a]
    std::vector<std::vector<double>> q_energy;  // [s][a]
    int iterations = 0;
};

// Bellman-optimality fixed points, computed independently per channel
// (each channel maximized as if it were the only reward).
ValueIterationResult value_iteration(const TabularMdp& mdp, double tol = 1e-10);

// Fixed-point Q of a frozen stochastic policy (probabilities [s][a]) for one
// reward table, with the entropy adjustment of the soft Bellman backup:
//   Q(s,a) = r(s,a) + gamma * sum_a' pi(a'|s') * (Q(s',a') - alpha*log pi(a'|s'))
std::vector<std::vector<double>> soft_policy_evaluation(
    const TabularMdp& mdp, const std::vector<std::vector<double>>& reward_table,
    const std::vector<std::vector<double>>& policy_probs, double entropy_alpha,
    double tol = 1e-12);

// ChainMdp3 wrapped as a continuous-control Env: one-hot observation of the
// state, act_dim 1 in [-1, 1]; action > 0 selects the high-effort action.
// Episodes truncate at the horizon; there are no terminal states.
class ChainMdp3Env final : public Env {
public:
    explicit ChainMdp3Env(int horizon = 50);
    const EnvSpec& spec() const override { return spec_; }
    std::vector<double> reset(std::uint64_t seed) override;
    StepResult step(std::span<const double> action) override;
    const TabularMdp& mdp() const { return mdp_; }

private:
    EnvSpec spec_;
    TabularMdp mdp_;
    int state_ = 0, t_ = 0;
    std::vector<double> observe() const;
};

// Environment registry: "pendulum" | "pointmass" | "chain3".
std::unique_ptr<Env> make_env(const std::string& id, EnergyMode mode = EnergyMode::AbsTorque);

}  // namespace morl
