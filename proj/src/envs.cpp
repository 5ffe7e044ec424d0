#include "morl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace morl {

namespace {

constexpr double kPi = std::numbers::pi;

// Wrap angle to [-pi, pi].
double wrap_angle(double theta) {
    double w = std::fmod(theta + kPi, 2.0 * kPi);
    if (w < 0) w += 2.0 * kPi;
    return w - kPi;
}

void check_state_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) throw std::runtime_error("non-finite environment state");
}

}  // namespace

std::vector<double> Env::clamp_action(std::span<const double> action) {
    const auto& s = spec();
    if (static_cast<int>(action.size()) != s.act_dim)
        throw std::invalid_argument("action dim mismatch");
    std::vector<double> a(action.begin(), action.end());
    bool clamped = false;
    for (int d = 0; d < s.act_dim; ++d) {
        const double lo = s.action_low[static_cast<std::size_t>(d)];
        const double hi = s.action_high[static_cast<std::size_t>(d)];
        if (a[static_cast<std::size_t>(d)] < lo || a[static_cast<std::size_t>(d)] > hi) {
            a[static_cast<std::size_t>(d)] = std::clamp(a[static_cast<std::size_t>(d)], lo, hi);
            clamped = true;
        }
    }
    if (clamped) ++clamped_actions_;
    return a;
}

// ---------------------------------------------------------------------------
// PendulumSwingup

namespace {
constexpr double kPendulumG = 9.81;
constexpr double kPendulumMaxSpeed = 8.0;
constexpr double kPendulumMaxTorque = 2.0;
}  // namespace

PendulumSwingup::PendulumSwingup(EnergyMode mode) {
    spec_.id = "pendulum";
    spec_.obs_dim = 3;
    spec_.act_dim = 1;
    spec_.action_low = {-kPendulumMaxTorque};
    spec_.action_high = {kPendulumMaxTorque};
    spec_.dt = 0.05;
    spec_.horizon = 200;
    spec_.energy_mode = mode;
}

std::vector<double> PendulumSwingup::observe() const {
    return {std::cos(theta_), std::sin(theta_), theta_dot_};
}

std::vector<double> PendulumSwingup::reset(std::uint64_t seed) {
    Rng rng(seed);
    theta_ = rng.uniform(-kPi, kPi);
    theta_dot_ = rng.uniform(-1.0, 1.0);
    t_ = 0;
    return observe();
}

StepResult PendulumSwingup::step(std::span<const double> action) {
    const auto a = clamp_action(action);
    const double tau = a[0];
    const double omega_before = theta_dot_;

    // m = l = 1; semi-implicit Euler with speed clamp.
    theta_dot_ += spec_.dt * (1.5 * kPendulumG * std::sin(theta_) + 3.0 * tau);
    theta_dot_ = std::clamp(theta_dot_, -kPendulumMaxSpeed, kPendulumMaxSpeed);
    theta_ = wrap_angle(theta_ + spec_.dt * theta_dot_);
    ++t_;

    StepResult res;
    res.next_obs = observe();
    check_state_finite(res.next_obs);
    res.reward.task = -(wrap_angle(theta_) * wrap_angle(theta_) + 0.1 * theta_dot_ * theta_dot_);
    res.reward.energy = spec_.energy_mode == EnergyMode::AbsTorque
                            ? std::abs(tau)
                            : std::abs(tau * omega_before);
    res.terminated = false;
    res.truncated = t_ >= spec_.horizon;
    return res;
}

// ---------------------------------------------------------------------------
// PointMassReach

namespace {
constexpr double kPointMassDamping = 0.95;
constexpr double kGoalRadius = 0.05;
}  // namespace

PointMassReach::PointMassReach(EnergyMode mode) {
    spec_.id = "pointmass";
    spec_.obs_dim = 6;
    spec_.act_dim = 2;
    spec_.action_low = {-1.0, -1.0};
    spec_.action_high = {1.0, 1.0};
    spec_.dt = 0.05;
    spec_.horizon = 200;
    spec_.energy_mode = mode;
}

std::vector<double> PointMassReach::observe() const {
    return {pos_[0], pos_[1], vel_[0], vel_[1], goal_[0] - pos_[0], goal_[1] - pos_[1]};
}

std::vector<double> PointMassReach::reset(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& p : pos_) p = rng.uniform(-1.0, 1.0);
    for (auto& g : goal_) g = rng.uniform(-1.0, 1.0);
    vel_[0] = vel_[1] = 0.0;
    t_ = 0;
    return observe();
}

StepResult PointMassReach::step(std::span<const double> action) {
    const auto f = clamp_action(action);
    double abs_force = 0.0, mech_power = 0.0;
    for (int d = 0; d < 2; ++d) {
        abs_force += std::abs(f[static_cast<std::size_t>(d)]);
        mech_power += std::abs(f[static_cast<std::size_t>(d)] * vel_[d]);
        vel_[d] = kPointMassDamping * (vel_[d] + spec_.dt * f[static_cast<std::size_t>(d)]);
        pos_[d] += spec_.dt * vel_[d];
    }
    ++t_;

    StepResult res;
    res.next_obs = observe();
    check_state_finite(res.next_obs);
    const double dx = pos_[0] - goal_[0], dy = pos_[1] - goal_[1];
    const double dist = std::sqrt(dx * dx + dy * dy);
    res.reward.task = -dist + (dist < kGoalRadius ? 1.0 : 0.0);
    res.reward.energy =
        spec_.energy_mode == EnergyMode::AbsTorque ? abs_force : mech_power;
    res.terminated = false;
    res.truncated = t_ >= spec_.horizon;
    return res;
}

// ---------------------------------------------------------------------------
// Tabular MDP machinery

TabularMdp make_chain3(double gamma) {
    TabularMdp mdp;
    mdp.n_states = 3;
    mdp.n_actions = 2;  // 0 = low effort, 1 = high effort
    mdp.gamma = gamma;
    mdp.transition = {{0, 1}, {0, 2}, {1, 2}};
    mdp.reward = {{0.2, 0.6}, {0.3, 0.8}, {0.4, 1.0}};
    mdp.energy = {{0.1, 1.0}, {0.1, 1.0}, {0.1, 1.0}};
    return mdp;
}

namespace {

std::vector<std::vector<double>> q_table(int s, int a) {
    return std::vector<std::vector<double>>(static_cast<std::size_t>(s),
                                            std::vector<double>(static_cast<std::size_t>(a), 0.0));
}

void validate_mdp(const TabularMdp& mdp) {
    if (!(mdp.gamma < 1.0)) throw std::invalid_argument("value iteration requires gamma < 1");
    for (const auto& row : mdp.transition)
        for (int sp : row)
            if (sp < 0 || sp >= mdp.n_states)
                throw std::invalid_argument("transition table references invalid state");
}

}  // namespace

ValueIterationResult value_iteration(const TabularMdp& mdp, double tol) {
    validate_mdp(mdp);
    ValueIterationResult res;
    res.q_task = q_table(mdp.n_states, mdp.n_actions);
    res.q_energy = q_table(mdp.n_states, mdp.n_actions);

    auto solve = [&](const std::vector<std::vector<double>>& r,
                     std::vector<std::vector<double>>& q) {
        int iters = 0;
        double delta = tol + 1.0;
        while (delta > tol) {
            delta = 0.0;
            for (int s = 0; s < mdp.n_states; ++s) {
                for (int a = 0; a < mdp.n_actions; ++a) {
                    const int sp = mdp.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
                    double best = q[static_cast<std::size_t>(sp)][0];
                    for (int ap = 1; ap < mdp.n_actions; ++ap)
                        best = std::max(best, q[static_cast<std::size_t>(sp)][static_cast<std::size_t>(ap)]);
                    const double next = r[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] + mdp.gamma * best;
                    delta = std::max(delta, std::abs(next - q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]));
                    q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = next;
                }
            }
            ++iters;
        }
        return iters;
    };

    res.iterations = solve(mdp.reward, res.q_task);
    res.iterations = std::max(res.iterations, solve(mdp.energy, res.q_energy));
    return res;
}

std::vector<std::vector<double>> soft_policy_evaluation(
    const TabularMdp& mdp, const std::vector<std::vector<double>>& reward_table,
    const std::vector<std::vector<double>>& policy_probs, double entropy_alpha, double tol) {
    validate_mdp(mdp);
    auto q = q_table(mdp.n_states, mdp.n_actions);
    double delta = tol + 1.0;
    while (delta > tol) {
        delta = 0.0;
        auto prev = q;
        for (int s = 0; s < mdp.n_states; ++s) {
            for (int a = 0; a < mdp.n_actions; ++a) {
                const int sp = mdp.transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
                double v = 0.0;
                for (int ap = 0; ap < mdp.n_actions; ++ap) {
                    const double p = policy_probs[static_cast<std::size_t>(sp)][static_cast<std::size_t>(ap)];
                    if (p > 0.0)
                        v += p * (prev[static_cast<std::size_t>(sp)][static_cast<std::size_t>(ap)] -
                                  entropy_alpha * std::log(p));
                }
                const double next = reward_table[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] + mdp.gamma * v;
                delta = std::max(delta, std::abs(next - q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]));
                q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = next;
            }
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// ChainMdp3Env

ChainMdp3Env::ChainMdp3Env(int horizon) : mdp_(make_chain3()) {
    spec_.id = "chain3";
    spec_.obs_dim = 3;
    spec_.act_dim = 1;
    spec_.action_low = {-1.0};
    spec_.action_high = {1.0};
    spec_.dt = 1.0;
    spec_.horizon = horizon;
}

std::vector<double> ChainMdp3Env::observe() const {
    std::vector<double> obs(3, 0.0);
    obs[static_cast<std::size_t>(state_)] = 1.0;
    return obs;
}

std::vector<double> ChainMdp3Env::reset(std::uint64_t seed) {
    Rng rng(seed);
    state_ = static_cast<int>(rng.index(3));
    t_ = 0;
    return observe();
}

StepResult ChainMdp3Env::step(std::span<const double> action) {
    const auto a = clamp_action(action);
    const int discrete = a[0] > 0.0 ? 1 : 0;
    StepResult res;
    res.reward.task = mdp_.reward[static_cast<std::size_t>(state_)][static_cast<std::size_t>(discrete)];
    res.reward.energy = mdp_.energy[static_cast<std::size_t>(state_)][static_cast<std::size_t>(discrete)];
    state_ = mdp_.transition[static_cast<std::size_t>(state_)][static_cast<std::size_t>(discrete)];
    ++t_;
    res.next_obs = observe();
    res.terminated = false;
    res.truncated = t_ >= spec_.horizon;
    return res;
}

std::unique_ptr<Env> make_env(const std::string& id, EnergyMode mode) {
    if (id == "pendulum") return std::make_unique<PendulumSwingup>(mode);
    if (id == "pointmass") return std::make_unique<PointMassReach>(mode);
    if (id == "chain3") return std::make_unique<ChainMdp3Env>();
    throw std::invalid_argument("unknown env id: " + id);
}

}  // namespace morl
