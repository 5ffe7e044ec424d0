#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morl/combine.hpp"
#include "morl/envs.hpp"
#include "morl/ppo.hpp"
#include "morl/sac.hpp"

namespace morl {

// Full run description. Serialized as a flat "key value" text document;
// parse -> serialize -> parse is the identity.
struct RunConfig {
    std::string algorithm = "sac";  // sac | ppo
    std::string env = "";           // pendulum | pointmass | chain3
    std::string combiner = "pegrad";
    double lambda = 0.0;
    std::string energy_mode = "abs_torque";  // abs_torque | mech_power
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::int64_t total_steps = 100000;
    std::int64_t eval_every = 10000;
    int eval_episodes = 50;
    std::int64_t log_every = 1000;
    std::string out_dir = "runs";
    std::vector<int> hidden{256, 256};

    // SAC
    double gamma = 0.99;
    double entropy_alpha = 0.2;
    int batch_size = 256;
    double actor_lr = 3e-4;
    double critic_lr = 1e-3;
    int actor_update_every = 2;
    int critic_update_every = 1;
    double polyak_tau = 0.005;
    std::int64_t warmup_steps = 5000;
    std::int64_t replay_capacity = 1000000;
    bool twin_q = false;

    // PPO
    double clip_eps = 0.2;
    double gae_lambda = 0.95;
    double ppo_lr = 3e-4;
    int rollout_len = 2048;
    int epochs = 10;
    int minibatch_size = 64;
    double entropy_coef = 0.0;
    bool normalize_advantages = true;

    void validate() const;  // throws std::invalid_argument naming the field
    EnergyMode energy_mode_enum() const;
    CombinerChoice combiner_choice() const;
    SacConfig sac_config() const;
    PpoConfig ppo_config() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace morl
