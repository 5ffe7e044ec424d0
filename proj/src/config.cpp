#include "morl/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace morl {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(',');
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw std::invalid_argument("config field '" + field + "': " + why);
}

}  // namespace

void RunConfig::validate() const {
    if (algorithm != "sac" && algorithm != "ppo") bad_field("algorithm", "must be sac or ppo");
    if (env.empty()) bad_field("env", "is required");
    if (env != "pendulum" && env != "pointmass" && env != "chain3")
        bad_field("env", "unknown environment id '" + env + "'");
    if (combiner != "pegrad" && combiner != "pcgrad_plus" && combiner != "scalarized")
        bad_field("combiner", "must be pegrad, pcgrad_plus or scalarized");
    if (lambda < 0.0) bad_field("lambda", "must be >= 0");
    if (energy_mode != "abs_torque" && energy_mode != "mech_power")
        bad_field("energy_mode", "must be abs_torque or mech_power");
    if (seeds.empty()) bad_field("seeds", "must be non-empty");
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t j = i + 1; j < seeds.size(); ++j)
            if (seeds[i] == seeds[j]) bad_field("seeds", "must be distinct");
    if (eval_episodes < 1) bad_field("eval_episodes", "must be >= 1");
    if (total_steps < 1) bad_field("total_steps", "must be >= 1");
    if (hidden.empty()) bad_field("hidden", "must list at least one layer size");
    try {
        if (algorithm == "sac") sac_config().validate();
        else ppo_config().validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

EnergyMode RunConfig::energy_mode_enum() const {
    return energy_mode == "mech_power" ? EnergyMode::MechPower : EnergyMode::AbsTorque;
}

CombinerChoice RunConfig::combiner_choice() const { return parse_combiner(combiner, lambda); }

SacConfig RunConfig::sac_config() const {
    SacConfig c;
    c.gamma = gamma;
    c.entropy_alpha = entropy_alpha;
    c.batch_size = batch_size;
    c.actor_lr = actor_lr;
    c.critic_lr = critic_lr;
    c.actor_update_every = actor_update_every;
    c.critic_update_every = critic_update_every;
    c.polyak_tau = polyak_tau;
    c.warmup_steps = warmup_steps;
    c.total_steps = total_steps;
    c.combiner = combiner_choice();
    c.hidden = hidden;
    c.replay_capacity = static_cast<std::size_t>(replay_capacity);
    c.eval_every = eval_every;
    c.eval_episodes = eval_episodes;
    c.log_every = log_every;
    c.twin_q = twin_q;
    return c;
}

PpoConfig RunConfig::ppo_config() const {
    PpoConfig c;
    c.clip_eps = clip_eps;
    c.gae_lambda = gae_lambda;
    c.gamma = gamma;
    c.rollout_len = rollout_len;
    c.epochs = epochs;
    c.minibatch_size = minibatch_size;
    c.entropy_coef = entropy_coef;
    c.lr = ppo_lr;
    c.lambda = lambda;
    c.combiner = combiner_choice();
    c.normalize_advantages = normalize_advantages;
    c.hidden = hidden;
    c.total_steps = total_steps;
    c.eval_every = eval_every;
    c.eval_episodes = eval_episodes;
    c.log_every = log_every;
    return c;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::stringstream ls(line);
        std::string key, value;
        if (!(ls >> key)) continue;
        if (!(ls >> value))
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": key '" + key + "' has no value");
        try {
            if (key == "algorithm") cfg.algorithm = value;
            else if (key == "env") cfg.env = value;
            else if (key == "combiner") cfg.combiner = value;
            else if (key == "lambda") cfg.lambda = std::stod(value);
            else if (key == "energy_mode") cfg.energy_mode = value;
            else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& s : split(value, ',')) cfg.seeds.push_back(std::stoull(s));
            } else if (key == "total_steps") cfg.total_steps = std::stoll(value);
            else if (key == "eval_every") cfg.eval_every = std::stoll(value);
            else if (key == "eval_episodes") cfg.eval_episodes = std::stoi(value);
            else if (key == "log_every") cfg.log_every = std::stoll(value);
            else if (key == "out_dir") cfg.out_dir = value;
            else if (key == "hidden") {
                cfg.hidden.clear();
                for (const auto& s : split(value, ',')) cfg.hidden.push_back(std::stoi(s));
            } else if (key == "gamma") cfg.gamma = std::stod(value);
            else if (key == "entropy_alpha") cfg.entropy_alpha = std::stod(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "actor_lr") cfg.actor_lr = std::stod(value);
            else if (key == "critic_lr") cfg.critic_lr = std::stod(value);
            else if (key == "actor_update_every") cfg.actor_update_every = std::stoi(value);
            else if (key == "critic_update_every") cfg.critic_update_every = std::stoi(value);
            else if (key == "polyak_tau") cfg.polyak_tau = std::stod(value);
            else if (key == "warmup_steps") cfg.warmup_steps = std::stoll(value);
            else if (key == "replay_capacity") cfg.replay_capacity = std::stoll(value);
            else if (key == "twin_q") cfg.twin_q = value == "1" || value == "true";
            else if (key == "clip_eps") cfg.clip_eps = std::stod(value);
            else if (key == "gae_lambda") cfg.gae_lambda = std::stod(value);
            else if (key == "ppo_lr") cfg.ppo_lr = std::stod(value);
            else if (key == "rollout_len") cfg.rollout_len = std::stoi(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "minibatch_size") cfg.minibatch_size = std::stoi(value);
            else if (key == "entropy_coef") cfg.entropy_coef = std::stod(value);
            else if (key == "normalize_advantages")
                cfg.normalize_advantages = value == "1" || value == "true";
            else
                throw std::invalid_argument("config: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            bad_field(key, "cannot parse value '" + value + "'");
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& c) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) {
        out += k;
        out.push_back(' ');
        out += v;
        out.push_back('\n');
    };
    kv("algorithm", c.algorithm);
    kv("env", c.env);
    kv("combiner", c.combiner);
    kv("lambda", fmt_double(c.lambda));
    kv("energy_mode", c.energy_mode);
    kv("seeds", join_list(c.seeds));
    kv("total_steps", std::to_string(c.total_steps));
    kv("eval_every", std::to_string(c.eval_every));
    kv("eval_episodes", std::to_string(c.eval_episodes));
    kv("log_every", std::to_string(c.log_every));
    kv("out_dir", c.out_dir);
    kv("hidden", join_list(c.hidden));
    kv("gamma", fmt_double(c.gamma));
    kv("entropy_alpha", fmt_double(c.entropy_alpha));
    kv("batch_size", std::to_string(c.batch_size));
    kv("actor_lr", fmt_double(c.actor_lr));
    kv("critic_lr", fmt_double(c.critic_lr));
    kv("actor_update_every", std::to_string(c.actor_update_every));
    kv("critic_update_every", std::to_string(c.critic_update_every));
    kv("polyak_tau", fmt_double(c.polyak_tau));
    kv("warmup_steps", std::to_string(c.warmup_steps));
    kv("replay_capacity", std::to_string(c.replay_capacity));
    kv("twin_q", c.twin_q ? "1" : "0");
    kv("clip_eps", fmt_double(c.clip_eps));
    kv("gae_lambda", fmt_double(c.gae_lambda));
    kv("ppo_lr", fmt_double(c.ppo_lr));
    kv("rollout_len", std::to_string(c.rollout_len));
    kv("epochs", std::to_string(c.epochs));
    kv("minibatch_size", std::to_string(c.minibatch_size));
    kv("entropy_coef", fmt_double(c.entropy_coef));
    kv("normalize_advantages", c.normalize_advantages ? "1" : "0");
    return out;
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << serialize_config(cfg);
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

}  // namespace morl
