#include "morl/metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace morl {

namespace {

const char* kHeader =
    "global_step,episode_return_task,episode_energy_sum,critic_loss_task,"
    "critic_loss_energy,actor_loss_task,actor_loss_energy,beta_scale,cos_g,"
    "norm_gR,norm_gE_perp,eval_return_mean,eval_energy_mean";

void append_field(std::string& out, const std::optional<double>& v) {
    out.push_back(',');
    if (v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", *v);
        out += buf;
    }
}

std::optional<double> parse_field(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace

std::string metrics_csv_header() { return kHeader; }

std::string metrics_row_csv(const MetricsRow& row) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%" PRId64, row.global_step);
    std::string out = buf;
    append_field(out, row.episode_return_task);
    append_field(out, row.episode_energy_sum);
    append_field(out, row.critic_loss_task);
    append_field(out, row.critic_loss_energy);
    append_field(out, row.actor_loss_task);
    append_field(out, row.actor_loss_energy);
    append_field(out, row.beta_scale);
    append_field(out, row.cos_g);
    append_field(out, row.norm_g_task);
    append_field(out, row.norm_g_energy_perp);
    append_field(out, row.eval_return_mean);
    append_field(out, row.eval_energy_mean);
    return out;
}

void write_metrics_csv(const MetricsLog& log, const std::string& path) {
    std::ofstream f(path, std::ios::binary);  // binary: byte-identical across reruns
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << kHeader << '\n';
    for (const auto& row : log.rows) f << metrics_row_csv(row) << '\n';
}

MetricsLog read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open metrics csv: " + path);
    std::string line;
    if (!std::getline(f, line) || line != kHeader)
        throw std::runtime_error("unexpected metrics csv header in " + path);
    MetricsLog log;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        fields.resize(13);
        MetricsRow row;
        row.global_step = std::stoll(fields[0]);
        row.episode_return_task = parse_field(fields[1]);
        row.episode_energy_sum = parse_field(fields[2]);
        row.critic_loss_task = parse_field(fields[3]);
        row.critic_loss_energy = parse_field(fields[4]);
        row.actor_loss_task = parse_field(fields[5]);
        row.actor_loss_energy = parse_field(fields[6]);
        row.beta_scale = parse_field(fields[7]);
        row.cos_g = parse_field(fields[8]);
        row.norm_g_task = parse_field(fields[9]);
        row.norm_g_energy_perp = parse_field(fields[10]);
        row.eval_return_mean = parse_field(fields[11]);
        row.eval_energy_mean = parse_field(fields[12]);
        log.rows.push_back(row);
    }
    for (auto it = log.rows.rbegin(); it != log.rows.rend(); ++it) {
        if (it->eval_return_mean) {
            log.final_eval_return = *it->eval_return_mean;
            log.final_eval_energy = *it->eval_energy_mean;
            break;
        }
    }
    return log;
}

}  // namespace morl
