#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace morl {

// One logging row. Eval fields are populated only on evaluation rows.
struct MetricsRow {
    std::int64_t global_step = 0;
    std::optional<double> episode_return_task;
    std::optional<double> episode_energy_sum;
    std::optional<double> critic_loss_task;
    std::optional<double> critic_loss_energy;
    std::optional<double> actor_loss_task;
    std::optional<double> actor_loss_energy;
    std::optional<double> beta_scale;
    std::optional<double> cos_g;
    std::optional<double> norm_g_task;
    std::optional<double> norm_g_energy_perp;
    std::optional<double> eval_return_mean;
    std::optional<double> eval_energy_mean;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;
    bool diverged = false;   // run aborted on non-finite state/loss
    std::string abort_reason;

    // Final evaluation summary (deterministic policy).
    double final_eval_return = 0.0;
    double final_eval_energy = 0.0;
};

// Fixed CSV column contract (golden-header tested).
std::string metrics_csv_header();
std::string metrics_row_csv(const MetricsRow& row);
void write_metrics_csv(const MetricsLog& log, const std::string& path);
MetricsLog read_metrics_csv(const std::string& path);

}  // namespace morl
