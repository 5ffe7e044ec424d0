#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

#include "morl/params.hpp"
#include "morl/rng.hpp"
#include "morl/tensor.hpp"

namespace morl {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class Activation { Tanh, Relu };

struct MlpSpec {
    int input_dim = 0;
    std::vector<int> hidden;  // at least one layer
    int output_dim = 0;
    Activation activation = Activation::Relu;
};

// Fully connected network. Two forward paths: a tape path for gradients and
// a plain Eigen path for rollouts/targets where no gradient is needed.
class Mlp {
public:
    Mlp() = default;
    Mlp(MlpSpec spec, std::string prefix, Rng& init_rng);

    Tensor forward(Tape& tape, const Tensor& x, const BoundParams& bound) const;
    Mat forward_plain(const Mat& x) const;

    const MlpSpec& spec() const { return spec_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

private:
    MlpSpec spec_;
    ParamStore store_;
    std::vector<int> w_idx_, b_idx_;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Tanh-squashed Gaussian policy with state-dependent clamped log-std and a
// per-dimension affine map onto the action bounds. Sampled actions are
// strictly inside the bounds.
class SquashedGaussianPolicy {
public:
    SquashedGaussianPolicy() = default;
    SquashedGaussianPolicy(int obs_dim, const std::vector<int>& hidden, int act_dim,
                           std::vector<double> action_low, std::vector<double> action_high,
                           Rng& init_rng, Activation activation = Activation::Relu);

    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    const std::vector<double>& action_scale() const { return scale_; }
    const std::vector<double>& action_bias() const { return bias_; }

    // ---- plain (no gradient) path ----
    // Distribution parameters for a batch of observations.
    void dist_plain(const Mat& obs, Mat& mu, Mat& log_std) const;
    // Samples an action; log_prob includes the tanh change of variables.
    std::pair<std::vector<double>, double> act(std::span<const double> obs, Rng& rng,
                                               bool deterministic = false) const;
    struct PolicySample {
        std::vector<double> action;
        std::vector<double> pre_squash;  // Gaussian sample before tanh
        double log_prob = 0.0;
    };
    PolicySample sample_full(std::span<const double> obs, Rng& rng) const;
    // Log-density of a pre-squash point u (mu, log_std from dist_plain).
    double log_prob_from_presquash(const Eigen::RowVectorXd& u, const Eigen::RowVectorXd& mu,
                                   const Eigen::RowVectorXd& log_std) const;

    // ---- tape path ----
    // (mu, log_std) tensors for a tracked forward pass.
    std::pair<Tensor, Tensor> forward_dist(Tape& tape, const Tensor& obs,
                                           const BoundParams& bound) const;
    // Reparameterized sample with frozen noise: u = mu + exp(log_std) * xi.
    // Returns (action, log_prob (batch,1)).
    std::pair<Tensor, Tensor> sample_with_noise(Tape& tape, const Tensor& mu,
                                                const Tensor& log_std,
                                                const Tensor& xi) const;
    // Log-prob of a fixed pre-squash point u_const under (mu, log_std);
    // gradient flows through the distribution parameters only (PPO ratios).
    Tensor log_prob_of_presquash(Tape& tape, const Tensor& u_const, const Tensor& mu,
                                 const Tensor& log_std) const;
    // Per-sample Gaussian entropy of the pre-squash distribution, (batch,1).
    Tensor presquash_entropy(const Tensor& log_std) const;

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

private:
    int obs_dim_ = 0, act_dim_ = 0;
    std::vector<int> hidden_;
    Activation activation_ = Activation::Relu;
    std::vector<double> scale_, bias_;
    ParamStore store_;
    std::vector<int> w_idx_, b_idx_;  // trunk
    int w_mu_ = -1, b_mu_ = -1, w_ls_ = -1, b_ls_ = -1;

    Tensor trunk_forward(Tape& tape, const Tensor& obs, const BoundParams& bound) const;
    Mat trunk_plain(const Mat& obs) const;
};

// State-action critic: scalar output over concat(state, action).
class QNetwork {
public:
    QNetwork() = default;
    QNetwork(int obs_dim, int act_dim, const std::vector<int>& hidden, Rng& init_rng,
             Activation activation = Activation::Relu);

    Tensor forward(Tape& tape, const Tensor& obs, const Tensor& act,
                   const BoundParams& bound) const;
    Mat forward_plain(const Mat& obs, const Mat& act) const;

    ParamStore& params() { return net_.params(); }
    const ParamStore& params() const { return net_.params(); }

private:
    Mlp net_;
};

// State value critic (PPO value heads).
class ValueNetwork {
public:
    ValueNetwork() = default;
    ValueNetwork(int obs_dim, const std::vector<int>& hidden, Rng& init_rng,
                 Activation activation = Activation::Relu);

    Tensor forward(Tape& tape, const Tensor& obs, const BoundParams& bound) const {
        return net_.forward(tape, obs, bound);
    }
    Mat forward_plain(const Mat& obs) const { return net_.forward_plain(obs); }

    ParamStore& params() { return net_.params(); }
    const ParamStore& params() const { return net_.params(); }

private:
    Mlp net_;
};

// target <- (1 - tau) * target + tau * online, elementwise over the flat
// parameter vectors. Layouts must match exactly.
void polyak_update(ParamStore& target, const ParamStore& online, double tau);

}  // namespace morl
