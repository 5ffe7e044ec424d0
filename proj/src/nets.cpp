#include "morl/nets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace morl {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)
constexpr double kLog2 = 0.6931471805599453;

// Fan-in uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
std::vector<double> init_uniform(std::int64_t n, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = rng.uniform(-bound, bound);
    return out;
}

Tensor apply_activation(const Tensor& x, Activation act) {
    return act == Activation::Tanh ? tanh(x) : relu(x);
}

void apply_activation_plain(Mat& x, Activation act) {
    if (act == Activation::Tanh)
        x = x.array().tanh();
    else
        x = x.array().max(0.0);
}

// log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), numerically stable.
double log1m_tanh2(double u) {
    return 2.0 * (kLog2 - u - (std::max(-2.0 * u, 0.0) + std::log1p(std::exp(-std::abs(2.0 * u)))));
}

}  // namespace

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(MlpSpec spec, std::string prefix, Rng& init_rng) : spec_(std::move(spec)) {
    if (spec_.input_dim < 1 || spec_.output_dim < 1 || spec_.hidden.empty())
        throw std::invalid_argument("MlpSpec requires positive dims and at least one hidden layer");
    for (int h : spec_.hidden)
        if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");

    int in = spec_.input_dim;
    std::vector<int> dims = spec_.hidden;
    dims.push_back(spec_.output_dim);
    for (std::size_t l = 0; l < dims.size(); ++l) {
        const int out = dims[l];
        const std::string idx = std::to_string(l);
        w_idx_.push_back(store_.add(prefix + ".w" + idx, {in, out},
                                    init_uniform(static_cast<std::int64_t>(in) * out, in, init_rng)));
        b_idx_.push_back(store_.add(prefix + ".b" + idx, {out},
                                    init_uniform(out, in, init_rng)));
        in = out;
    }
}

Tensor Mlp::forward(Tape& tape, const Tensor& x, const BoundParams& bound) const {
    if (x.shape().size() != 2 || x.shape()[1] != spec_.input_dim)
        throw std::invalid_argument("mlp input shape mismatch");
    Tensor h = x;
    for (std::size_t l = 0; l < w_idx_.size(); ++l) {
        h = add(matmul(h, bound.tensors[static_cast<std::size_t>(w_idx_[l])]),
                bound.tensors[static_cast<std::size_t>(b_idx_[l])]);
        if (l + 1 < w_idx_.size()) h = apply_activation(h, spec_.activation);
    }
    (void)tape;
    return h;
}

Mat Mlp::forward_plain(const Mat& x) const {
    if (x.cols() != spec_.input_dim) throw std::invalid_argument("mlp input shape mismatch");
    Mat h = x;
    for (std::size_t l = 0; l < w_idx_.size(); ++l) {
        const auto& w = store_.entry(w_idx_[l]);
        const auto& b = store_.entry(b_idx_[l]);
        Eigen::Map<const Mat> W(w.value.data(), w.shape[0], w.shape[1]);
        Eigen::Map<const Eigen::RowVectorXd> B(b.value.data(), b.shape[0]);
        h = (h * W).rowwise() + B;
        if (l + 1 < w_idx_.size()) apply_activation_plain(h, spec_.activation);
    }
    return h;
}

// ---------------------------------------------------------------------------
// SquashedGaussianPolicy

SquashedGaussianPolicy::SquashedGaussianPolicy(int obs_dim, const std::vector<int>& hidden,
                                               int act_dim, std::vector<double> action_low,
                                               std::vector<double> action_high, Rng& init_rng,
                                               Activation activation)
    : obs_dim_(obs_dim), act_dim_(act_dim), hidden_(hidden), activation_(activation) {
    if (hidden.empty()) throw std::invalid_argument("policy requires at least one hidden layer");
    if (static_cast<int>(action_low.size()) != act_dim ||
        static_cast<int>(action_high.size()) != act_dim)
        throw std::invalid_argument("action bound dims mismatch");
    scale_.resize(static_cast<std::size_t>(act_dim));
    bias_.resize(static_cast<std::size_t>(act_dim));
    for (int d = 0; d < act_dim; ++d) {
        if (!(action_low[static_cast<std::size_t>(d)] < action_high[static_cast<std::size_t>(d)]))
            throw std::invalid_argument("action low must be < high");
        scale_[static_cast<std::size_t>(d)] =
            0.5 * (action_high[static_cast<std::size_t>(d)] - action_low[static_cast<std::size_t>(d)]);
        bias_[static_cast<std::size_t>(d)] =
            0.5 * (action_high[static_cast<std::size_t>(d)] + action_low[static_cast<std::size_t>(d)]);
    }

    int in = obs_dim;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const int out = hidden_[l];
        const std::string idx = std::to_string(l);
        w_idx_.push_back(store_.add("policy.w" + idx, {in, out},
                                    init_uniform(static_cast<std::int64_t>(in) * out, in, init_rng)));
        b_idx_.push_back(store_.add("policy.b" + idx, {out}, init_uniform(out, in, init_rng)));
        in = out;
    }
    w_mu_ = store_.add("policy.w_mu", {in, act_dim},
                       init_uniform(static_cast<std::int64_t>(in) * act_dim, in, init_rng));
    b_mu_ = store_.add("policy.b_mu", {act_dim}, init_uniform(act_dim, in, init_rng));
    w_ls_ = store_.add("policy.w_logstd", {in, act_dim},
                       init_uniform(static_cast<std::int64_t>(in) * act_dim, in, init_rng));
    b_ls_ = store_.add("policy.b_logstd", {act_dim}, init_uniform(act_dim, in, init_rng));
}

Mat SquashedGaussianPolicy::trunk_plain(const Mat& obs) const {
    Mat h = obs;
    for (std::size_t l = 0; l < w_idx_.size(); ++l) {
        const auto& w = store_.entry(w_idx_[l]);
        const auto& b = store_.entry(b_idx_[l]);
        Eigen::Map<const Mat> W(w.value.data(), w.shape[0], w.shape[1]);
        Eigen::Map<const Eigen::RowVectorXd> B(b.value.data(), b.shape[0]);
        h = (h * W).rowwise() + B;
        apply_activation_plain(h, activation_);
    }
    return h;
}

void SquashedGaussianPolicy::dist_plain(const Mat& obs, Mat& mu, Mat& log_std) const {
    Mat h = trunk_plain(obs);
    const auto& wm = store_.entry(w_mu_);
    const auto& bm = store_.entry(b_mu_);
    const auto& wl = store_.entry(w_ls_);
    const auto& bl = store_.entry(b_ls_);
    Eigen::Map<const Mat> Wm(wm.value.data(), wm.shape[0], wm.shape[1]);
    Eigen::Map<const Eigen::RowVectorXd> Bm(bm.value.data(), bm.shape[0]);
    Eigen::Map<const Mat> Wl(wl.value.data(), wl.shape[0], wl.shape[1]);
    Eigen::Map<const Eigen::RowVectorXd> Bl(bl.value.data(), bl.shape[0]);
    mu = (h * Wm).rowwise() + Bm;
    log_std = ((h * Wl).rowwise() + Bl).array().max(kLogStdMin).min(kLogStdMax);
    if (!mu.allFinite() || !log_std.allFinite())
        throw std::runtime_error("non-finite policy network output");
}

double SquashedGaussianPolicy::log_prob_from_presquash(const Eigen::RowVectorXd& u,
                                                       const Eigen::RowVectorXd& mu,
                                                       const Eigen::RowVectorXd& log_std) const {
    double lp = 0.0;
    for (int d = 0; d < act_dim_; ++d) {
        const double sigma = std::exp(log_std[d]);
        const double z = (u[d] - mu[d]) / sigma;
        lp += -0.5 * z * z - log_std[d] - kHalfLog2Pi;
        lp -= std::log(scale_[static_cast<std::size_t>(d)]) + log1m_tanh2(u[d]);
    }
    return lp;
}

std::pair<std::vector<double>, double> SquashedGaussianPolicy::act(std::span<const double> obs,
                                                                   Rng& rng,
                                                                   bool deterministic) const {
    if (static_cast<int>(obs.size()) != obs_dim_)
        throw std::invalid_argument("observation dim mismatch");
    Mat o(1, obs_dim_);
    for (int i = 0; i < obs_dim_; ++i) o(0, i) = obs[static_cast<std::size_t>(i)];
    Mat mu, log_std;
    dist_plain(o, mu, log_std);

    Eigen::RowVectorXd u(act_dim_);
    for (int d = 0; d < act_dim_; ++d)
        u[d] = deterministic ? mu(0, d) : mu(0, d) + std::exp(log_std(0, d)) * rng.normal();

    std::vector<double> action(static_cast<std::size_t>(act_dim_));
    for (int d = 0; d < act_dim_; ++d)
        action[static_cast<std::size_t>(d)] =
            bias_[static_cast<std::size_t>(d)] + scale_[static_cast<std::size_t>(d)] * std::tanh(u[d]);
    const double lp = log_prob_from_presquash(u, mu.row(0), log_std.row(0));
    if (!std::isfinite(lp)) throw std::runtime_error("non-finite log-prob");
    return {std::move(action), lp};
}

SquashedGaussianPolicy::PolicySample SquashedGaussianPolicy::sample_full(
    std::span<const double> obs, Rng& rng) const {
    if (static_cast<int>(obs.size()) != obs_dim_)
        throw std::invalid_argument("observation dim mismatch");
    Mat o(1, obs_dim_);
    for (int i = 0; i < obs_dim_; ++i) o(0, i) = obs[static_cast<std::size_t>(i)];
    Mat mu, log_std;
    dist_plain(o, mu, log_std);
    PolicySample out;
    out.pre_squash.resize(static_cast<std::size_t>(act_dim_));
    out.action.resize(static_cast<std::size_t>(act_dim_));
    Eigen::RowVectorXd u(act_dim_);
    for (int d = 0; d < act_dim_; ++d) {
        u[d] = mu(0, d) + std::exp(log_std(0, d)) * rng.normal();
        out.pre_squash[static_cast<std::size_t>(d)] = u[d];
        out.action[static_cast<std::size_t>(d)] =
            bias_[static_cast<std::size_t>(d)] + scale_[static_cast<std::size_t>(d)] * std::tanh(u[d]);
    }
    out.log_prob = log_prob_from_presquash(u, mu.row(0), log_std.row(0));
    if (!std::isfinite(out.log_prob)) throw std::runtime_error("non-finite log-prob");
    return out;
}

Tensor SquashedGaussianPolicy::trunk_forward(Tape& tape, const Tensor& obs,
                                             const BoundParams& bound) const {
    Tensor h = obs;
    for (std::size_t l = 0; l < w_idx_.size(); ++l) {
        h = add(matmul(h, bound.tensors[static_cast<std::size_t>(w_idx_[l])]),
                bound.tensors[static_cast<std::size_t>(b_idx_[l])]);
        h = apply_activation(h, activation_);
    }
    (void)tape;
    return h;
}

std::pair<Tensor, Tensor> SquashedGaussianPolicy::forward_dist(Tape& tape, const Tensor& obs,
                                                               const BoundParams& bound) const {
    Tensor h = trunk_forward(tape, obs, bound);
    Tensor mu = add(matmul(h, bound.tensors[static_cast<std::size_t>(w_mu_)]),
                    bound.tensors[static_cast<std::size_t>(b_mu_)]);
    Tensor log_std = clamp(add(matmul(h, bound.tensors[static_cast<std::size_t>(w_ls_)]),
                               bound.tensors[static_cast<std::size_t>(b_ls_)]),
                           kLogStdMin, kLogStdMax);
    return {mu, log_std};
}

std::pair<Tensor, Tensor> SquashedGaussianPolicy::sample_with_noise(Tape& tape, const Tensor& mu,
                                                                    const Tensor& log_std,
                                                                    const Tensor& xi) const {
    const int batch = mu.shape()[0];
    Tensor sigma = exp(log_std);
    Tensor u = add(mu, mul(sigma, xi));
    Tensor squashed = tanh(u);
    Tensor scale_row({act_dim_}, scale_);
    Tensor bias_row({act_dim_}, bias_);
    Tensor action = add(mul(squashed, scale_row), bias_row);

    // log N(u; mu, sigma) = -0.5*xi^2 - log_std - 0.5*log(2*pi), with xi frozen.
    Tensor half_xi2 = scale(square(xi), -0.5);
    Tensor gauss = add_scalar(sub(half_xi2, log_std), -kHalfLog2Pi);
    // Squash correction: log(1 - tanh(u)^2) = 2*(log2 - u - softplus(-2u)).
    Tensor corr = scale(sub(add_scalar(scale(u, -1.0), kLog2), softplus(scale(u, -2.0))), 2.0);
    double log_scale_sum = 0.0;
    for (double s : scale_) log_scale_sum += std::log(s);
    Tensor per_dim = sub(gauss, corr);
    Tensor log_prob = add_scalar(row_sum(per_dim), -log_scale_sum);
    (void)tape;
    (void)batch;
    return {action, log_prob};
}

Tensor SquashedGaussianPolicy::log_prob_of_presquash(Tape& tape, const Tensor& u_const,
                                                     const Tensor& mu,
                                                     const Tensor& log_std) const {
    Tensor sigma = exp(log_std);
    // z = (u - mu) / sigma, built as (u - mu) * exp(-log_std)
    Tensor z = mul(sub(u_const, mu), exp(scale(log_std, -1.0)));
    Tensor gauss = add_scalar(sub(scale(square(z), -0.5), log_std), -kHalfLog2Pi);
    // Correction terms depend only on the frozen u; constant w.r.t. parameters
    // but included so the value matches log_prob_from_presquash exactly.
    std::vector<double> corr(u_const.data().size());
    for (std::size_t i = 0; i < corr.size(); ++i) corr[i] = log1m_tanh2(u_const.data()[i]);
    Tensor corr_const(u_const.shape(), std::move(corr));
    double log_scale_sum = 0.0;
    for (double s : scale_) log_scale_sum += std::log(s);
    (void)tape;
    return add_scalar(row_sum(sub(gauss, corr_const)), -log_scale_sum);
}

Tensor SquashedGaussianPolicy::presquash_entropy(const Tensor& log_std) const {
    // H = sum_d (log_std_d + 0.5*log(2*pi*e)) per sample.
    return add_scalar(row_sum(log_std),
                      act_dim_ * (kHalfLog2Pi + 0.5));
}

// ---------------------------------------------------------------------------
// Critics

QNetwork::QNetwork(int obs_dim, int act_dim, const std::vector<int>& hidden, Rng& init_rng,
                   Activation activation)
    : net_(MlpSpec{obs_dim + act_dim, hidden, 1, activation}, "q", init_rng) {}

Tensor QNetwork::forward(Tape& tape, const Tensor& obs, const Tensor& act,
                         const BoundParams& bound) const {
    return net_.forward(tape, concat_cols(obs, act), bound);
}

Mat QNetwork::forward_plain(const Mat& obs, const Mat& act) const {
    Mat x(obs.rows(), obs.cols() + act.cols());
    x << obs, act;
    return net_.forward_plain(x);
}

ValueNetwork::ValueNetwork(int obs_dim, const std::vector<int>& hidden, Rng& init_rng,
                           Activation activation)
    : net_(MlpSpec{obs_dim, hidden, 1, activation}, "v", init_rng) {}

void polyak_update(ParamStore& target, const ParamStore& online, double tau) {
    if (target.count() != online.count() || target.flat_size() != online.flat_size())
        throw std::invalid_argument("polyak layout mismatch");
    for (std::size_t i = 0; i < target.count(); ++i) {
        auto& te = target.entry(static_cast<int>(i));
        const auto& oe = online.entry(static_cast<int>(i));
        if (te.shape != oe.shape) throw std::invalid_argument("polyak layout mismatch");
        for (std::size_t j = 0; j < te.value.size(); ++j)
            te.value[j] = (1.0 - tau) * te.value[j] + tau * oe.value[j];
    }
}

}  // namespace morl
