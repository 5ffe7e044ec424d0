#include "morl/params.hpp"

#include <cmath>
#include <stdexcept>

namespace morl {

int ParamStore::add(std::string name, std::vector<int> shape, std::vector<double> init) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    if (static_cast<std::int64_t>(init.size()) != n)
        throw std::invalid_argument("parameter init length does not match shape");
    offsets_.push_back(total_);
    total_ += n;
    entries_.push_back({std::move(name), std::move(shape), std::move(init)});
    return static_cast<int>(entries_.size()) - 1;
}

std::vector<double> ParamStore::flatten() const {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(total_));
    for (const auto& e : entries_) flat.insert(flat.end(), e.value.begin(), e.value.end());
    return flat;
}

void ParamStore::load_flat(std::span<const double> flat) {
    if (static_cast<std::int64_t>(flat.size()) != total_)
        throw std::invalid_argument("flat vector length does not match store");
    std::size_t pos = 0;
    for (auto& e : entries_) {
        for (auto& v : e.value) v = flat[pos++];
    }
}

BoundParams bind_params(Tape& tape, const ParamStore& store, bool trainable) {
    BoundParams bound;
    bound.trainable = trainable;
    bound.tensors.reserve(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) {
        const auto& e = store.entry(static_cast<int>(i));
        if (trainable) {
            bound.tensors.push_back(tape.leaf(e.shape, e.value));
        } else {
            bound.tensors.push_back(Tensor(e.shape, e.value));
        }
    }
    return bound;
}

std::vector<double> collect_grad(const Tape& tape, const BoundParams& bound,
                                 const ParamStore& store) {
    if (!bound.trainable) throw std::invalid_argument("gradients require trainable bindings");
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(store.flat_size()));
    for (const auto& t : bound.tensors) {
        auto g = tape.grad(t);
        flat.insert(flat.end(), g.begin(), g.end());
    }
    return flat;
}

Adam::Adam(std::int64_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(static_cast<std::size_t>(n), 0.0), v_(static_cast<std::size_t>(n), 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("adam length mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
}

}  // namespace morl
