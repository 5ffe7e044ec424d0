#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "morl/tensor.hpp"

namespace morl {

// One named parameter block of a network.
struct ParamEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<double> value;
};

// Ordered collection of parameter blocks. The flattening layout (name, shape,
// offset) is a pure function of the insertion order, so it is identical
// across runs and platforms for the same network definition.
class ParamStore {
public:
    int add(std::string name, std::vector<int> shape, std::vector<double> init);

    std::size_t count() const { return entries_.size(); }
    std::int64_t flat_size() const { return total_; }
    const ParamEntry& entry(int idx) const { return entries_[static_cast<std::size_t>(idx)]; }
    ParamEntry& entry(int idx) { return entries_[static_cast<std::size_t>(idx)]; }
    std::int64_t offset(int idx) const { return offsets_[static_cast<std::size_t>(idx)]; }

    std::vector<double> flatten() const;
    void load_flat(std::span<const double> flat);

private:
    std::vector<ParamEntry> entries_;
    std::vector<std::int64_t> offsets_;
    std::int64_t total_ = 0;
};

// Parameters of one store registered on a tape for one forward pass.
// trainable=false binds constants (no gradient flow).
struct BoundParams {
    std::vector<Tensor> tensors;  // one per ParamStore entry, same order
    bool trainable = false;
};

BoundParams bind_params(Tape& tape, const ParamStore& store, bool trainable);

// Flat gradient of the last backward, in ParamStore layout. Requires
// trainable bindings.
std::vector<double> collect_grad(const Tape& tape, const BoundParams& bound,
                                 const ParamStore& store);

// Adam with bias correction; weight decay is intentionally absent.
class Adam {
public:
    Adam(std::int64_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step(std::span<double> params, std::span<const double> grad);

    std::int64_t step_count() const { return t_; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace morl
