#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "morl/rng.hpp"

namespace morl {

// Off-policy experience record carrying both reward channels.
struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    double reward_task = 0.0;
    double reward_energy = 0.0;
    std::vector<double> next_state;
    bool terminated = false;
};

// Ring buffer with uniform with-replacement sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("capacity must be positive");
    }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
        }
        head_ = (head_ + 1) % capacity_;
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return data_[i]; }

    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
        if (data_.size() < batch) throw std::runtime_error("replay buffer smaller than batch");
        std::vector<std::size_t> idx(batch);
        for (auto& i : idx) i = rng.index(data_.size());
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> data_;
};

}  // namespace morl
