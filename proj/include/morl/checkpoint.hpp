#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morl/params.hpp"

namespace morl {

// Structured text checkpoint: metadata plus named parameter blocks
// (name -> shape + flat float array). Save -> load -> save is
// byte-identical.
struct Checkpoint {
    std::string algorithm;
    std::string env;
    std::string energy_mode = "abs_torque";
    std::vector<int> hidden;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    std::vector<ParamEntry> params;

    static Checkpoint from_store(const ParamStore& store);
    void append_store(const ParamStore& store);
    // Loads values into a store whose layout must match by name and shape.
    void load_into(ParamStore& store) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace morl
