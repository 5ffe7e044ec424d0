#include "morl/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace morl {

namespace {

const char* kMagic = "morl-checkpoint v1";

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Checkpoint Checkpoint::from_store(const ParamStore& store) {
    Checkpoint c;
    c.append_store(store);
    return c;
}

void Checkpoint::append_store(const ParamStore& store) {
    for (std::size_t i = 0; i < store.count(); ++i)
        params.push_back(store.entry(static_cast<int>(i)));
}

void Checkpoint::load_into(ParamStore& store) const {
    std::unordered_map<std::string, const ParamEntry*> by_name;
    for (const auto& p : params) by_name[p.name] = &p;
    for (std::size_t i = 0; i < store.count(); ++i) {
        auto& e = store.entry(static_cast<int>(i));
        auto it = by_name.find(e.name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint missing parameter '" + e.name + "'");
        if (it->second->shape != e.shape)
            throw std::runtime_error("checkpoint shape mismatch for '" + e.name + "'");
        e.value = it->second->value;
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << kMagic << '\n';
    f << "meta algorithm " << ckpt.algorithm << '\n';
    f << "meta env " << ckpt.env << '\n';
    f << "meta energy_mode " << ckpt.energy_mode << '\n';
    f << "meta hidden";
    for (int h : ckpt.hidden) f << ' ' << h;
    f << '\n';
    f << "meta step " << ckpt.step << '\n';
    f << "meta seed " << ckpt.seed << '\n';
    for (const auto& p : ckpt.params) {
        f << "param " << p.name << ' ' << p.shape.size();
        for (int d : p.shape) f << ' ' << d;
        f << ' ' << p.value.size();
        for (double v : p.value) f << ' ' << fmt_double(v);
        f << '\n';
    }
    f << "end\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line) || line != kMagic)
        throw std::runtime_error("not a checkpoint file: " + path);
    Checkpoint c;
    while (std::getline(f, line)) {
        if (line == "end") break;
        std::stringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "meta") {
            std::string key;
            ss >> key;
            if (key == "algorithm") ss >> c.algorithm;
            else if (key == "env") ss >> c.env;
            else if (key == "energy_mode") ss >> c.energy_mode;
            else if (key == "hidden") {
                int h;
                while (ss >> h) c.hidden.push_back(h);
            } else if (key == "step") ss >> c.step;
            else if (key == "seed") ss >> c.seed;
            else throw std::runtime_error("unknown checkpoint meta key: " + key);
        } else if (tag == "param") {
            ParamEntry p;
            std::size_t ndims = 0, count = 0;
            ss >> p.name >> ndims;
            p.shape.resize(ndims);
            for (auto& d : p.shape) ss >> d;
            ss >> count;
            p.value.resize(count);
            for (auto& v : p.value) ss >> v;
            if (!ss) throw std::runtime_error("truncated checkpoint param: " + p.name);
            c.params.push_back(std::move(p));
        } else {
            throw std::runtime_error("unknown checkpoint line tag: " + tag);
        }
    }
    return c;
}

}  // namespace morl
