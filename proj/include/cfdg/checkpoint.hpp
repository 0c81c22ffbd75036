#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cfdg/mlp.hpp"

namespace cfdg {

// Plain-text parameter container. Each network is stored as a flat list of
// (layer index, role, shape, row-major values); named vectors and string
// metadata ride along. Section order is preserved so saves are byte-stable.
struct Checkpoint {
    std::vector<std::pair<std::string, MlpParams>> nets;
    std::vector<std::pair<std::string, Vec>> vectors;
    std::vector<std::pair<std::string, std::string>> meta;

    void add_net(std::string name, MlpParams p) { nets.emplace_back(std::move(name), std::move(p)); }
    void add_vec(std::string name, Vec v) { vectors.emplace_back(std::move(name), std::move(v)); }
    void add_meta(std::string key, std::string value) { meta.emplace_back(std::move(key), std::move(value)); }

    const MlpParams& net(const std::string& name) const;
    const Vec& vec(const std::string& name) const;
    std::string meta_value(const std::string& key) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace cfdg
