#pragma once

#include <string>
#include <vector>

#include "cfdg/env.hpp"

namespace cfdg {

struct TierSpec {
    std::string policy;   // expert | medium | random
    double fraction = 1.0;
    double noise_scale = -1.0;  // <0 = tier default
};

// "medium" or "expert:0.5,random:0.5" or "expert:0.6:0.1,random:0.4"
std::vector<TierSpec> parse_mix(const std::string& text);
std::string mix_to_string(const std::vector<TierSpec>& mix);

struct DatasetMeta {
    std::string env;
    std::string mix;
    uint64_t seed = 0;
    size_t size = 0;
};

struct OfflineDataset {
    std::vector<Transition> transitions;
    DatasetMeta meta;
};

// Exactly n transitions; per-tier counts honored within +-1 via largest
// remainder. Regenerating with the same arguments is byte-identical.
OfflineDataset build_offline_dataset(const EnvSpec& spec, const std::vector<TierSpec>& mix,
                                     size_t n, uint64_t seed);

// CSV with header s0..,a0..,r,ns0..,terminal plus a <path>.meta sidecar.
void save_dataset(const OfflineDataset& ds, const std::string& path);
OfflineDataset load_dataset(const std::string& path, const EnvSpec& spec);

// D4RL-style 0-100 rescaling.
double normalized_score(double raw, double random_ref, double expert_ref);

struct RefScores {
    double random_ref = 0.0;
    double expert_ref = 0.0;
};

// Deterministic normalization references for an environment: mean returns of
// the random and expert tiers over 20 fixed-seed episodes.
RefScores reference_scores(const EnvSpec& spec);

}  // namespace cfdg
