#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cfdg/common.hpp"
#include "cfdg/rng.hpp"

namespace cfdg {

// One environment step. `terminal` marks episode ends so TD targets can mask
// the bootstrap term.
struct Transition {
    Vec state;
    Vec action;
    double reward = 0.0;
    Vec next_state;
    bool terminal = false;
};

struct EnvSpec {
    std::string name;
    int state_dim = 2;
    int action_dim = 2;
    int horizon = 60;
    Vec goal;
    double step_scale = 0.1;
    double goal_radius = 0.1;
    Vec lo, hi;            // per-dimension state bounds
    Vec start_lo, start_hi;  // initial-state region, sampled uniformly
    bool sparse_reward = false;
    bool walls = false;  // four-room layout
};

// Built-ins: "pointmass" (dense reward -|next - goal|) and "fourroom"
// (sparse 0/1 reward behind walls with door gaps).
EnvSpec make_env(const std::string& name);

struct StepResult {
    Vec next_state;
    double reward = 0.0;
    bool terminal = false;
};

// Deterministic dynamics: next = clip(state + step_scale * action), terminal
// when within goal_radius of the goal or when step_index reaches the horizon.
// step_index counts the step being taken, starting at 1.
StepResult env_step(const EnvSpec& spec, const Vec& state, const Vec& action, int step_index);

Vec sample_start(const EnvSpec& spec, Rng& rng);

using Policy = std::function<Vec(const Vec& state, Rng& rng)>;

// Behavior tiers: expert = scripted greedy-to-goal, medium = expert with
// Gaussian action noise (sigma 0.3), random = uniform actions.
Policy make_tier_policy(const EnvSpec& spec, const std::string& tier, double noise_scale = -1.0);

struct Trajectory {
    std::vector<Transition> steps;
    double ret = 0.0;  // undiscounted return
};

struct RolloutResult {
    std::vector<Trajectory> episodes;
    double mean_return = 0.0;
};

RolloutResult rollout(const EnvSpec& spec, const Policy& policy, uint64_t seed, int n_episodes);

}  // namespace cfdg
