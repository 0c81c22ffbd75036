#include "cfdg/env.hpp"

#include <cmath>

namespace cfdg {

EnvSpec make_env(const std::string& name) {
    EnvSpec s;
    s.name = name;
    if (name == "pointmass") {
        s.state_dim = 2;
        s.action_dim = 2;
        s.horizon = 60;
        s.goal = {0.8, 0.8};
        s.step_scale = 0.1;
        s.goal_radius = 0.1;
        s.lo = {-1.0, -1.0};
        s.hi = {1.0, 1.0};
        s.start_lo = {-0.9, -0.9};
        s.start_hi = {-0.5, -0.5};
        s.sparse_reward = false;
        s.walls = false;
    } else if (name == "fourroom") {
        s.state_dim = 2;
        s.action_dim = 2;
        s.horizon = 100;
        s.goal = {0.6, 0.6};
        s.step_scale = 0.1;
        s.goal_radius = 0.15;
        s.lo = {-1.0, -1.0};
        s.hi = {1.0, 1.0};
        s.start_lo = {-0.9, -0.9};
        s.start_hi = {-0.4, -0.4};
        s.sparse_reward = true;
        s.walls = true;
    } else {
        throw ValidationError("unknown env '" + name + "' (expected pointmass or fourroom)");
    }
    return s;
}

static double dist_to_goal(const EnvSpec& spec, const Vec& x) {
    double d2 = 0.0;
    for (int i = 0; i < spec.state_dim; ++i) {
        const double d = x[i] - spec.goal[i];
        d2 += d * d;
    }
    return std::sqrt(d2);
}

// Four-room walls sit on the axes with door gaps at +-0.5. A move may not
// cross a wall outside a door; the blocked coordinate keeps its old value.
static bool through_door(double coord_along_wall) {
    return std::abs(std::abs(coord_along_wall) - 0.5) < 0.15;
}

static Vec apply_walls(const Vec& from, Vec to) {
    const bool crosses_x = (from[0] < 0.0) != (to[0] < 0.0);
    const bool crosses_y = (from[1] < 0.0) != (to[1] < 0.0);
    const double mid_y = 0.5 * (from[1] + to[1]);
    const double mid_x = 0.5 * (from[0] + to[0]);
    if (crosses_x && !through_door(mid_y)) to[0] = from[0];
    if (crosses_y && !through_door(mid_x)) to[1] = from[1];
    return to;
}

StepResult env_step(const EnvSpec& spec, const Vec& state, const Vec& action, int step_index) {
    if (static_cast<int>(state.size()) != spec.state_dim ||
        static_cast<int>(action.size()) != spec.action_dim) {
        throw ValidationError("env_step: dimension mismatch");
    }
    for (double a : action) {
        if (!(a >= -1.0 && a <= 1.0)) {
            throw ValidationError("env_step: action outside [-1,1]");
        }
    }
    StepResult r;
    r.next_state.resize(spec.state_dim);
    for (int i = 0; i < spec.state_dim; ++i) {
        r.next_state[i] = clamp(state[i] + spec.step_scale * action[i], spec.lo[i], spec.hi[i]);
    }
    if (spec.walls) r.next_state = apply_walls(state, r.next_state);
    const double d = dist_to_goal(spec, r.next_state);
    const bool at_goal = d < spec.goal_radius;
    r.reward = spec.sparse_reward ? (at_goal ? 1.0 : 0.0) : -d;
    r.terminal = at_goal || step_index >= spec.horizon;
    return r;
}

Vec sample_start(const EnvSpec& spec, Rng& rng) {
    Vec s(spec.state_dim);
    for (int i = 0; i < spec.state_dim; ++i) {
        s[i] = rng.uniform(spec.start_lo[i], spec.start_hi[i]);
    }
    return s;
}

static Vec greedy_action(const EnvSpec& spec, const Vec& state, const Vec& target) {
    Vec a(spec.action_dim);
    for (int i = 0; i < spec.action_dim; ++i) {
        a[i] = clamp((target[i] - state[i]) / spec.step_scale, -1.0, 1.0);
    }
    return a;
}

// Waypoints route the four-room expert through the doors toward the goal.
static Vec fourroom_expert_target(const EnvSpec& spec, const Vec& s) {
    const bool left = s[0] < 0.0;
    const bool bottom = s[1] < 0.0;
    if (left && bottom) return {0.12, -0.5};   // door in the vertical wall
    if (!left && bottom) return {0.5, 0.12};   // door in the horizontal wall
    if (left && !bottom) return {0.12, 0.5};
    return spec.goal;
}

Policy make_tier_policy(const EnvSpec& spec, const std::string& tier, double noise_scale) {
    if (tier == "random") {
        const int adim = spec.action_dim;
        return [adim](const Vec&, Rng& rng) {
            Vec a(adim);
            for (auto& v : a) v = rng.uniform(-1.0, 1.0);
            return a;
        };
    }
    double sigma = 0.0;
    if (tier == "expert") {
        sigma = noise_scale >= 0.0 ? noise_scale : 0.0;
    } else if (tier == "medium") {
        sigma = noise_scale >= 0.0 ? noise_scale : 0.3;
    } else {
        throw ValidationError("unknown behavior tier '" + tier + "'");
    }
    EnvSpec env = spec;
    return [env, sigma](const Vec& s, Rng& rng) {
        Vec target = env.walls ? fourroom_expert_target(env, s) : env.goal;
        Vec a = greedy_action(env, s, target);
        if (sigma > 0.0) {
            for (auto& v : a) v = clamp(v + sigma * rng.normal(), -1.0, 1.0);
        }
        return a;
    };
}

RolloutResult rollout(const EnvSpec& spec, const Policy& policy, uint64_t seed, int n_episodes) {
    if (n_episodes < 1) throw ValidationError("rollout: n_episodes must be >= 1");
    RolloutResult out;
    out.episodes.reserve(n_episodes);
    double total = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
        Rng rng(derive_seed(seed, "episode", static_cast<uint64_t>(e)));
        Trajectory traj;
        Vec state = sample_start(spec, rng);
        for (int t = 1; t <= spec.horizon; ++t) {
            Vec action = policy(state, rng);
            StepResult r = env_step(spec, state, action, t);
            traj.steps.push_back({state, action, r.reward, r.next_state, r.terminal});
            traj.ret += r.reward;
            state = r.next_state;
            if (r.terminal) break;
        }
        total += traj.ret;
        out.episodes.push_back(std::move(traj));
    }
    out.mean_return = total / n_episodes;
    return out;
}

}  // namespace cfdg
