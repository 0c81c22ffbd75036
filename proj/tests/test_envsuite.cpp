#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "cfdg/dataset.hpp"

using namespace cfdg;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

EnvSpec custom_pointmass(Vec goal) {
    EnvSpec s = make_env("pointmass");
    s.goal = std::move(goal);
    return s;
}

}  // namespace

TEST_CASE("env_step: goal state with zero action is a fixed point") {
    EnvSpec s = make_env("pointmass");
    StepResult r = env_step(s, s.goal, Vec{0.0, 0.0}, 1);
    CHECK(r.next_state == s.goal);
    CHECK(r.reward == 0.0);
    CHECK(r.terminal);
}

TEST_CASE("env_step: stated dynamics arithmetic") {
    EnvSpec s = custom_pointmass({1.0, 0.0});
    StepResult r = env_step(s, Vec{0.0, 0.0}, Vec{1.0, 0.0}, 1);
    CHECK(r.next_state[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.next_state[1] == 0.0);
    CHECK(r.reward == doctest::Approx(-0.9).epsilon(1e-12));
    CHECK_FALSE(r.terminal);
}

TEST_CASE("env_step: clips to the boundary") {
    EnvSpec s = make_env("pointmass");
    StepResult r = env_step(s, Vec{1.0, 0.0}, Vec{1.0, 0.0}, 1);
    CHECK(r.next_state[0] == 1.0);
}

TEST_CASE("env_step: horizon forces terminal") {
    EnvSpec s = make_env("pointmass");
    StepResult r = env_step(s, Vec{0.0, 0.0}, Vec{0.0, 0.0}, s.horizon);
    CHECK(r.terminal);
}

TEST_CASE("env_step: out-of-bounds action rejected") {
    EnvSpec s = make_env("pointmass");
    CHECK_THROWS_AS((void)env_step(s, Vec{0.0, 0.0}, Vec{1.5, 0.0}, 1), ValidationError);
}

TEST_CASE("fourroom: wall blocks, door passes") {
    EnvSpec s = make_env("fourroom");
    // crossing x=0 at y=-0.2: blocked (no door there)
    StepResult blocked = env_step(s, Vec{-0.05, -0.2}, Vec{1.0, 0.0}, 1);
    CHECK(blocked.next_state[0] == -0.05);
    // crossing x=0 at y=-0.5: door
    StepResult open = env_step(s, Vec{-0.05, -0.5}, Vec{1.0, 0.0}, 1);
    CHECK(open.next_state[0] == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(blocked.reward == 0.0);
}

TEST_CASE("fourroom: sparse reward only at goal") {
    EnvSpec s = make_env("fourroom");
    StepResult r = env_step(s, Vec{0.55, 0.55}, Vec{0.5, 0.5}, 1);
    CHECK(r.reward == 1.0);
    CHECK(r.terminal);
}

TEST_CASE("rollout: zero policy from the goal terminates immediately with zero return") {
    EnvSpec s = make_env("pointmass");
    s.start_lo = s.goal;
    s.start_hi = s.goal;
    Policy zero = [](const Vec&, Rng&) { return Vec{0.0, 0.0}; };
    RolloutResult r = rollout(s, zero, 1, 1);
    CHECK(r.episodes[0].steps.size() == 1);
    CHECK(r.mean_return == 0.0);
}

TEST_CASE("rollout: greedy policy return equals the analytic straight-line sum") {
    EnvSpec s = custom_pointmass({1.0, 0.0});
    s.start_lo = {0.0, 0.0};
    s.start_hi = {0.0, 0.0};
    Policy expert = make_tier_policy(s, "expert");
    RolloutResult r = rollout(s, expert, 5, 1);
    // straight line: positions 0.1, 0.2, ... until within 0.1 of x=1
    double want = 0.0;
    double x = 0.0;
    for (int t = 0; t < s.horizon; ++t) {
        x = std::min(x + s.step_scale, 1.0);
        want -= std::abs(1.0 - x);
        if (std::abs(1.0 - x) < s.goal_radius) break;
    }
    CHECK(r.mean_return == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("rollout: same seed gives identical trajectories") {
    EnvSpec s = make_env("pointmass");
    Policy medium = make_tier_policy(s, "medium");
    RolloutResult a = rollout(s, medium, 123, 3);
    RolloutResult b = rollout(s, medium, 123, 3);
    REQUIRE(a.episodes.size() == b.episodes.size());
    for (size_t e = 0; e < a.episodes.size(); ++e) {
        REQUIRE(a.episodes[e].steps.size() == b.episodes[e].steps.size());
        for (size_t i = 0; i < a.episodes[e].steps.size(); ++i) {
            CHECK(a.episodes[e].steps[i].state == b.episodes[e].steps[i].state);
            CHECK(a.episodes[e].steps[i].action == b.episodes[e].steps[i].action);
            CHECK(a.episodes[e].steps[i].reward == b.episodes[e].steps[i].reward);
        }
    }
}

TEST_CASE("behavior tiers are strictly ordered on pointmass") {
    EnvSpec s = make_env("pointmass");
    double expert = 0.0, medium = 0.0, random = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        expert += rollout(s, make_tier_policy(s, "expert"), seed, 1).mean_return;
        medium += rollout(s, make_tier_policy(s, "medium"), seed, 1).mean_return;
        random += rollout(s, make_tier_policy(s, "random"), seed, 1).mean_return;
    }
    CHECK(expert > medium);
    CHECK(medium > random);
}

TEST_CASE("build_offline_dataset: single tier count and composition") {
    EnvSpec s = make_env("pointmass");
    OfflineDataset ds = build_offline_dataset(s, parse_mix("random"), 1000, 7);
    CHECK(ds.transitions.size() == 1000);
    CHECK(ds.meta.env == "pointmass");
}

TEST_CASE("build_offline_dataset: 50/50 split within one transition") {
    EnvSpec s = make_env("pointmass");
    auto mix = parse_mix("random:0.5,expert:0.5");
    OfflineDataset ds = build_offline_dataset(s, mix, 1001, 3);
    CHECK(ds.transitions.size() == 1001);
}

TEST_CASE("build_offline_dataset: expert tier earns more reward than random tier") {
    EnvSpec s = make_env("pointmass");
    OfflineDataset expert = build_offline_dataset(s, parse_mix("expert"), 2000, 11);
    OfflineDataset random = build_offline_dataset(s, parse_mix("random"), 2000, 11);
    auto mean_reward = [](const OfflineDataset& d) {
        double m = 0.0;
        for (const auto& t : d.transitions) m += t.reward;
        return m / d.transitions.size();
    };
    CHECK(mean_reward(expert) > mean_reward(random));
}

TEST_CASE("build_offline_dataset: empty mix rejected") {
    EnvSpec s = make_env("pointmass");
    CHECK_THROWS_AS((void)build_offline_dataset(s, {}, 10, 1), ValidationError);
}

TEST_CASE("dataset save/load round-trips bit-exactly") {
    EnvSpec s = make_env("pointmass");
    OfflineDataset ds = build_offline_dataset(s, parse_mix("medium"), 500, 21);
    const std::string path = "ds_test.tmp.csv";
    save_dataset(ds, path);
    OfflineDataset back = load_dataset(path, s);
    REQUIRE(back.transitions.size() == ds.transitions.size());
    for (size_t i = 0; i < ds.transitions.size(); ++i) {
        CHECK(back.transitions[i].state == ds.transitions[i].state);
        CHECK(back.transitions[i].action == ds.transitions[i].action);
        CHECK(back.transitions[i].reward == ds.transitions[i].reward);
        CHECK(back.transitions[i].next_state == ds.transitions[i].next_state);
        CHECK(back.transitions[i].terminal == ds.transitions[i].terminal);
    }
    CHECK(back.meta.seed == 21);

    // regenerating from the sidecar seed reproduces the file byte-identically
    const std::string path2 = "ds_test2.tmp.csv";
    save_dataset(build_offline_dataset(s, parse_mix(back.meta.mix), 500, back.meta.seed), path2);
    CHECK(slurp(path) == slurp(path2));
    for (const char* p : {"ds_test.tmp.csv", "ds_test.tmp.csv.meta", "ds_test2.tmp.csv",
                          "ds_test2.tmp.csv.meta"}) {
        std::remove(p);
    }
}

TEST_CASE("normalized_score endpoints, midpoint, affinity") {
    CHECK(normalized_score(-120.0, -120.0, -20.0) == 0.0);
    CHECK(normalized_score(-20.0, -120.0, -20.0) == 100.0);
    CHECK(normalized_score(-70.0, -120.0, -20.0) == 50.0);
    CHECK_THROWS_AS((void)normalized_score(0.0, 5.0, 5.0), ValidationError);
    // order preserving
    CHECK(normalized_score(-30.0, -120.0, -20.0) > normalized_score(-60.0, -120.0, -20.0));
}

TEST_CASE("reference scores are deterministic and ordered") {
    EnvSpec s = make_env("pointmass");
    RefScores a = reference_scores(s);
    RefScores b = reference_scores(s);
    CHECK(a.random_ref == b.random_ref);
    CHECK(a.expert_ref == b.expert_ref);
    CHECK(a.expert_ref > a.random_ref);
}
