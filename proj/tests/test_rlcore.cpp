#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cfdg/dataset.hpp"
#include "cfdg/rlcore.hpp"

using namespace cfdg;

namespace {

// Nets that output a constant: zero weights, bias on the output layer.
MlpParams constant_net(int in_dim, int out_dim, double value) {
    Rng rng(0);
    MlpParams p = make_mlp(in_dim, out_dim, 4, 1, false, rng);
    scale_params(p, 0.0);
    for (auto& b : p.layers.back().b) b = value;
    return p;
}

AgentParams toy_agent(int state_dim, int action_dim, uint64_t seed) {
    Rng rng(seed);
    return make_agent(state_dim, action_dim, 8, 2, rng);
}

Batch random_batch(int n, int state_dim, int action_dim, uint64_t seed,
                   Source src = Source::Offline) {
    Rng rng(seed);
    std::vector<TaggedTransition> items(n);
    for (auto& it : items) {
        Transition t;
        t.state.resize(state_dim);
        t.action.resize(action_dim);
        t.next_state.resize(state_dim);
        for (auto& v : t.state) v = rng.normal();
        for (auto& v : t.action) v = rng.uniform(-1.0, 1.0);
        for (auto& v : t.next_state) v = rng.normal();
        t.reward = rng.normal();
        t.terminal = rng.uniform() < 0.1;
        it = {t, src};
    }
    return make_batch(items);
}

bool params_equal(const MlpParams& a, const MlpParams& b) {
    for (size_t k = 0; k < a.layers.size(); ++k) {
        if (a.layers[k].w.a != b.layers[k].w.a) return false;
        if (a.layers[k].b != b.layers[k].b) return false;
    }
    return true;
}

// absolute error for O(1)-and-below entries, relative above
double max_rel_diff(const MlpParams& a, const MlpParams& b) {
    double worst = 0.0;
    for (size_t k = 0; k < a.layers.size(); ++k) {
        for (size_t i = 0; i < a.layers[k].w.size(); ++i) {
            const double x = a.layers[k].w.a[i], y = b.layers[k].w.a[i];
            const double scale = std::max({std::abs(x), std::abs(y), 1.0});
            worst = std::max(worst, std::abs(x - y) / scale);
        }
        for (size_t i = 0; i < a.layers[k].b.size(); ++i) {
            const double x = a.layers[k].b[i], y = b.layers[k].b[i];
            const double scale = std::max({std::abs(x), std::abs(y), 1.0});
            worst = std::max(worst, std::abs(x - y) / scale);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("select_lambda follows the online/offline gate") {
    CHECK(select_lambda(Source::Online) == 0);
    CHECK(select_lambda(Source::Offline) == 1);
    CHECK(select_lambda(Source::SynOnline) == 0);
    CHECK(select_lambda(Source::SynOffline) == 1);
}

TEST_CASE("td_loss: zero rewards and zero critics give zero loss") {
    AgentParams a = toy_agent(2, 2, 1);
    a.critic = constant_net(4, 1, 0.0);
    a.target_critic = a.critic;
    Batch b = random_batch(8, 2, 2, 2);
    std::fill(b.rewards.begin(), b.rewards.end(), 0.0);
    LossGrads out = td_loss(b, a, 0.9);
    CHECK(out.loss == 0.0);
}

TEST_CASE("td_loss: single-transition arithmetic") {
    AgentParams a = toy_agent(2, 2, 1);
    a.critic = constant_net(4, 1, 2.0);
    a.target_critic = constant_net(4, 1, 2.0);
    std::vector<TaggedTransition> items(1);
    items[0].t = {{0.1, 0.2}, {0.0, 0.0}, 1.0, {0.3, 0.4}, false};
    LossGrads out = td_loss(make_batch(items), a, 0.9);
    CHECK(out.loss == doctest::Approx(0.64).epsilon(1e-12));

    items[0].t.terminal = true;  // bootstrap masked: residual = 1 - 2
    out = td_loss(make_batch(items), a, 0.9);
    CHECK(out.loss == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("td_loss matches a per-transition scalar oracle") {
    AgentParams a = toy_agent(3, 2, 5);
    Batch b = random_batch(32, 3, 2, 6);
    const double gamma = 0.97;
    LossGrads out = td_loss(b, a, gamma);
    double want = 0.0;
    for (int i = 0; i < b.size(); ++i) {
        Vec s = to_vec_row(b.states, i);
        Vec act = to_vec_row(b.actions, i);
        Vec ns = to_vec_row(b.next_states, i);
        Vec pi = policy_action(a.policy, ns);
        Vec in = ns;
        in.insert(in.end(), pi.begin(), pi.end());
        const double qn = mlp_forward(a.target_critic, in)[0];
        Vec qin = s;
        qin.insert(qin.end(), act.begin(), act.end());
        const double q = mlp_forward(a.critic, qin)[0];
        const double target = b.rewards[i] + gamma * (b.terminals[i] ? 0.0 : 1.0) * qn;
        want += (target - q) * (target - q);
    }
    want /= b.size();
    CHECK(out.loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("cql_regularizer: constant critic cancels exactly") {
    AgentParams a = toy_agent(2, 2, 7);
    a.critic = constant_net(4, 1, 3.7);
    Batch b = random_batch(16, 2, 2, 8);
    Rng rng(9);
    LossGrads out = cql_regularizer(b, a, 4, 0.2, rng);
    CHECK(out.loss == 0.0);
}

TEST_CASE("cql_regularizer: sampled actions equal to data actions cancel") {
    AgentParams a = toy_agent(2, 2, 10);
    a.policy = constant_net(2, 2, 0.0);  // tanh(0) = 0
    Batch b = random_batch(16, 2, 2, 11);
    b.actions.fill(0.0);
    Rng rng(12);
    LossGrads out = cql_regularizer(b, a, 3, 0.0, rng);
    CHECK(out.loss == doctest::Approx(0.0).epsilon(1e-15));
    for (const auto& l : out.grads.layers) {
        for (double v : l.w.a) CHECK(std::abs(v) <= 1e-14);
    }
}

TEST_CASE("cql_regularizer matches a scalar re-enumeration of its sampled actions") {
    AgentParams a = toy_agent(2, 2, 13);
    Batch b = random_batch(3, 2, 2, 14);
    const int n = 2;
    const double sigma = 0.25;
    const uint64_t seed = 15;
    Rng rng(seed);
    LossGrads out = cql_regularizer(b, a, n, sigma, rng);

    // replay the same noise stream and assemble the loss with scalar loops
    Rng replay(seed);
    Mat pi = policy_action_batch(a.policy, b.states);
    std::vector<std::vector<Vec>> sampled(n, std::vector<Vec>(b.size()));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < b.size(); ++i) {
            Vec act(2);
            for (int d = 0; d < 2; ++d) {
                act[d] = clamp(pi.at(i, d) + sigma * replay.normal(), -1.0, 1.0);
            }
            sampled[j][i] = act;
        }
    }
    double want = 0.0;
    for (int i = 0; i < b.size(); ++i) {
        double mean_q = 0.0;
        for (int j = 0; j < n; ++j) {
            Vec in = to_vec_row(b.states, i);
            in.insert(in.end(), sampled[j][i].begin(), sampled[j][i].end());
            mean_q += mlp_forward(a.critic, in)[0];
        }
        mean_q /= n;
        Vec in = to_vec_row(b.states, i);
        Vec act = to_vec_row(b.actions, i);
        in.insert(in.end(), act.begin(), act.end());
        want += mean_q - mlp_forward(a.critic, in)[0];
    }
    want /= b.size();
    CHECK(out.loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("expectile_loss formula values") {
    CHECK(expectile_loss(1.0, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(expectile_loss(-1.0, 0.7) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(expectile_loss(2.0, 0.7) == doctest::Approx(2.8).epsilon(1e-15));
    CHECK_THROWS_AS((void)expectile_loss(1.0, 0.0), ValidationError);
    CHECK_THROWS_AS((void)expectile_loss(1.0, 1.0), ValidationError);
}

TEST_CASE("awr_policy_loss: zero advantage means unit weights") {
    AgentParams a = toy_agent(2, 2, 16);
    a.target_critic = constant_net(4, 1, 1.5);
    a.value = constant_net(2, 1, 1.5);
    Batch b = random_batch(16, 2, 2, 17);
    LossGrads out = awr_policy_loss(b, a, 3.0);
    double want = 0.0;
    for (int i = 0; i < b.size(); ++i) {
        Vec pi = policy_action(a.policy, to_vec_row(b.states, i));
        for (int d = 0; d < 2; ++d) {
            const double diff = pi[d] - b.actions.at(i, d);
            want += diff * diff;
        }
    }
    want /= b.size();
    CHECK(out.loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("awr_policy_loss: weight clipped at 100 for large advantage") {
    AgentParams a = toy_agent(2, 2, 18);
    a.target_critic = constant_net(4, 1, 10.0);
    a.value = constant_net(2, 1, 0.0);
    std::vector<TaggedTransition> items(1);
    items[0].t = {{0.1, 0.2}, {0.3, -0.4}, 0.0, {0.0, 0.0}, false};
    Batch b = make_batch(items);
    LossGrads out = awr_policy_loss(b, a, 3.0);  // exp(30) >> 100
    Vec pi = policy_action(a.policy, Vec{0.1, 0.2});
    double err = 0.0;
    for (int d = 0; d < 2; ++d) err += (pi[d] - items[0].t.action[d]) * (pi[d] - items[0].t.action[d]);
    CHECK(out.loss == doctest::Approx(100.0 * err).epsilon(1e-12));
}

TEST_CASE("awr_policy_loss matches a per-element oracle and finite differences") {
    AgentParams a = toy_agent(3, 2, 19);
    Batch b = random_batch(16, 3, 2, 20);
    const double beta = 2.0;
    LossGrads out = awr_policy_loss(b, a, beta);

    auto loss_of = [&](const AgentParams& agent) {
        double total = 0.0;
        for (int i = 0; i < b.size(); ++i) {
            Vec s = to_vec_row(b.states, i);
            Vec act = to_vec_row(b.actions, i);
            Vec in = s;
            in.insert(in.end(), act.begin(), act.end());
            const double q = mlp_forward(agent.target_critic, in)[0];
            const double v = mlp_forward(agent.value, s)[0];
            const double w = std::min(std::exp(beta * (q - v)), 100.0);
            Vec pi = policy_action(agent.policy, s);
            for (int d = 0; d < 2; ++d) total += w * (pi[d] - act[d]) * (pi[d] - act[d]);
        }
        return total / b.size();
    };
    CHECK(out.loss == doctest::Approx(loss_of(a)).epsilon(1e-12));

    // finite-difference check on a few policy weights
    const double h = 1e-6;
    AgentParams pert = a;
    for (size_t k = 0; k < pert.policy.layers.size(); ++k) {
        for (size_t i = 0; i < std::min<size_t>(pert.policy.layers[k].w.size(), 6); ++i) {
            double& slot = pert.policy.layers[k].w.a[i];
            const double save = slot;
            slot = save + h;
            const double lp = loss_of(pert);
            slot = save - h;
            const double lm = loss_of(pert);
            slot = save;
            const double fd = (lp - lm) / (2.0 * h);
            const double analytic = out.grads.layers[k].w.a[i];
            if (std::abs(analytic) > 1e-8) {
                CHECK(std::abs(fd - analytic) / std::abs(analytic) < 1e-4);
            }
        }
    }
}

TEST_CASE("awr gradients only touch the policy network") {
    AgentParams a = toy_agent(2, 2, 21);
    Batch b = random_batch(8, 2, 2, 22);
    AgentState st = make_agent_state(a);
    LossGrads pl = awr_policy_loss(b, st.params, 3.0);
    REQUIRE(pl.grads.layers.size() == st.params.policy.layers.size());
    const MlpParams critic_before = st.params.critic;
    const MlpParams value_before = st.params.value;
    adam_step(st.params.policy, pl.grads, st.adam_pi, 1e-3);
    CHECK(params_equal(st.params.critic, critic_before));
    CHECK(params_equal(st.params.value, value_before));
}

TEST_CASE("polyak_update: rho = 1 copies, small rho blends, iteration converges") {
    Rng rng(23);
    MlpParams target = make_mlp(2, 1, 4, 1, false, rng);
    MlpParams online = make_mlp(2, 1, 4, 1, false, rng);
    MlpParams t1 = target;
    polyak_update(t1, online, 1.0);
    CHECK(params_equal(t1, online));

    MlpParams t2 = target;
    polyak_update(t2, online, 0.005);
    const double want = (1 - 0.005) * target.layers[0].w.a[0] + 0.005 * online.layers[0].w.a[0];
    CHECK(t2.layers[0].w.a[0] == doctest::Approx(want).epsilon(1e-15));

    // |target - online| shrinks by (1 - rho) each application
    MlpParams t3 = target;
    double prev = std::abs(t3.layers[0].w.a[0] - online.layers[0].w.a[0]);
    for (int i = 0; i < 50; ++i) {
        polyak_update(t3, online, 0.1);
        const double cur = std::abs(t3.layers[0].w.a[0] - online.layers[0].w.a[0]);
        CHECK(cur <= prev * 0.9 + 1e-15);
        prev = cur;
    }
    CHECK(prev < 1e-2);
}

TEST_CASE("train_step: all-online equals all-offline with zero CQL weight") {
    // Eq.-3 gate: online batches skip the regularizer entirely, so an offline
    // batch with lambda_cql_weight = 0 must produce the same critic update.
    Batch online = random_batch(16, 2, 2, 24, Source::Online);
    Batch offline = online;
    std::fill(offline.sources.begin(), offline.sources.end(), Source::Offline);

    AgentConfig cfg;
    cfg.lambda_cql_weight = 1.0;
    AgentState a1 = make_agent_state(toy_agent(2, 2, 25));
    Rng r1(77);
    train_step(a1, online, cfg, r1);

    AgentConfig cfg0 = cfg;
    cfg0.lambda_cql_weight = 0.0;
    AgentState a2 = make_agent_state(toy_agent(2, 2, 25));
    Rng r2(77);
    train_step(a2, offline, cfg0, r2);

    CHECK(params_equal(a1.params.critic, a2.params.critic));
}

TEST_CASE("mixed-batch critic gradient equals fraction-weighted sub-batch gradients") {
    // sigma = 0 removes sampling noise so the physical split is exact
    AgentParams agent = toy_agent(2, 2, 26);
    Rng rng(27);
    std::vector<TaggedTransition> items;
    Rng gen(28);
    for (int i = 0; i < 24; ++i) {
        Transition t;
        t.state = {gen.normal(), gen.normal()};
        t.action = {gen.uniform(-1.0, 1.0), gen.uniform(-1.0, 1.0)};
        t.next_state = {gen.normal(), gen.normal()};
        t.reward = gen.normal();
        t.terminal = false;
        items.push_back({t, i % 3 == 0 ? Source::Online : Source::Offline});
    }
    Batch full = make_batch(items);
    const double w_cql = 1.0, gamma = 0.99;

    auto critic_grad = [&](const Batch& b) {
        std::vector<double> weights(b.size());
        for (int i = 0; i < b.size(); ++i) weights[i] = w_cql * select_lambda(b.sources[i]);
        LossGrads td = td_loss(b, agent, gamma);
        Rng r(0);
        LossGrads cql = cql_regularizer(b, agent, 4, 0.0, r, weights);
        MlpParams g = zeros_like(agent.critic);
        axpy_params(0.5, td.grads, g);
        axpy_params(1.0, cql.grads, g);
        return g;
    };

    MlpParams full_grad = critic_grad(full);

    std::vector<TaggedTransition> on_items, off_items;
    for (const auto& it : items) {
        (select_lambda(it.src) == 0 ? on_items : off_items).push_back(it);
    }
    MlpParams g_on = critic_grad(make_batch(on_items));
    MlpParams g_off = critic_grad(make_batch(off_items));
    MlpParams combined = zeros_like(agent.critic);
    const double f_on = static_cast<double>(on_items.size()) / items.size();
    axpy_params(f_on, g_on, combined);
    axpy_params(1.0 - f_on, g_off, combined);

    CHECK(max_rel_diff(full_grad, combined) < 1e-12);
}

TEST_CASE("per-sample weight masking decomposes the CQL gradient with noise on") {
    AgentParams agent = toy_agent(2, 2, 29);
    Batch b = random_batch(16, 2, 2, 30);
    std::vector<double> w_all(b.size()), w_even(b.size()), w_odd(b.size());
    for (int i = 0; i < b.size(); ++i) {
        w_all[i] = 1.0;
        w_even[i] = i % 2 == 0 ? 1.0 : 0.0;
        w_odd[i] = 1.0 - w_even[i];
    }
    Rng r1(31), r2(31), r3(31);
    LossGrads g_all = cql_regularizer(b, agent, 4, 0.2, r1, w_all);
    LossGrads g_even = cql_regularizer(b, agent, 4, 0.2, r2, w_even);
    LossGrads g_odd = cql_regularizer(b, agent, 4, 0.2, r3, w_odd);
    MlpParams combined = zeros_like(agent.critic);
    axpy_params(1.0, g_even.grads, combined);
    axpy_params(1.0, g_odd.grads, combined);
    CHECK(max_rel_diff(g_all.grads, combined) < 1e-12);
}

TEST_CASE("offline pre-training beats the random policy by 3x on expert data") {
    const EnvSpec spec = make_env("pointmass");
    OfflineDataset ds = build_offline_dataset(spec, parse_mix("expert"), 4000, 100);
    const RefScores refs = reference_scores(spec);
    AgentConfig cfg;
    int passes = 0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng init(derive_seed(seed, "agent-init"));
        AgentState agent = make_agent_state(make_agent(2, 2, 64, 2, init));
        Rng batch_rng(derive_seed(seed, "batches"));
        Rng train_rng(derive_seed(seed, "train"));
        std::vector<TaggedTransition> items(96);
        for (int step = 0; step < 800; ++step) {
            for (auto& it : items) {
                it = {ds.transitions[batch_rng.uniform_index(ds.transitions.size())],
                      Source::Offline};
            }
            train_step(agent, make_batch(items), cfg, train_rng);
        }
        const MlpParams policy = agent.params.policy;
        Policy eval = [&policy](const Vec& s, Rng&) { return policy_action(policy, s); };
        const double ret = rollout(spec, eval, derive_seed(seed, "eval"), 20).mean_return;
        // returns are negative costs: "3x better" = cost at most a third
        if (ret >= refs.random_ref / 3.0) ++passes;
    }
    CHECK(passes >= 4);
}
