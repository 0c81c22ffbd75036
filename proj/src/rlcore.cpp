#include "cfdg/rlcore.hpp"

#include <cmath>

namespace cfdg {

int select_lambda(Source s) {
    switch (s) {
        case Source::Online:
        case Source::SynOnline:
            return 0;
        case Source::Offline:
        case Source::SynOffline:
            return 1;
    }
    throw ValidationError("select_lambda: bad source tag");
}

const char* source_name(Source s) {
    switch (s) {
        case Source::Online: return "online";
        case Source::Offline: return "offline";
        case Source::SynOnline: return "syn_online";
        case Source::SynOffline: return "syn_offline";
    }
    return "?";
}

Batch make_batch(std::span<const TaggedTransition> items) {
    if (items.empty()) throw ValidationError("make_batch: empty batch");
    const int B = static_cast<int>(items.size());
    const int S = static_cast<int>(items[0].t.state.size());
    const int A = static_cast<int>(items[0].t.action.size());
    Batch b;
    b.states = Mat(B, S);
    b.actions = Mat(B, A);
    b.next_states = Mat(B, S);
    b.rewards.resize(B);
    b.terminals.resize(B);
    b.sources.resize(B);
    for (int i = 0; i < B; ++i) {
        const Transition& t = items[i].t;
        if (static_cast<int>(t.state.size()) != S || static_cast<int>(t.action.size()) != A ||
            static_cast<int>(t.next_state.size()) != S) {
            throw ValidationError("make_batch: inconsistent transition dimensions");
        }
        std::copy(t.state.begin(), t.state.end(), b.states.row(i));
        std::copy(t.action.begin(), t.action.end(), b.actions.row(i));
        std::copy(t.next_state.begin(), t.next_state.end(), b.next_states.row(i));
        b.rewards[i] = t.reward;
        b.terminals[i] = t.terminal ? 1 : 0;
        b.sources[i] = items[i].src;
    }
    return b;
}

Batch make_batch(std::span<const Transition> items, Source src) {
    std::vector<TaggedTransition> tagged(items.size());
    for (size_t i = 0; i < items.size(); ++i) tagged[i] = {items[i], src};
    return make_batch(tagged);
}

AgentParams make_agent(int state_dim, int action_dim, int width, int depth, Rng& rng) {
    AgentParams a;
    a.critic = make_mlp(state_dim + action_dim, 1, width, depth, false, rng);
    a.target_critic = a.critic;
    a.value = make_mlp(state_dim, 1, width, depth, false, rng);
    a.policy = make_mlp(state_dim, action_dim, width, depth, false, rng);
    return a;
}

AgentState make_agent_state(AgentParams params) {
    AgentState s;
    s.adam_q = make_adam(params.critic);
    s.adam_v = make_adam(params.value);
    s.adam_pi = make_adam(params.policy);
    s.params = std::move(params);
    return s;
}

Mat policy_action_batch(const MlpParams& policy, const Mat& states) {
    Mat a = mlp_forward(policy, states);
    for (auto& v : a.a) v = std::tanh(v);
    return a;
}

Vec policy_action(const MlpParams& policy, const Vec& state) {
    Vec a = mlp_forward(policy, state);
    for (auto& v : a) v = std::tanh(v);
    return a;
}

static Mat concat_cols(const Mat& x, const Mat& y) {
    Mat out(x.rows, x.cols + y.cols);
    for (int r = 0; r < x.rows; ++r) {
        std::copy(x.row(r), x.row(r) + x.cols, out.row(r));
        std::copy(y.row(r), y.row(r) + y.cols, out.row(r) + x.cols);
    }
    return out;
}

LossGrads td_loss(const Batch& batch, const AgentParams& agent, double gamma) {
    const int B = batch.size();
    Mat next_actions = policy_action_batch(agent.policy, batch.next_states);
    Mat q_next = mlp_forward(agent.target_critic, concat_cols(batch.next_states, next_actions));

    MlpCache cache;
    Mat q = mlp_forward(agent.critic, concat_cols(batch.states, batch.actions), &cache);

    Mat grad_out(B, 1);
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
        const double mask = batch.terminals[i] ? 0.0 : 1.0;
        const double target = batch.rewards[i] + gamma * mask * q_next.at(i, 0);
        const double delta = target - q.at(i, 0);
        loss += delta * delta;
        grad_out.at(i, 0) = -2.0 * delta / B;
    }
    LossGrads out;
    out.loss = loss / B;
    out.grads = zeros_like(agent.critic);
    mlp_backward(agent.critic, cache, grad_out, out.grads);
    return out;
}

LossGrads cql_regularizer(const Batch& batch, const AgentParams& agent, int n_policy_actions,
                          double noise_sigma, Rng& rng, std::span<const double> sample_weights) {
    if (n_policy_actions < 1) throw ValidationError("cql_regularizer: n_policy_actions must be >= 1");
    const int B = batch.size();
    const int A = batch.actions.cols;
    if (!sample_weights.empty() && static_cast<int>(sample_weights.size()) != B) {
        throw ValidationError("cql_regularizer: weight length mismatch");
    }
    auto weight = [&](int i) { return sample_weights.empty() ? 1.0 : sample_weights[i]; };

    // Sampled actions are policy outputs plus clipped noise, constants w.r.t. theta.
    Mat pi = policy_action_batch(agent.policy, batch.states);
    const int n = n_policy_actions;
    Mat stacked(n * B, batch.states.cols + A);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < B; ++i) {
            double* row = stacked.row(j * B + i);
            std::copy(batch.states.row(i), batch.states.row(i) + batch.states.cols, row);
            for (int d = 0; d < A; ++d) {
                row[batch.states.cols + d] = clamp(pi.at(i, d) + noise_sigma * rng.normal(), -1.0, 1.0);
            }
        }
    }

    MlpCache cache_pi, cache_data;
    Mat q_pi = mlp_forward(agent.critic, stacked, &cache_pi);
    Mat q_data = mlp_forward(agent.critic, concat_cols(batch.states, batch.actions), &cache_data);

    double loss = 0.0;
    Mat grad_pi(n * B, 1), grad_data(B, 1);
    for (int i = 0; i < B; ++i) {
        double mean_q = 0.0;
        for (int j = 0; j < n; ++j) mean_q += q_pi.at(j * B + i, 0);
        mean_q /= n;
        loss += weight(i) * (mean_q - q_data.at(i, 0));
        for (int j = 0; j < n; ++j) grad_pi.at(j * B + i, 0) = weight(i) / (static_cast<double>(B) * n);
        grad_data.at(i, 0) = -weight(i) / B;
    }
    LossGrads out;
    out.loss = loss / B;
    out.grads = zeros_like(agent.critic);
    mlp_backward(agent.critic, cache_pi, grad_pi, out.grads);
    mlp_backward(agent.critic, cache_data, grad_data, out.grads);
    return out;
}

double expectile_loss(double u, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("expectile_loss: tau must be in (0,1)");
    const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
    return w * u * u;
}

LossGrads value_expectile_loss(const Batch& batch, const AgentParams& agent, double tau) {
    const int B = batch.size();
    Mat q_data = mlp_forward(agent.target_critic, concat_cols(batch.states, batch.actions));
    MlpCache cache;
    Mat v = mlp_forward(agent.value, batch.states, &cache);
    Mat grad_out(B, 1);
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
        const double u = q_data.at(i, 0) - v.at(i, 0);
        const double w = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
        loss += w * u * u;
        grad_out.at(i, 0) = -2.0 * w * u / B;
    }
    LossGrads out;
    out.loss = loss / B;
    out.grads = zeros_like(agent.value);
    mlp_backward(agent.value, cache, grad_out, out.grads);
    return out;
}

LossGrads awr_policy_loss(const Batch& batch, const AgentParams& agent, double beta) {
    if (beta <= 0.0) throw ValidationError("awr_policy_loss: beta must be positive");
    const int B = batch.size();
    const int A = batch.actions.cols;
    Mat q_data = mlp_forward(agent.target_critic, concat_cols(batch.states, batch.actions));
    Mat v = mlp_forward(agent.value, batch.states);

    MlpCache cache;
    Mat raw = mlp_forward(agent.policy, batch.states, &cache);

    Mat grad_out(B, A);
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
        const double adv = q_data.at(i, 0) - v.at(i, 0);
        const double w = std::min(std::exp(beta * adv), 100.0);
        double err = 0.0;
        for (int d = 0; d < A; ++d) {
            const double pi = std::tanh(raw.at(i, d));
            const double diff = pi - batch.actions.at(i, d);
            err += diff * diff;
            grad_out.at(i, d) = w * 2.0 * diff * (1.0 - pi * pi) / B;
        }
        loss += w * err;
    }
    LossGrads out;
    out.loss = loss / B;
    out.grads = zeros_like(agent.policy);
    mlp_backward(agent.policy, cache, grad_out, out.grads);
    return out;
}

void polyak_update(MlpParams& target, const MlpParams& online, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw ValidationError("polyak_update: rho must be in (0,1]");
    if (target.layers.size() != online.layers.size()) {
        throw ValidationError("polyak_update: shape mismatch");
    }
    for (size_t k = 0; k < target.layers.size(); ++k) {
        auto& tl = target.layers[k];
        const auto& ol = online.layers[k];
        if (tl.w.size() != ol.w.size() || tl.b.size() != ol.b.size()) {
            throw ValidationError("polyak_update: shape mismatch at layer " + std::to_string(k));
        }
        for (size_t i = 0; i < tl.w.size(); ++i) tl.w.a[i] = (1.0 - rho) * tl.w.a[i] + rho * ol.w.a[i];
        for (size_t i = 0; i < tl.b.size(); ++i) tl.b[i] = (1.0 - rho) * tl.b[i] + rho * ol.b[i];
    }
}

StepDiag train_step(AgentState& agent, const Batch& batch, const AgentConfig& cfg, Rng& rng) {
    const int B = batch.size();
    // Per-sample gate (Eq.-3 style): lambda * global CQL weight.
    std::vector<double> weights(B);
    for (int i = 0; i < B; ++i) {
        weights[i] = cfg.lambda_cql_weight * select_lambda(batch.sources[i]);
    }

    LossGrads td = td_loss(batch, agent.params, cfg.gamma);
    LossGrads cql = cql_regularizer(batch, agent.params, cfg.n_policy_actions, cfg.cql_noise_sigma,
                                    rng, weights);
    MlpParams critic_grads = zeros_like(agent.params.critic);
    axpy_params(0.5, td.grads, critic_grads);
    axpy_params(1.0, cql.grads, critic_grads);

    LossGrads vl = value_expectile_loss(batch, agent.params, cfg.tau_expectile);
    LossGrads pl = awr_policy_loss(batch, agent.params, cfg.awr_beta);

    adam_step(agent.params.critic, critic_grads, agent.adam_q, cfg.lr_q);
    adam_step(agent.params.value, vl.grads, agent.adam_v, cfg.lr_q);
    adam_step(agent.params.policy, pl.grads, agent.adam_pi, cfg.lr_pi);
    polyak_update(agent.params.target_critic, agent.params.critic, cfg.polyak_rho);

    return {0.5 * td.loss + cql.loss, vl.loss, pl.loss};
}

}  // namespace cfdg
