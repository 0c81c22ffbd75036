#pragma once

#include <span>

#include "cfdg/env.hpp"
#include "cfdg/mlp.hpp"

namespace cfdg {

enum class Source { Online, Offline, SynOnline, SynOffline };

// Conservative-regularizer gate: online-like data trains without the
// pessimism term, offline-like data with it. Synthetic samples inherit the
// gate of their label.
int select_lambda(Source s);

const char* source_name(Source s);

struct TaggedTransition {
    Transition t;
    Source src = Source::Offline;
};

// Column-batched view of a batch for the matrix kernels.
struct Batch {
    Mat states;       // B x S
    Mat actions;      // B x A
    Vec rewards;      // B
    Mat next_states;  // B x S
    std::vector<uint8_t> terminals;
    std::vector<Source> sources;

    int size() const { return states.rows; }
};

Batch make_batch(std::span<const TaggedTransition> items);
Batch make_batch(std::span<const Transition> items, Source src);

struct AgentConfig {
    double gamma = 0.99;
    double tau_expectile = 0.7;
    double awr_beta = 3.0;
    double polyak_rho = 0.005;
    double lambda_cql_weight = 1.0;
    double lr_q = 3e-4;
    double lr_pi = 3e-4;
    int n_policy_actions = 4;      // action samples inside the CQL term
    double cql_noise_sigma = 0.2;  // exploration noise on those samples
    double explore_sigma = 0.2;    // acting noise during online collection
};

struct AgentParams {
    MlpParams critic;         // Q(s,a): input [s|a] -> 1
    MlpParams target_critic;  // polyak-tracked copy
    MlpParams value;          // V(s) -> 1
    MlpParams policy;         // pi(s) -> A, tanh-squashed at use sites
};

struct AgentState {
    AgentParams params;
    AdamState adam_q, adam_v, adam_pi;
};

AgentParams make_agent(int state_dim, int action_dim, int width, int depth, Rng& rng);
AgentState make_agent_state(AgentParams params);

// tanh-squashed deterministic policy head
Mat policy_action_batch(const MlpParams& policy, const Mat& states);
Vec policy_action(const MlpParams& policy, const Vec& state);

struct LossGrads {
    double loss = 0.0;
    MlpParams grads;
};

// Mean squared TD error with target bootstrap Q'(s', pi(s')) masked on
// terminal transitions. Gradients flow only into the critic.
LossGrads td_loss(const Batch& batch, const AgentParams& agent, double gamma);

// Mean over the batch of E_{a~pi}[Q(s,a)] - Q(s, a_data); sampled actions are
// pi(s) plus clipped Gaussian noise and are treated as constants. Optional
// per-sample weights scale each sample's contribution (used for the lambda
// gate); an empty span means all ones.
LossGrads cql_regularizer(const Batch& batch, const AgentParams& agent, int n_policy_actions,
                          double noise_sigma, Rng& rng,
                          std::span<const double> sample_weights = {});

// Asymmetric squared loss |tau - 1{u<0}| * u^2.
double expectile_loss(double u, double tau);

// Expectile regression of V(s) toward Q'(s, a_data). Gradients into the value net.
LossGrads value_expectile_loss(const Batch& batch, const AgentParams& agent, double tau);

// Advantage-weighted regression: weight = min(exp(beta * (Q'(s,a) - V(s))), 100),
// loss = mean weight * |pi(s) - a|^2. Gradients into the policy only.
LossGrads awr_policy_loss(const Batch& batch, const AgentParams& agent, double beta);

void polyak_update(MlpParams& target, const MlpParams& online, double rho);

struct StepDiag {
    double loss_q = 0.0;
    double loss_v = 0.0;
    double loss_pi = 0.0;
};

// One full update: critic (0.5*TD + per-sample-lambda CQL), value, policy,
// then the polyak target blend.
StepDiag train_step(AgentState& agent, const Batch& batch, const AgentConfig& cfg, Rng& rng);

}  // namespace cfdg
