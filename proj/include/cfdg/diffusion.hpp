#pragma once

#include <span>

#include "cfdg/env.hpp"
#include "cfdg/mlp.hpp"

namespace cfdg {

// Standardizing codec between Transition and the flat vector the diffusion
// model works on. Layout: state | action | reward | next_state | terminal.
struct TransitionCodec {
    int state_dim = 0;
    int action_dim = 0;
    Vec mean, std;  // per encoded dimension; std floored at 1e-6

    int dim() const { return 2 * state_dim + action_dim + 2; }
    Vec encode(const Transition& t) const;
    Transition decode(const Vec& v) const;
};

TransitionCodec fit_codec(std::span<const Transition> corpus);

// Karras-style sigma ladder (rho = 7), strictly decreasing sigma_max -> sigma_min,
// plus the churn parameters of the stochastic sampler.
struct NoiseSchedule {
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    int n_steps = 32;
    double rho = 7.0;
    double s_churn = 80.0;
    double s_tmin = 0.05;
    double s_tmax = 50.0;
    double s_noise = 1.003;

    std::vector<double> sigmas() const;
};

enum class ConditionLabel { Offline = 0, Online = 1, Null = 2 };

const char* label_name(ConditionLabel c);

struct DenoiserConfig {
    int data_dim = 0;
    int emb_dim = 32;  // even; sin/cos pairs of log sigma
    int width = 256;
    int depth = 4;
    double p_uncond = 0.1;
    double sigma_data = 1.0;
    // log-normal training distribution of sigma
    double p_mean = -1.2;
    double p_std = 1.2;
};

struct DenoiserParams {
    MlpParams net;  // input [c_in*x | sigma_emb + label_emb], output x-prediction
    Mat label_emb;  // 3 x emb_dim, learned (row per ConditionLabel, Null included)
};

struct DenoiserState {
    DenoiserConfig cfg;
    DenoiserParams params;
    DenoiserParams ema;  // exponential average of params; sampling reads these
    double ema_decay = 0.995;
    AdamState adam_net;
    Mat emb_m, emb_v;
    long emb_step = 0;
};

DenoiserState make_denoiser(const DenoiserConfig& cfg, Rng& rng);

Vec sigma_features(double sigma, int emb_dim);

// x0 + sigma * noise (sigma = 0 returns x0).
Vec forward_noise(const Vec& x0, double sigma, const Vec& noise);

// Independently replaces each label by Null with probability p_uncond.
std::vector<ConditionLabel> apply_label_dropout(std::span<const ConditionLabel> labels,
                                                double p_uncond, Rng& rng);

// Batched denoiser D(x; sigma, c) with EDM preconditioning:
//   D = c_skip(sigma) * x + c_out(sigma) * F(c_in(sigma) * x, emb)
Mat denoiser_denoise(const DenoiserState& state, const Mat& x_noisy, std::span<const double> sigmas,
                     std::span<const ConditionLabel> labels);

double edm_loss_weight(double sigma, double sigma_data);

// Weighted reconstruction loss sum_b w(sigma_b) * |denoised_b - x0_b|^2 / B.
double edm_loss(const Mat& x0, const Mat& denoised, std::span<const double> sigmas, double sigma_data);

// One training step: label dropout, per-sample sigma from the log-normal
// training distribution, one Adam update of net + label embeddings. Input
// labels must be Offline/Online (Null arises only through dropout). Returns
// the batch loss; effective labels are exposed for instrumentation.
double denoise_train_step(DenoiserState& state, const Mat& x0, std::span<const ConditionLabel> labels,
                          double lr, Rng& rng,
                          std::vector<ConditionLabel>* effective_labels = nullptr);

// Classifier-free combination (1+w) * eps_cond - w * eps_uncond.
Vec cfg_score(const Vec& eps_cond, const Vec& eps_uncond, double w);

// Score-difference estimate of the implicit classifier gradient:
// -(eps_cond - eps_uncond) / sigma.
Vec classifier_grad_estimate(const Vec& eps_cond, const Vec& eps_uncond, double sigma);

// Stochastic sampler (churn + Heun correction) over the guided denoiser.
// Deterministic in (state, label, w, schedule, n, seed) regardless of thread
// count: work is split into fixed-size chunks with per-chunk seeds and merged
// in chunk order. Rows of the result are encoded samples.
Mat sample(const DenoiserState& state, ConditionLabel label, double w, const NoiseSchedule& schedule,
           int n, uint64_t seed, int threads = 0);

// sample + decode with post-processing: actions clipped to [-1,1], states
// clipped to the environment bounds, terminal thresholded at 0.5.
std::vector<Transition> generate_transitions(const DenoiserState& state, const TransitionCodec& codec,
                                             ConditionLabel label, double w,
                                             const NoiseSchedule& schedule, int n, uint64_t seed,
                                             const EnvSpec& spec, int threads = 0);

}  // namespace cfdg
