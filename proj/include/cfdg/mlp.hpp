#pragma once

#include <functional>
#include <vector>

#include "cfdg/linalg.hpp"
#include "cfdg/rng.hpp"

namespace cfdg {

struct Linear {
    Mat w;  // out x in
    Vec b;  // out
};

// ReLU MLP, optionally with additive skips between equal-width hidden layers.
// The first and last layers never carry a skip; the output layer is linear.
struct MlpParams {
    std::vector<Linear> layers;
    bool residual = false;

    int input_dim() const { return layers.empty() ? 0 : layers.front().w.cols; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().w.rows; }
    bool skip_at(size_t k) const {
        return residual && k > 0 && k + 1 < layers.size() &&
               layers[k].w.rows == layers[k].w.cols;
    }
};

// He-initialized weights, zero biases. `hidden_layers` counts hidden layers,
// so the network has hidden_layers + 1 linear layers in total.
MlpParams make_mlp(int in_dim, int out_dim, int width, int hidden_layers, bool residual, Rng& rng);

MlpParams zeros_like(const MlpParams& p);
void scale_params(MlpParams& p, double s);
// y += a * x
void axpy_params(double a, const MlpParams& x, MlpParams& y);
size_t param_count(const MlpParams& p);

struct MlpCache {
    std::vector<Mat> inputs;  // input to each layer, inputs[0] is x
    std::vector<Mat> pre;     // pre-activation of each layer
};

// Batched forward; rows of x are samples. Throws NumericError naming the layer
// if a non-finite value appears.
Mat mlp_forward(const MlpParams& p, const Mat& x, MlpCache* cache = nullptr);
Vec mlp_forward(const MlpParams& p, const Vec& x);

// Reverse-mode pass from the output gradient, accumulating into `grads`
// (shaped like the parameters). Returns the gradient w.r.t. the input batch.
Mat mlp_backward(const MlpParams& p, const MlpCache& cache, const Mat& grad_out, MlpParams& grads);

// Exact gradients of a scalar loss at a single input. The loss maps the
// network output to (value, d value / d output).
struct LossEval {
    double value = 0.0;
    Vec grad_out;
};
using LossFn = std::function<LossEval(const Vec&)>;
MlpParams mlp_grad(const MlpParams& p, const Vec& x, const LossFn& loss, double* loss_value = nullptr);

// ---- Adam -------------------------------------------------------------

struct AdamState {
    MlpParams m, v;  // moment estimates, same shapes as the tracked params
    long step_count = 0;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
};

AdamState make_adam(const MlpParams& p);
void adam_step(MlpParams& p, const MlpParams& grads, AdamState& s, double lr);

// Span form shared by anything that is not an MLP (label embeddings).
void adam_update(double* p, const double* g, double* m, double* v, size_t n, long step_count,
                 double lr, double beta1, double beta2, double epsilon);

// ---- Learning-rate schedule --------------------------------------------

struct LrSchedule {
    double lr_max = 3e-4;
    double lr_min = 0.0;
    long total_steps = 1;
};

double cosine_lr(long step, const LrSchedule& s);

}  // namespace cfdg
