#include "cfdg/mlp.hpp"

#include <cmath>
#include <string>

namespace cfdg {

MlpParams make_mlp(int in_dim, int out_dim, int width, int hidden_layers, bool residual, Rng& rng) {
    if (in_dim < 1 || out_dim < 1 || width < 1 || hidden_layers < 1) {
        throw ValidationError("make_mlp: dimensions must be positive");
    }
    MlpParams p;
    p.residual = residual;
    auto init_layer = [&](int out, int in) {
        Linear l;
        l.w = Mat(out, in);
        double s = std::sqrt(2.0 / in);
        for (auto& v : l.w.a) v = s * rng.normal();
        l.b.assign(out, 0.0);
        return l;
    };
    p.layers.push_back(init_layer(width, in_dim));
    for (int k = 1; k < hidden_layers; ++k) p.layers.push_back(init_layer(width, width));
    p.layers.push_back(init_layer(out_dim, width));
    return p;
}

MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    z.residual = p.residual;
    z.layers.reserve(p.layers.size());
    for (const auto& l : p.layers) {
        Linear zl;
        zl.w = Mat(l.w.rows, l.w.cols);
        zl.b.assign(l.b.size(), 0.0);
        z.layers.push_back(std::move(zl));
    }
    return z;
}

void scale_params(MlpParams& p, double s) {
    for (auto& l : p.layers) {
        for (auto& v : l.w.a) v *= s;
        for (auto& v : l.b) v *= s;
    }
}

void axpy_params(double a, const MlpParams& x, MlpParams& y) {
    if (x.layers.size() != y.layers.size()) throw ValidationError("axpy_params: layer count mismatch");
    for (size_t k = 0; k < x.layers.size(); ++k) {
        const auto& xl = x.layers[k];
        auto& yl = y.layers[k];
        if (xl.w.size() != yl.w.size() || xl.b.size() != yl.b.size()) {
            throw ValidationError("axpy_params: shape mismatch at layer " + std::to_string(k));
        }
        for (size_t i = 0; i < xl.w.size(); ++i) yl.w.a[i] += a * xl.w.a[i];
        for (size_t i = 0; i < xl.b.size(); ++i) yl.b[i] += a * xl.b[i];
    }
}

size_t param_count(const MlpParams& p) {
    size_t n = 0;
    for (const auto& l : p.layers) n += l.w.size() + l.b.size();
    return n;
}

static void check_finite(const Mat& m, size_t layer, const char* what) {
    if (!all_finite(m.a.data(), m.a.size())) {
        throw NumericError(std::string("non-finite ") + what + " in layer " + std::to_string(layer));
    }
}

Mat mlp_forward(const MlpParams& p, const Mat& x, MlpCache* cache) {
    if (p.layers.empty()) throw ValidationError("mlp_forward: empty network");
    if (x.cols != p.input_dim()) {
        throw ValidationError("mlp_forward: input dim " + std::to_string(x.cols) + " != " +
                              std::to_string(p.input_dim()));
    }
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    Mat h = x;
    const size_t L = p.layers.size();
    for (size_t k = 0; k < L; ++k) {
        const auto& l = p.layers[k];
        Mat z(h.rows, l.w.rows);
        addmm_nt(h, l.w, z);
        add_row_vector(z, l.b);
        check_finite(z, k, "activation");
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->pre.push_back(z);
        }
        if (k + 1 == L) {
            h = std::move(z);
        } else {
            Mat out = z;
            for (auto& v : out.a) v = v > 0.0 ? v : 0.0;
            if (p.skip_at(k)) {
                const Mat& in = cache ? cache->inputs[k] : h;
                for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += in.a[i];
            }
            h = std::move(out);
        }
    }
    return h;
}

Vec mlp_forward(const MlpParams& p, const Vec& x) {
    Mat y = mlp_forward(p, from_row(x));
    return to_vec_row(y, 0);
}

Mat mlp_backward(const MlpParams& p, const MlpCache& cache, const Mat& grad_out, MlpParams& grads) {
    const size_t L = p.layers.size();
    if (cache.pre.size() != L || cache.inputs.size() != L) {
        throw ValidationError("mlp_backward: cache does not match network");
    }
    if (grad_out.rows != cache.pre.back().rows || grad_out.cols != p.output_dim()) {
        throw ValidationError("mlp_backward: grad_out shape mismatch");
    }
    Mat g = grad_out;  // gradient w.r.t. the output of layer k
    for (size_t k = L; k-- > 0;) {
        const auto& l = p.layers[k];
        const bool hidden = k + 1 < L;
        const bool skip = hidden && p.skip_at(k);
        Mat gz;
        if (hidden) {
            gz = g;  // keep g: the skip branch forwards it to the input untouched
            const Mat& pre = cache.pre[k];
            for (size_t i = 0; i < gz.a.size(); ++i) {
                if (pre.a[i] <= 0.0) gz.a[i] = 0.0;
            }
        } else {
            gz = std::move(g);
        }
        check_finite(gz, k, "gradient");
        addmm_tn(gz, cache.inputs[k], grads.layers[k].w);
        col_sums(gz, grads.layers[k].b);
        Mat gin(gz.rows, l.w.cols);
        addmm_nn(gz, l.w, gin);
        if (skip) {
            for (size_t i = 0; i < gin.a.size(); ++i) gin.a[i] += g.a[i];
        }
        g = std::move(gin);
    }
    return g;
}

MlpParams mlp_grad(const MlpParams& p, const Vec& x, const LossFn& loss, double* loss_value) {
    MlpCache cache;
    Mat y = mlp_forward(p, from_row(x), &cache);
    LossEval e = loss(to_vec_row(y, 0));
    if (e.grad_out.size() != static_cast<size_t>(p.output_dim())) {
        throw ValidationError("mlp_grad: loss gradient length mismatch");
    }
    if (loss_value) *loss_value = e.value;
    MlpParams grads = zeros_like(p);
    mlp_backward(p, cache, from_row(e.grad_out), grads);
    return grads;
}

AdamState make_adam(const MlpParams& p) {
    AdamState s;
    s.m = zeros_like(p);
    s.v = zeros_like(p);
    return s;
}

void adam_update(double* p, const double* g, double* m, double* v, size_t n, long step_count,
                 double lr, double beta1, double beta2, double epsilon) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + epsilon);
    }
}

void adam_step(MlpParams& p, const MlpParams& grads, AdamState& s, double lr) {
    if (lr <= 0.0) throw ValidationError("adam_step: lr must be positive");
    if (grads.layers.size() != p.layers.size()) {
        throw ValidationError("adam_step: gradient shape mismatch");
    }
    s.step_count += 1;
    for (size_t k = 0; k < p.layers.size(); ++k) {
        auto& pl = p.layers[k];
        const auto& gl = grads.layers[k];
        if (gl.w.size() != pl.w.size() || gl.b.size() != pl.b.size()) {
            throw ValidationError("adam_step: gradient shape mismatch at layer " + std::to_string(k));
        }
        adam_update(pl.w.a.data(), gl.w.a.data(), s.m.layers[k].w.a.data(), s.v.layers[k].w.a.data(),
                    pl.w.size(), s.step_count, lr, s.beta1, s.beta2, s.epsilon);
        adam_update(pl.b.data(), gl.b.data(), s.m.layers[k].b.data(), s.v.layers[k].b.data(),
                    pl.b.size(), s.step_count, lr, s.beta1, s.beta2, s.epsilon);
    }
}

double cosine_lr(long step, const LrSchedule& s) {
    if (step < 0 || step > s.total_steps) {
        throw ValidationError("cosine_lr: step out of range");
    }
    const double t = static_cast<double>(step) / static_cast<double>(s.total_steps);
    return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(3.141592653589793238462643383280 * t));
}

}  // namespace cfdg
