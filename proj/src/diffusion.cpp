#include "cfdg/diffusion.hpp"

#include <atomic>
#include <cmath>
#include <future>
#include <thread>

namespace cfdg {

const char* label_name(ConditionLabel c) {
    switch (c) {
        case ConditionLabel::Offline: return "offline";
        case ConditionLabel::Online: return "online";
        case ConditionLabel::Null: return "null";
    }
    return "?";
}

Vec TransitionCodec::encode(const Transition& t) const {
    if (static_cast<int>(t.state.size()) != state_dim ||
        static_cast<int>(t.action.size()) != action_dim) {
        throw ValidationError("codec encode: dimension mismatch");
    }
    Vec v(dim());
    int i = 0;
    for (double x : t.state) v[i++] = x;
    for (double x : t.action) v[i++] = x;
    v[i++] = t.reward;
    for (double x : t.next_state) v[i++] = x;
    v[i++] = t.terminal ? 1.0 : 0.0;
    for (int d = 0; d < dim(); ++d) v[d] = (v[d] - mean[d]) / std[d];
    return v;
}

Transition TransitionCodec::decode(const Vec& v) const {
    if (static_cast<int>(v.size()) != dim()) throw ValidationError("codec decode: length mismatch");
    Vec raw(dim());
    for (int d = 0; d < dim(); ++d) raw[d] = v[d] * std[d] + mean[d];
    Transition t;
    int i = 0;
    t.state.assign(raw.begin() + i, raw.begin() + i + state_dim);
    i += state_dim;
    t.action.assign(raw.begin() + i, raw.begin() + i + action_dim);
    i += action_dim;
    t.reward = raw[i++];
    t.next_state.assign(raw.begin() + i, raw.begin() + i + state_dim);
    i += state_dim;
    t.terminal = raw[i] > 0.5;
    return t;
}

TransitionCodec fit_codec(std::span<const Transition> corpus) {
    if (corpus.empty()) throw ValidationError("fit_codec: empty corpus");
    TransitionCodec c;
    c.state_dim = static_cast<int>(corpus[0].state.size());
    c.action_dim = static_cast<int>(corpus[0].action.size());
    const int D = c.dim();
    c.mean.assign(D, 0.0);
    c.std.assign(D, 0.0);
    auto flat = [&](const Transition& t, int d) -> double {
        if (d < c.state_dim) return t.state[d];
        d -= c.state_dim;
        if (d < c.action_dim) return t.action[d];
        d -= c.action_dim;
        if (d == 0) return t.reward;
        d -= 1;
        if (d < c.state_dim) return t.next_state[d];
        return t.terminal ? 1.0 : 0.0;
    };
    const double n = static_cast<double>(corpus.size());
    for (const auto& t : corpus) {
        for (int d = 0; d < D; ++d) c.mean[d] += flat(t, d);
    }
    for (int d = 0; d < D; ++d) c.mean[d] /= n;
    for (const auto& t : corpus) {
        for (int d = 0; d < D; ++d) {
            const double diff = flat(t, d) - c.mean[d];
            c.std[d] += diff * diff;
        }
    }
    for (int d = 0; d < D; ++d) c.std[d] = std::max(std::sqrt(c.std[d] / n), 1e-6);
    return c;
}

std::vector<double> NoiseSchedule::sigmas() const {
    if (n_steps < 1) throw ValidationError("noise schedule: n_steps must be >= 1");
    if (!(sigma_max > sigma_min && sigma_min > 0.0)) {
        throw ValidationError("noise schedule: need sigma_max > sigma_min > 0");
    }
    std::vector<double> out(n_steps);
    if (n_steps == 1) {
        out[0] = sigma_max;
        return out;
    }
    const double inv_rho = 1.0 / rho;
    const double hi = std::pow(sigma_max, inv_rho);
    const double lo = std::pow(sigma_min, inv_rho);
    for (int i = 0; i < n_steps; ++i) {
        const double f = static_cast<double>(i) / (n_steps - 1);
        out[i] = std::pow(hi + f * (lo - hi), rho);
    }
    return out;
}

DenoiserState make_denoiser(const DenoiserConfig& cfg, Rng& rng) {
    if (cfg.data_dim < 1) throw ValidationError("make_denoiser: data_dim must be positive");
    if (cfg.emb_dim < 2 || cfg.emb_dim % 2 != 0) {
        throw ValidationError("make_denoiser: emb_dim must be even and >= 2");
    }
    if (!(cfg.p_uncond >= 0.0 && cfg.p_uncond <= 1.0)) {
        throw ValidationError("make_denoiser: p_uncond must be in [0,1]");
    }
    DenoiserState s;
    s.cfg = cfg;
    s.params.net = make_mlp(cfg.data_dim + cfg.emb_dim, cfg.data_dim, cfg.width, cfg.depth,
                            /*residual=*/true, rng);
    s.params.label_emb = Mat(3, cfg.emb_dim);
    for (auto& v : s.params.label_emb.a) v = 0.1 * rng.normal();
    s.ema = s.params;
    s.adam_net = make_adam(s.params.net);
    s.emb_m = Mat(3, cfg.emb_dim);
    s.emb_v = Mat(3, cfg.emb_dim);
    return s;
}

Vec sigma_features(double sigma, int emb_dim) {
    if (sigma <= 0.0) throw ValidationError("sigma_features: sigma must be positive");
    const int half = emb_dim / 2;
    Vec f(emb_dim);
    const double t = std::log(sigma);
    for (int k = 0; k < half; ++k) {
        const double freq =
            half > 1 ? 0.25 * std::pow(64.0, static_cast<double>(k) / (half - 1)) : 1.0;
        f[2 * k] = std::sin(freq * t);
        f[2 * k + 1] = std::cos(freq * t);
    }
    return f;
}

Vec forward_noise(const Vec& x0, double sigma, const Vec& noise) {
    if (x0.size() != noise.size()) throw ValidationError("forward_noise: shape mismatch");
    if (sigma < 0.0) throw ValidationError("forward_noise: sigma must be >= 0");
    Vec out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = x0[i] + sigma * noise[i];
    return out;
}

std::vector<ConditionLabel> apply_label_dropout(std::span<const ConditionLabel> labels,
                                                double p_uncond, Rng& rng) {
    std::vector<ConditionLabel> out(labels.begin(), labels.end());
    for (auto& c : out) {
        if (rng.uniform() < p_uncond) c = ConditionLabel::Null;
    }
    return out;
}

struct Precond {
    double c_skip, c_out, c_in;
};

static Precond precond(double sigma, double sigma_data) {
    const double s2 = sigma * sigma, d2 = sigma_data * sigma_data;
    Precond p;
    p.c_skip = d2 / (s2 + d2);
    p.c_out = sigma * sigma_data / std::sqrt(s2 + d2);
    p.c_in = 1.0 / std::sqrt(s2 + d2);
    return p;
}

// Assembles the network input [c_in*x | sigma_emb + label_emb].
static Mat build_net_input(const DenoiserConfig& cfg, const DenoiserParams& params,
                           const Mat& x_noisy, std::span<const double> sigmas,
                           std::span<const ConditionLabel> labels) {
    const int B = x_noisy.rows;
    const int D = cfg.data_dim;
    const int E = cfg.emb_dim;
    if (x_noisy.cols != D || static_cast<int>(sigmas.size()) != B ||
        static_cast<int>(labels.size()) != B) {
        throw ValidationError("denoiser: batch shape mismatch");
    }
    Mat in(B, D + E);
    for (int b = 0; b < B; ++b) {
        const Precond pc = precond(sigmas[b], cfg.sigma_data);
        double* row = in.row(b);
        const double* xb = x_noisy.row(b);
        for (int d = 0; d < D; ++d) row[d] = pc.c_in * xb[d];
        const Vec sf = sigma_features(sigmas[b], E);
        const double* emb = params.label_emb.row(static_cast<int>(labels[b]));
        for (int e = 0; e < E; ++e) row[D + e] = sf[e] + emb[e];
    }
    return in;
}

static Mat apply_precond_out(const DenoiserConfig& cfg, const Mat& x_noisy, const Mat& f,
                             std::span<const double> sigmas) {
    const int B = x_noisy.rows, D = x_noisy.cols;
    Mat out(B, D);
    for (int b = 0; b < B; ++b) {
        const Precond pc = precond(sigmas[b], cfg.sigma_data);
        for (int d = 0; d < D; ++d) {
            out.at(b, d) = pc.c_skip * x_noisy.at(b, d) + pc.c_out * f.at(b, d);
        }
    }
    return out;
}

static Mat denoise_with(const DenoiserConfig& cfg, const DenoiserParams& params, const Mat& x_noisy,
                        std::span<const double> sigmas, std::span<const ConditionLabel> labels) {
    Mat in = build_net_input(cfg, params, x_noisy, sigmas, labels);
    Mat f = mlp_forward(params.net, in);
    return apply_precond_out(cfg, x_noisy, f, sigmas);
}

Mat denoiser_denoise(const DenoiserState& state, const Mat& x_noisy, std::span<const double> sigmas,
                     std::span<const ConditionLabel> labels) {
    return denoise_with(state.cfg, state.ema, x_noisy, sigmas, labels);
}

double edm_loss_weight(double sigma, double sigma_data) {
    const double so = sigma * sigma_data;
    return (sigma * sigma + sigma_data * sigma_data) / (so * so);
}

double edm_loss(const Mat& x0, const Mat& denoised, std::span<const double> sigmas, double sigma_data) {
    if (x0.rows != denoised.rows || x0.cols != denoised.cols ||
        static_cast<int>(sigmas.size()) != x0.rows) {
        throw ValidationError("edm_loss: shape mismatch");
    }
    double loss = 0.0;
    for (int b = 0; b < x0.rows; ++b) {
        const double w = edm_loss_weight(sigmas[b], sigma_data);
        double err = 0.0;
        for (int d = 0; d < x0.cols; ++d) {
            const double diff = denoised.at(b, d) - x0.at(b, d);
            err += diff * diff;
        }
        loss += w * err;
    }
    return loss / x0.rows;
}

double denoise_train_step(DenoiserState& state, const Mat& x0, std::span<const ConditionLabel> labels,
                          double lr, Rng& rng, std::vector<ConditionLabel>* effective_labels) {
    const int B = x0.rows;
    const int D = state.cfg.data_dim;
    const int E = state.cfg.emb_dim;
    if (B < 1) throw ValidationError("denoise_train_step: empty batch");
    if (x0.cols != D || static_cast<int>(labels.size()) != B) {
        throw ValidationError("denoise_train_step: batch shape mismatch");
    }
    for (ConditionLabel c : labels) {
        if (c == ConditionLabel::Null) {
            throw ValidationError("denoise_train_step: Null labels only arise via dropout");
        }
    }
    std::vector<ConditionLabel> eff = apply_label_dropout(labels, state.cfg.p_uncond, rng);
    if (effective_labels) *effective_labels = eff;

    Vec sigmas(B);
    for (int b = 0; b < B; ++b) sigmas[b] = std::exp(state.cfg.p_mean + state.cfg.p_std * rng.normal());
    Mat x_noisy(B, D);
    for (int b = 0; b < B; ++b) {
        for (int d = 0; d < D; ++d) x_noisy.at(b, d) = x0.at(b, d) + sigmas[b] * rng.normal();
    }

    Mat in = build_net_input(state.cfg, state.params, x_noisy, sigmas, eff);
    MlpCache cache;
    Mat f = mlp_forward(state.params.net, in, &cache);
    Mat denoised = apply_precond_out(state.cfg, x_noisy, f, sigmas);

    // d loss / d F = w(sigma) * 2 * (D - x0) * c_out / B
    Mat grad_f(B, D);
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const double w = edm_loss_weight(sigmas[b], state.cfg.sigma_data);
        const double c_out = precond(sigmas[b], state.cfg.sigma_data).c_out;
        double err = 0.0;
        for (int d = 0; d < D; ++d) {
            const double diff = denoised.at(b, d) - x0.at(b, d);
            err += diff * diff;
            grad_f.at(b, d) = w * 2.0 * diff * c_out / B;
        }
        loss += w * err;
    }
    loss /= B;

    MlpParams net_grads = zeros_like(state.params.net);
    Mat grad_in = mlp_backward(state.params.net, cache, grad_f, net_grads);

    Mat emb_grads(3, E);
    for (int b = 0; b < B; ++b) {
        double* g = emb_grads.row(static_cast<int>(eff[b]));
        const double* gi = grad_in.row(b);
        for (int e = 0; e < E; ++e) g[e] += gi[D + e];
    }

    adam_step(state.params.net, net_grads, state.adam_net, lr);
    state.emb_step += 1;
    adam_update(state.params.label_emb.a.data(), emb_grads.a.data(), state.emb_m.a.data(),
                state.emb_v.a.data(), state.params.label_emb.size(), state.emb_step, lr,
                state.adam_net.beta1, state.adam_net.beta2, state.adam_net.epsilon);

    const double decay = state.ema_decay;
    scale_params(state.ema.net, decay);
    axpy_params(1.0 - decay, state.params.net, state.ema.net);
    for (size_t i = 0; i < state.ema.label_emb.size(); ++i) {
        state.ema.label_emb.a[i] =
            decay * state.ema.label_emb.a[i] + (1.0 - decay) * state.params.label_emb.a[i];
    }
    return loss;
}

Vec cfg_score(const Vec& eps_cond, const Vec& eps_uncond, double w) {
    if (eps_cond.size() != eps_uncond.size()) throw ValidationError("cfg_score: shape mismatch");
    Vec out(eps_cond.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 + w) * eps_cond[i] - w * eps_uncond[i];
    }
    return out;
}

Vec classifier_grad_estimate(const Vec& eps_cond, const Vec& eps_uncond, double sigma) {
    if (eps_cond.size() != eps_uncond.size()) {
        throw ValidationError("classifier_grad_estimate: shape mismatch");
    }
    if (sigma <= 0.0) throw ValidationError("classifier_grad_estimate: sigma must be positive");
    Vec out(eps_cond.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = -(eps_cond[i] - eps_uncond[i]) / sigma;
    return out;
}

// Guided denoised value: (1+w) * D_cond - w * D_uncond, which equals applying
// the eps-space combination of cfg_score.
static Mat guided_denoise(const DenoiserState& state, const Mat& x, double sigma,
                          ConditionLabel label, double w) {
    const int B = x.rows;
    Vec sigmas(B, sigma);
    std::vector<ConditionLabel> lab(B, label);
    Mat d_cond = denoise_with(state.cfg, state.ema, x, sigmas, lab);
    if (label == ConditionLabel::Null || w == 0.0) return d_cond;
    std::vector<ConditionLabel> null_lab(B, ConditionLabel::Null);
    Mat d_uncond = denoise_with(state.cfg, state.ema, x, sigmas, null_lab);
    Mat out(B, x.cols);
    for (size_t i = 0; i < out.a.size(); ++i) {
        out.a[i] = (1.0 + w) * d_cond.a[i] - w * d_uncond.a[i];
    }
    return out;
}

static Mat sample_chunk(const DenoiserState& state, ConditionLabel label, double w,
                        const NoiseSchedule& schedule, int count, uint64_t chunk_seed) {
    const int D = state.cfg.data_dim;
    Rng rng(chunk_seed);
    std::vector<double> sig = schedule.sigmas();
    sig.push_back(0.0);
    const int N = schedule.n_steps;

    Mat x(count, D);
    for (auto& v : x.a) v = sig[0] * rng.normal();

    const double gamma_cap = std::sqrt(2.0) - 1.0;
    for (int i = 0; i < N; ++i) {
        const double t = sig[i];
        const double t_next = sig[i + 1];
        double gamma = 0.0;
        if (t >= schedule.s_tmin && t <= schedule.s_tmax) {
            gamma = std::min(schedule.s_churn / N, gamma_cap);
        }
        const double t_hat = t * (1.0 + gamma);
        if (gamma > 0.0) {
            const double extra = std::sqrt(t_hat * t_hat - t * t) * schedule.s_noise;
            for (auto& v : x.a) v += extra * rng.normal();
        }
        Mat denoised = guided_denoise(state, x, t_hat, label, w);
        Mat x_next(count, D);
        for (size_t k = 0; k < x.a.size(); ++k) {
            const double d = (x.a[k] - denoised.a[k]) / t_hat;
            x_next.a[k] = x.a[k] + (t_next - t_hat) * d;
        }
        if (t_next > 0.0) {  // Heun second-order correction
            Mat denoised2 = guided_denoise(state, x_next, t_next, label, w);
            for (size_t k = 0; k < x.a.size(); ++k) {
                const double d = (x.a[k] - denoised.a[k]) / t_hat;
                const double d2 = (x_next.a[k] - denoised2.a[k]) / t_next;
                x_next.a[k] = x.a[k] + (t_next - t_hat) * 0.5 * (d + d2);
            }
        }
        x = std::move(x_next);
    }
    return x;
}

Mat sample(const DenoiserState& state, ConditionLabel label, double w, const NoiseSchedule& schedule,
           int n, uint64_t seed, int threads) {
    if (n < 1) throw ValidationError("sample: n must be >= 1");
    for (const auto& l : state.ema.net.layers) {
        if (!all_finite(l.w.a.data(), l.w.size()) || !all_finite(l.b.data(), l.b.size())) {
            throw NumericError("sample: denoiser parameters are not finite");
        }
    }
    constexpr int kChunk = 256;  // fixed so the stream split is thread-count independent
    const int n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<Mat> parts(n_chunks);
    auto run_chunk = [&](int ci) {
        const int count = std::min(kChunk, n - ci * kChunk);
        parts[ci] = sample_chunk(state, label, w, schedule, count,
                                 derive_seed(seed, "sample-chunk", static_cast<uint64_t>(ci)));
    };
    int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
    if (n_threads == 1 || n_chunks == 1) {
        for (int ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
    } else {
        std::vector<std::future<void>> futs;
        std::atomic<int> next{0};
        for (int t = 0; t < std::min(n_threads, n_chunks); ++t) {
            futs.push_back(std::async(std::launch::async, [&]() {
                for (int ci = next.fetch_add(1); ci < n_chunks; ci = next.fetch_add(1)) run_chunk(ci);
            }));
        }
        for (auto& f : futs) f.get();
    }
    Mat out(n, state.cfg.data_dim);
    int row = 0;
    for (const auto& part : parts) {
        std::copy(part.a.begin(), part.a.end(), out.row(row));
        row += part.rows;
    }
    return out;
}

std::vector<Transition> generate_transitions(const DenoiserState& state, const TransitionCodec& codec,
                                             ConditionLabel label, double w,
                                             const NoiseSchedule& schedule, int n, uint64_t seed,
                                             const EnvSpec& spec, int threads) {
    std::vector<Transition> out;
    if (n == 0) return out;
    Mat samples = sample(state, label, w, schedule, n, seed, threads);
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Transition t = codec.decode(to_vec_row(samples, i));
        for (int d = 0; d < spec.state_dim; ++d) {
            t.state[d] = clamp(t.state[d], spec.lo[d], spec.hi[d]);
            t.next_state[d] = clamp(t.next_state[d], spec.lo[d], spec.hi[d]);
        }
        for (auto& a : t.action) a = clamp(a, -1.0, 1.0);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace cfdg
