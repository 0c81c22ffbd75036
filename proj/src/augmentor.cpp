#include "cfdg/augmentor.hpp"

#include <algorithm>
#include <cmath>

namespace cfdg {

ReplayBuffer::ReplayBuffer(size_t capacity, Source tag) : capacity_(capacity), tag_(tag) {
    if (capacity_ < 1) throw ValidationError("ReplayBuffer: capacity must be >= 1");
    data_.reserve(std::min<size_t>(capacity_, 1 << 20));
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
        next_ = (next_ + 1) % capacity_;
    }
}

void ReplayBuffer::clear() {
    data_.clear();
    next_ = 0;
}

const Transition& ReplayBuffer::sample(Rng& rng) const {
    if (data_.empty()) throw ValidationError("ReplayBuffer: sample from empty buffer");
    return data_[rng.uniform_index(data_.size())];
}

size_t round_half_up(double x) { return static_cast<size_t>(std::floor(x + 0.5)); }

ComposeCounts concat_counts(size_t batch_size, double r, double syn_online_fraction) {
    ComposeCounts c;
    const size_t n_syn = round_half_up(r * static_cast<double>(batch_size));
    c.n_syn_on = round_half_up(syn_online_fraction * static_cast<double>(n_syn));
    c.n_syn_off = n_syn - c.n_syn_on;
    const size_t n_real = batch_size - n_syn;
    c.n_on = n_real / 2;  // odd remainder goes to offline
    c.n_off = n_real - c.n_on;
    return c;
}

bool maybe_refresh(long step, const MixConfig& cfg) {
    if (step < 0) throw ValidationError("maybe_refresh: step must be >= 0");
    if (cfg.refresh_every < 1) throw ValidationError("maybe_refresh: refresh_every must be >= 1");
    return step > 0 && step % cfg.refresh_every == 0;
}

static void draw_into(std::vector<TaggedTransition>& out, const ReplayBuffer& buf, size_t count,
                      const char* name, Rng& rng) {
    if (count == 0) return;
    if (buf.size() == 0) {
        throw ValidationError(std::string("compose: buffer ") + name + " is empty");
    }
    for (size_t i = 0; i < count; ++i) out.push_back({buf.sample(rng), buf.tag()});
}

static void shuffle_batch(std::vector<TaggedTransition>& batch, Rng& rng) {
    for (size_t i = batch.size(); i > 1; --i) {
        std::swap(batch[i - 1], batch[rng.uniform_index(i)]);
    }
}

std::vector<TaggedTransition> compose_batch_concat(const BufferSet& buffers, size_t batch_size,
                                                   const MixConfig& cfg, Rng& rng) {
    if (batch_size < 3) throw ValidationError("compose_batch_concat: batch size must be >= 3");
    const ComposeCounts c = concat_counts(batch_size, cfg.r, cfg.syn_online_fraction);
    std::vector<TaggedTransition> batch;
    batch.reserve(batch_size);
    draw_into(batch, buffers.d_on, c.n_on, "d_on", rng);
    draw_into(batch, buffers.d_off, c.n_off, "d_off", rng);
    draw_into(batch, buffers.d_on_syn, c.n_syn_on, "d_on_syn", rng);
    draw_into(batch, buffers.d_off_syn, c.n_syn_off, "d_off_syn", rng);
    shuffle_batch(batch, rng);
    return batch;
}

std::vector<TaggedTransition> compose_batch_oorb(const BufferSet& buffers, size_t batch_size,
                                                 const MixConfig& cfg, Rng& rng) {
    if (batch_size < 3) throw ValidationError("compose_batch_oorb: batch size must be >= 3");
    const bool online = rng.bernoulli(cfg.oorb_p);
    const size_t n_syn = round_half_up(cfg.r * static_cast<double>(batch_size));
    const size_t n_real = batch_size - n_syn;
    std::vector<TaggedTransition> batch;
    batch.reserve(batch_size);
    if (online) {
        draw_into(batch, buffers.d_on, n_real, "d_on", rng);
        draw_into(batch, buffers.d_on_syn, n_syn, "d_on_syn", rng);
    } else {
        draw_into(batch, buffers.d_off, n_real, "d_off", rng);
        draw_into(batch, buffers.d_off_syn, n_syn, "d_off_syn", rng);
    }
    shuffle_batch(batch, rng);
    return batch;
}

void refresh_and_generate(BufferSet& buffers, DenoiserState& model, const TransitionCodec& codec,
                          const MixConfig& cfg, const NoiseSchedule& schedule, const EnvSpec& spec,
                          uint64_t seed) {
    if (buffers.d_on.size() == 0 || buffers.d_off.size() == 0) {
        throw ValidationError("refresh_and_generate: real buffers must be nonempty");
    }
    // Fine-tune on the current real data, balanced halves with true labels.
    Rng train_rng(derive_seed(seed, "refresh-train"));
    const int B = cfg.denoiser_batch;
    const int half = B / 2;
    for (long step = 0; step < cfg.refresh_train_steps; ++step) {
        Mat x0(B, codec.dim());
        std::vector<ConditionLabel> labels(B);
        for (int i = 0; i < B; ++i) {
            const bool from_on = i < half;
            const Transition& t =
                from_on ? buffers.d_on.sample(train_rng) : buffers.d_off.sample(train_rng);
            const Vec enc = codec.encode(t);
            std::copy(enc.begin(), enc.end(), x0.row(i));
            labels[i] = from_on ? ConditionLabel::Online : ConditionLabel::Offline;
        }
        denoise_train_step(model, x0, labels, cfg.denoiser_lr, train_rng);
    }

    // Stale synthetic data from older policies is dropped before refilling.
    buffers.d_on_syn.clear();
    buffers.d_off_syn.clear();

    const size_t n_on = round_half_up(cfg.syn_online_fraction *
                                      static_cast<double>(cfg.gen_count_per_refresh));
    const size_t n_off = static_cast<size_t>(cfg.gen_count_per_refresh) - n_on;
    const double w = cfg.unconditional_gen ? 0.0 : cfg.guidance_w;
    const ConditionLabel on_label =
        cfg.unconditional_gen ? ConditionLabel::Null : ConditionLabel::Online;
    const ConditionLabel off_label =
        cfg.unconditional_gen ? ConditionLabel::Null : ConditionLabel::Offline;
    if (n_on > 0) {
        for (auto& t : generate_transitions(model, codec, on_label, w, schedule,
                                            static_cast<int>(n_on), derive_seed(seed, "gen-online"),
                                            spec, cfg.sample_threads)) {
            buffers.d_on_syn.push(std::move(t));
        }
    }
    if (n_off > 0) {
        for (auto& t : generate_transitions(model, codec, off_label, w, schedule,
                                            static_cast<int>(n_off), derive_seed(seed, "gen-offline"),
                                            spec, cfg.sample_threads)) {
            buffers.d_off_syn.push(std::move(t));
        }
    }
}

std::vector<CurveRow> run_online_phase(AgentState& agent, BufferSet& buffers, DenoiserState& model,
                                       const TransitionCodec& codec, const EnvSpec& spec,
                                       const AgentConfig& agent_cfg, const MixConfig& mix,
                                       const NoiseSchedule& schedule, const OnlineCfg& online,
                                       const RefScores& refs, uint64_t seed) {
    if (buffers.d_off.size() == 0) {
        throw ValidationError("run_online_phase: offline buffer is empty");
    }
    Rng env_rng(derive_seed(seed, "env"));
    Rng agent_rng(derive_seed(seed, "agent"));
    Rng compose_rng(derive_seed(seed, "composition"));
    const uint64_t refresh_seed = derive_seed(seed, "diffusion");
    const uint64_t eval_seed = derive_seed(seed, "eval");

    std::vector<CurveRow> curve;
    double acc_q = 0.0, acc_pi = 0.0, acc_v = 0.0;
    long acc_n = 0;

    Vec state = sample_start(spec, env_rng);
    int episode_step = 0;
    for (long step = 1; step <= online.total_steps; ++step) {
        // Act with exploration noise, store into the online buffer.
        Vec action = policy_action(agent.params.policy, state);
        for (auto& a : action) {
            a = clamp(a + agent_cfg.explore_sigma * agent_rng.normal(), -1.0, 1.0);
        }
        ++episode_step;
        StepResult r = env_step(spec, state, action, episode_step);
        buffers.d_on.push({state, action, r.reward, r.next_state, r.terminal});
        if (r.terminal) {
            state = sample_start(spec, env_rng);
            episode_step = 0;
        } else {
            state = r.next_state;
        }

        if (maybe_refresh(step, mix)) {
            refresh_and_generate(buffers, model, codec, mix, schedule, spec,
                                 derive_seed(refresh_seed, "refresh",
                                             static_cast<uint64_t>(step / mix.refresh_every)));
        }

        // Until the first refresh has populated the synthetic buffers, the
        // union contains only real data and batches are composed with r = 0.
        MixConfig batch_mix = mix;
        if (buffers.d_on_syn.size() + buffers.d_off_syn.size() == 0) batch_mix.r = 0.0;
        std::vector<TaggedTransition> batch =
            mix.paradigm == Paradigm::Concat5050
                ? compose_batch_concat(buffers, online.batch_size, batch_mix, compose_rng)
                : compose_batch_oorb(buffers, online.batch_size, batch_mix, compose_rng);
        StepDiag diag = train_step(agent, make_batch(batch), agent_cfg, agent_rng);
        acc_q += diag.loss_q;
        acc_pi += diag.loss_pi;
        acc_v += diag.loss_v;
        acc_n += 1;

        if (step % online.eval_every == 0) {
            const MlpParams policy = agent.params.policy;  // read-only snapshot
            Policy eval_policy = [&policy](const Vec& s, Rng&) { return policy_action(policy, s); };
            const double ret =
                rollout(spec, eval_policy, derive_seed(eval_seed, "point", static_cast<uint64_t>(step)),
                        online.eval_episodes)
                    .mean_return;
            CurveRow row;
            row.step = step;
            row.ret = ret;
            row.norm_score = normalized_score(ret, refs.random_ref, refs.expert_ref);
            row.loss_q = acc_q / acc_n;
            row.loss_pi = acc_pi / acc_n;
            row.loss_v = acc_v / acc_n;
            curve.push_back(row);
            acc_q = acc_pi = acc_v = 0.0;
            acc_n = 0;
        }
    }
    return curve;
}

}  // namespace cfdg
