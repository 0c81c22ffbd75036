#pragma once

#include "cfdg/dataset.hpp"
#include "cfdg/diffusion.hpp"
#include "cfdg/rlcore.hpp"

namespace cfdg {

// FIFO ring with uniform sampling; every stored transition carries its
// buffer's source tag.
class ReplayBuffer {
public:
    ReplayBuffer(size_t capacity, Source tag);

    void push(Transition t);
    void clear();
    size_t size() const { return data_.size(); }
    size_t capacity() const { return capacity_; }
    Source tag() const { return tag_; }
    const Transition& at(size_t i) const { return data_[i]; }
    const Transition& sample(Rng& rng) const;
    std::vector<Transition> snapshot() const { return data_; }

private:
    size_t capacity_;
    Source tag_;
    std::vector<Transition> data_;
    size_t next_ = 0;  // overwrite cursor once full
};

struct BufferSet {
    ReplayBuffer d_on;
    ReplayBuffer d_off;
    ReplayBuffer d_on_syn;
    ReplayBuffer d_off_syn;

    BufferSet(size_t cap_on, size_t cap_off, size_t cap_syn)
        : d_on(cap_on, Source::Online),
          d_off(cap_off, Source::Offline),
          d_on_syn(cap_syn, Source::SynOnline),
          d_off_syn(cap_syn, Source::SynOffline) {}
};

enum class Paradigm { Concat5050, Oorb };

struct MixConfig {
    double r = 1.0 / 3.0;             // synthetic fraction per batch
    double syn_online_fraction = 0.8;  // online share of the synthetic slice
    double oorb_p = 0.5;               // P(batch real source = online), OORB paradigm
    long refresh_every = 500;          // environment steps between model refreshes
    long gen_count_per_refresh = 5000;
    Paradigm paradigm = Paradigm::Concat5050;
    double guidance_w = 1.0;
    bool unconditional_gen = false;  // no-guidance ablation: Null label, w = 0
    long refresh_train_steps = 2000;
    int denoiser_batch = 128;
    double denoiser_lr = 3e-4;
    int sample_threads = 0;
};

// Closed-form slice sizes (round half up on the synthetic counts, odd real
// remainder goes to offline).
struct ComposeCounts {
    size_t n_on = 0, n_off = 0, n_syn_on = 0, n_syn_off = 0;
};
ComposeCounts concat_counts(size_t batch_size, double r, double syn_online_fraction);
size_t round_half_up(double x);

bool maybe_refresh(long step, const MixConfig& cfg);

// Fine-tunes the denoiser on the current real buffers (true labels, balanced
// halves), clears the synthetic buffers, then refills them with freshly
// generated data split syn_online_fraction : 1 - syn_online_fraction.
void refresh_and_generate(BufferSet& buffers, DenoiserState& model, const TransitionCodec& codec,
                          const MixConfig& cfg, const NoiseSchedule& schedule, const EnvSpec& spec,
                          uint64_t seed);

// Paradigm 1: equal online/offline halves plus an r-fraction synthetic slice
// split 8:2 by default. Uniform draws with replacement, shuffled order.
std::vector<TaggedTransition> compose_batch_concat(const BufferSet& buffers, size_t batch_size,
                                                   const MixConfig& cfg, Rng& rng);

// Paradigm 2: one Bernoulli(p) draw picks the real source; synthetic samples
// carry the matching label.
std::vector<TaggedTransition> compose_batch_oorb(const BufferSet& buffers, size_t batch_size,
                                                 const MixConfig& cfg, Rng& rng);

struct OnlineCfg {
    long total_steps = 5000;
    long eval_every = 250;
    int eval_episodes = 10;
    size_t batch_size = 128;
};

struct CurveRow {
    long step = 0;
    double ret = 0.0;
    double norm_score = 0.0;
    double loss_q = 0.0;
    double loss_pi = 0.0;
    double loss_v = 0.0;
};

// The online fine-tuning loop: act and store, refresh the generator on
// schedule, compose batches per paradigm, train, evaluate on a fixed cadence.
// All randomness comes from named streams of `seed`.
std::vector<CurveRow> run_online_phase(AgentState& agent, BufferSet& buffers, DenoiserState& model,
                                       const TransitionCodec& codec, const EnvSpec& spec,
                                       const AgentConfig& agent_cfg, const MixConfig& mix,
                                       const NoiseSchedule& schedule, const OnlineCfg& online,
                                       const RefScores& refs, uint64_t seed);

}  // namespace cfdg
