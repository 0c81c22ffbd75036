#include "cfdg/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace cfdg {

namespace fs = std::filesystem;

std::string run_dir(const ExperimentConfig& cfg, const std::string& stage, long seed) {
    return cfg.out_dir + "/" + cfg.exp_name + "/" + stage + "/" + std::to_string(seed);
}

static void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

static void ensure_dir(const std::string& path) { fs::create_directories(path); }

void save_curve_csv(const std::vector<CurveRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "step,return,normalized_score,loss_q,loss_pi,loss_v\n";
    for (const auto& r : rows) {
        os << r.step << "," << fmt_double(r.ret) << "," << fmt_double(r.norm_score) << ","
           << fmt_double(r.loss_q) << "," << fmt_double(r.loss_pi) << "," << fmt_double(r.loss_v)
           << "\n";
    }
    if (!os) throw IoError("write failed: " + path);
}

std::vector<CurveRow> load_curve_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open curve: " + path);
    std::vector<CurveRow> rows;
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty curve file: " + path);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f;
        CurveRow r;
        std::getline(ss, f, ',');
        r.step = parse_long(f);
        std::getline(ss, f, ',');
        r.ret = parse_double(f);
        std::getline(ss, f, ',');
        r.norm_score = parse_double(f);
        std::getline(ss, f, ',');
        r.loss_q = parse_double(f);
        std::getline(ss, f, ',');
        r.loss_pi = parse_double(f);
        std::getline(ss, f);
        r.loss_v = parse_double(f);
        rows.push_back(r);
    }
    return rows;
}

void cmd_gen_data(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const EnvSpec spec = make_env(cfg.env);
    const auto mix = parse_mix(cfg.data_mix);
    OfflineDataset ds = build_offline_dataset(spec, mix, static_cast<size_t>(cfg.data_n),
                                              static_cast<uint64_t>(cfg.data_seed));
    ensure_parent_dir(cfg.dataset);
    save_dataset(ds, cfg.dataset);
}

static Checkpoint agent_checkpoint(const AgentParams& params, const ExperimentConfig& cfg, long seed) {
    Checkpoint ck;
    ck.add_meta("env", cfg.env);
    ck.add_meta("seed", std::to_string(seed));
    ck.add_net("critic", params.critic);
    ck.add_net("target_critic", params.target_critic);
    ck.add_net("value", params.value);
    ck.add_net("policy", params.policy);
    return ck;
}

static AgentParams agent_from_checkpoint(const Checkpoint& ck) {
    AgentParams p;
    p.critic = ck.net("critic");
    p.target_critic = ck.net("target_critic");
    p.value = ck.net("value");
    p.policy = ck.net("policy");
    return p;
}

void run_offline_for_seed(const ExperimentConfig& cfg, long seed) {
    const EnvSpec spec = make_env(cfg.env);
    OfflineDataset ds = load_dataset(cfg.dataset, spec);
    const RefScores refs = reference_scores(spec);
    const AgentConfig acfg = agent_config(cfg);
    const uint64_t master = static_cast<uint64_t>(seed);

    Rng init_rng(derive_seed(master, "agent-init"));
    AgentState agent = make_agent_state(make_agent(spec.state_dim, spec.action_dim,
                                                   static_cast<int>(cfg.agent_width),
                                                   static_cast<int>(cfg.agent_depth), init_rng));
    Rng batch_rng(derive_seed(master, "offline-batches"));
    Rng train_rng(derive_seed(master, "agent"));
    const uint64_t eval_seed = derive_seed(master, "offline-eval");

    std::vector<CurveRow> curve;
    double acc_q = 0.0, acc_pi = 0.0, acc_v = 0.0;
    long acc_n = 0;
    std::vector<TaggedTransition> items(cfg.batch_size);
    for (long step = 1; step <= cfg.offline_steps; ++step) {
        for (long i = 0; i < cfg.batch_size; ++i) {
            items[i] = {ds.transitions[batch_rng.uniform_index(ds.transitions.size())],
                        Source::Offline};
        }
        StepDiag diag = train_step(agent, make_batch(items), acfg, train_rng);
        acc_q += diag.loss_q;
        acc_pi += diag.loss_pi;
        acc_v += diag.loss_v;
        acc_n += 1;
        if (step % cfg.eval_every == 0) {
            const MlpParams policy = agent.params.policy;
            Policy eval_policy = [&policy](const Vec& s, Rng&) { return policy_action(policy, s); };
            const double ret = rollout(spec, eval_policy,
                                       derive_seed(eval_seed, "point", static_cast<uint64_t>(step)),
                                       static_cast<int>(cfg.eval_episodes))
                                   .mean_return;
            curve.push_back({step, ret, normalized_score(ret, refs.random_ref, refs.expert_ref),
                             acc_q / acc_n, acc_pi / acc_n, acc_v / acc_n});
            acc_q = acc_pi = acc_v = 0.0;
            acc_n = 0;
        }
    }

    const std::string dir = run_dir(cfg, "offline", seed);
    ensure_dir(dir);
    agent_checkpoint(agent.params, cfg, seed).save(dir + "/agent.ckpt");
    save_curve_csv(curve, dir + "/curve_offline.csv");
}

void cmd_train_offline(const ExperimentConfig& cfg) {
    validate_config(cfg);
    for (long seed : cfg.seeds) run_offline_for_seed(cfg, seed);
}

void run_finetune_for_seed(const ExperimentConfig& cfg, const std::string& mode, long seed) {
    const EnvSpec spec = make_env(cfg.env);
    OfflineDataset ds = load_dataset(cfg.dataset, spec);
    const RefScores refs = reference_scores(spec);
    const AgentConfig acfg = agent_config(cfg);
    const MixConfig mix = mix_config(cfg, mode);
    const NoiseSchedule schedule = noise_schedule(cfg);
    const uint64_t master = static_cast<uint64_t>(seed);

    const std::string offline_ckpt = run_dir(cfg, "offline", seed) + "/agent.ckpt";
    AgentState agent = make_agent_state(agent_from_checkpoint(Checkpoint::load(offline_ckpt)));

    BufferSet buffers(static_cast<size_t>(cfg.capacity_online),
                      static_cast<size_t>(cfg.capacity_offline),
                      static_cast<size_t>(cfg.capacity_synthetic));
    for (const auto& t : ds.transitions) buffers.d_off.push(t);

    const TransitionCodec codec = fit_codec(ds.transitions);
    Rng denoiser_rng(derive_seed(master, "denoiser-init"));
    DenoiserState model = make_denoiser(denoiser_config(cfg, codec.dim()), denoiser_rng);

    OnlineCfg online;
    online.total_steps = cfg.online_steps;
    online.eval_every = cfg.eval_every;
    online.eval_episodes = static_cast<int>(cfg.eval_episodes);
    online.batch_size = static_cast<size_t>(cfg.batch_size);

    std::vector<CurveRow> curve = run_online_phase(agent, buffers, model, codec, spec, acfg, mix,
                                                   schedule, online, refs, master);

    const std::string dir = run_dir(cfg, mode, seed);
    ensure_dir(dir);
    save_curve_csv(curve, dir + "/curve_online.csv");
    agent_checkpoint(agent.params, cfg, seed).save(dir + "/agent.ckpt");

    if (mode != "baseline") {
        Checkpoint dck;
        dck.add_meta("env", cfg.env);
        dck.add_meta("seed", std::to_string(seed));
        dck.add_meta("label_order", "offline online null");
        dck.add_net("denoiser", model.params.net);
        for (int i = 0; i < 3; ++i) {
            dck.add_vec(std::string("label_emb_") + label_name(static_cast<ConditionLabel>(i)),
                        to_vec_row(model.params.label_emb, i));
        }
        dck.add_vec("codec_mean", codec.mean);
        dck.add_vec("codec_std", codec.std);
        dck.save(dir + "/denoiser.ckpt");
        if (buffers.d_on_syn.size() + buffers.d_off_syn.size() > 0) {
            save_divergence_csv(divergence_report(buffers, codec, 20, derive_seed(master, "diag")),
                                dir + "/divergence.csv");
        }
    }
}

void cmd_finetune(const ExperimentConfig& cfg, const std::string& mode) {
    validate_config(cfg);
    MixConfig check = mix_config(cfg, mode);  // validates the mode name
    (void)check;
    for (long seed : cfg.seeds) {
        const std::string offline_ckpt = run_dir(cfg, "offline", seed) + "/agent.ckpt";
        if (!fs::exists(offline_ckpt)) {
            throw IoError("missing offline checkpoint: " + offline_ckpt);
        }
    }
    for (long seed : cfg.seeds) run_finetune_for_seed(cfg, mode, seed);
}

void cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path) {
    if (run_dirs.empty()) throw ValidationError("report: need at least one run directory");
    std::map<std::string, std::vector<CurveSeries>> by_mode;
    for (const auto& dir : run_dirs) {
        const fs::path p(dir);
        const std::string mode = p.parent_path().filename().string();
        std::vector<CurveRow> rows = load_curve_csv(dir + "/curve_online.csv");
        CurveSeries series;
        for (const auto& r : rows) series.push_back({r.step, r.norm_score});
        by_mode[mode].push_back(std::move(series));
    }
    ensure_parent_dir(out_path);
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + out_path);
    os << "step,mode,mean,std,n_seeds\n";
    for (const auto& [mode, runs] : by_mode) {
        CurveStats stats = aggregate_curves(runs);
        for (size_t i = 0; i < stats.steps.size(); ++i) {
            os << stats.steps[i] << "," << mode << "," << fmt_double(stats.mean[i]) << ","
               << fmt_double(stats.stdev[i]) << "," << runs.size() << "\n";
        }
    }
    if (!os) throw IoError("write failed: " + out_path);
}

}  // namespace cfdg
