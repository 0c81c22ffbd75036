#include "cfdg/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace cfdg {

namespace {

struct KeyBinding {
    std::string name;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string seeds_to_string(const std::vector<long>& seeds) {
    std::string out;
    for (long s : seeds) {
        if (!out.empty()) out += ",";
        out += std::to_string(s);
    }
    return out;
}

std::vector<long> seeds_from_string(const std::string& text) {
    std::vector<long> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_long(item));
    }
    if (out.empty()) throw ValidationError("seeds: expected a comma-separated integer list");
    return out;
}

std::vector<KeyBinding> make_bindings() {
    std::vector<KeyBinding> keys;
    auto str = [&](const char* name, std::string ExperimentConfig::* f) {
        keys.push_back({name, [f](const ExperimentConfig& c) { return c.*f; },
                        [f](ExperimentConfig& c, const std::string& v) { c.*f = v; }});
    };
    auto num = [&](const char* name, double ExperimentConfig::* f) {
        keys.push_back({name, [f](const ExperimentConfig& c) { return fmt_double(c.*f); },
                        [f](ExperimentConfig& c, const std::string& v) { c.*f = parse_double(v); }});
    };
    auto integer = [&](const char* name, long ExperimentConfig::* f) {
        keys.push_back({name, [f](const ExperimentConfig& c) { return std::to_string(c.*f); },
                        [f](ExperimentConfig& c, const std::string& v) { c.*f = parse_long(v); }});
    };

    str("env", &ExperimentConfig::env);
    str("exp_name", &ExperimentConfig::exp_name);
    str("out_dir", &ExperimentConfig::out_dir);
    str("dataset", &ExperimentConfig::dataset);
    keys.push_back({"seeds", [](const ExperimentConfig& c) { return seeds_to_string(c.seeds); },
                    [](ExperimentConfig& c, const std::string& v) { c.seeds = seeds_from_string(v); }});
    str("mode", &ExperimentConfig::mode);
    str("data_mix", &ExperimentConfig::data_mix);
    integer("data_n", &ExperimentConfig::data_n);
    integer("data_seed", &ExperimentConfig::data_seed);
    integer("offline_steps", &ExperimentConfig::offline_steps);
    integer("online_steps", &ExperimentConfig::online_steps);
    integer("eval_every", &ExperimentConfig::eval_every);
    integer("eval_episodes", &ExperimentConfig::eval_episodes);
    integer("batch_size", &ExperimentConfig::batch_size);
    num("gamma", &ExperimentConfig::gamma);
    num("tau_expectile", &ExperimentConfig::tau_expectile);
    num("awr_beta", &ExperimentConfig::awr_beta);
    num("polyak_rho", &ExperimentConfig::polyak_rho);
    num("lambda_cql_weight", &ExperimentConfig::lambda_cql_weight);
    num("lr_q", &ExperimentConfig::lr_q);
    num("lr_pi", &ExperimentConfig::lr_pi);
    integer("n_policy_actions", &ExperimentConfig::n_policy_actions);
    num("cql_noise_sigma", &ExperimentConfig::cql_noise_sigma);
    num("explore_sigma", &ExperimentConfig::explore_sigma);
    integer("agent_width", &ExperimentConfig::agent_width);
    integer("agent_depth", &ExperimentConfig::agent_depth);
    str("paradigm", &ExperimentConfig::paradigm);
    num("r", &ExperimentConfig::r);
    num("syn_online_fraction", &ExperimentConfig::syn_online_fraction);
    num("oorb_p", &ExperimentConfig::oorb_p);
    integer("refresh_every", &ExperimentConfig::refresh_every);
    integer("gen_count_per_refresh", &ExperimentConfig::gen_count_per_refresh);
    integer("refresh_train_steps", &ExperimentConfig::refresh_train_steps);
    num("guidance_w", &ExperimentConfig::guidance_w);
    integer("capacity_online", &ExperimentConfig::capacity_online);
    integer("capacity_offline", &ExperimentConfig::capacity_offline);
    integer("capacity_synthetic", &ExperimentConfig::capacity_synthetic);
    integer("denoiser_width", &ExperimentConfig::denoiser_width);
    integer("denoiser_depth", &ExperimentConfig::denoiser_depth);
    num("denoiser_lr", &ExperimentConfig::denoiser_lr);
    integer("denoiser_batch", &ExperimentConfig::denoiser_batch);
    num("p_uncond", &ExperimentConfig::p_uncond);
    integer("sample_steps", &ExperimentConfig::sample_steps);
    num("sigma_min", &ExperimentConfig::sigma_min);
    num("sigma_max", &ExperimentConfig::sigma_max);
    num("sigma_data", &ExperimentConfig::sigma_data);
    integer("emb_dim", &ExperimentConfig::emb_dim);
    integer("threads", &ExperimentConfig::threads);
    return keys;
}

const std::vector<KeyBinding>& bindings() {
    static const std::vector<KeyBinding> keys = make_bindings();
    return keys;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(0, 1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    return s;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open config: " + path);
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const auto& b : bindings()) {
            if (b.name == key) {
                b.set(cfg, value);
                found = true;
                break;
            }
        }
        if (!found) throw ValidationError("unknown config key '" + key + "'");
    }
    return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ValidationError("override '" + assignment + "': expected key=value");
    }
    const std::string key = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    for (const auto& b : bindings()) {
        if (b.name == key) {
            b.set(cfg, value);
            return;
        }
    }
    throw ValidationError("unknown config key '" + key + "'");
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    for (const auto& b : bindings()) {
        os << b.name << " = " << b.get(cfg) << "\n";
    }
    if (!os) throw IoError("write failed: " + path);
}

static void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ValidationError("config field '" + field + "': " + what);
}

void validate_config(const ExperimentConfig& cfg) {
    require(cfg.env == "pointmass" || cfg.env == "fourroom", "env",
            "expected pointmass or fourroom, got '" + cfg.env + "'");
    require(!cfg.seeds.empty(), "seeds", "must be nonempty");
    require(cfg.data_n >= 1, "data_n", "must be >= 1");
    require(cfg.offline_steps >= 1, "offline_steps", "must be >= 1");
    require(cfg.online_steps >= 1, "online_steps", "must be >= 1");
    require(cfg.eval_every >= 1 && cfg.eval_every <= cfg.online_steps, "eval_every",
            "must be in [1, online_steps]");
    require(cfg.eval_episodes >= 1, "eval_episodes", "must be >= 1");
    require(cfg.batch_size >= 3, "batch_size", "must be >= 3");
    require(cfg.gamma > 0.0 && cfg.gamma < 1.0, "gamma", "must be in (0,1)");
    require(cfg.tau_expectile > 0.0 && cfg.tau_expectile < 1.0, "tau_expectile", "must be in (0,1)");
    require(cfg.awr_beta > 0.0, "awr_beta", "must be positive");
    require(cfg.polyak_rho > 0.0 && cfg.polyak_rho <= 1.0, "polyak_rho", "must be in (0,1]");
    require(cfg.lambda_cql_weight >= 0.0, "lambda_cql_weight", "must be >= 0");
    require(cfg.lr_q > 0.0, "lr_q", "must be positive");
    require(cfg.lr_pi > 0.0, "lr_pi", "must be positive");
    require(cfg.n_policy_actions >= 1, "n_policy_actions", "must be >= 1");
    require(cfg.agent_width >= 1 && cfg.agent_depth >= 1, "agent_width", "must be >= 1");
    require(cfg.paradigm == "concat5050" || cfg.paradigm == "oorb", "paradigm",
            "expected concat5050 or oorb, got '" + cfg.paradigm + "'");
    require(cfg.r >= 0.0 && cfg.r < 1.0, "r", "must be in [0,1)");
    require(cfg.syn_online_fraction >= 0.0 && cfg.syn_online_fraction <= 1.0, "syn_online_fraction",
            "must be in [0,1]");
    require(cfg.oorb_p >= 0.0 && cfg.oorb_p <= 1.0, "oorb_p", "must be in [0,1]");
    require(cfg.refresh_every >= 1, "refresh_every", "must be >= 1");
    require(cfg.gen_count_per_refresh >= 1, "gen_count_per_refresh", "must be >= 1");
    require(cfg.refresh_train_steps >= 1, "refresh_train_steps", "must be >= 1");
    require(cfg.capacity_online >= 1 && cfg.capacity_offline >= 1 && cfg.capacity_synthetic >= 1,
            "capacity_online", "capacities must be >= 1");
    require(cfg.denoiser_width >= 1 && cfg.denoiser_depth >= 1, "denoiser_width", "must be >= 1");
    require(cfg.denoiser_batch >= 2, "denoiser_batch", "must be >= 2");
    require(cfg.denoiser_lr > 0.0, "denoiser_lr", "must be positive");
    require(cfg.p_uncond >= 0.0 && cfg.p_uncond <= 1.0, "p_uncond", "must be in [0,1]");
    require(cfg.sample_steps >= 1, "sample_steps", "must be >= 1");
    require(cfg.sigma_max > cfg.sigma_min && cfg.sigma_min > 0.0, "sigma_min",
            "need sigma_max > sigma_min > 0");
    require(cfg.sigma_data > 0.0, "sigma_data", "must be positive");
    require(cfg.emb_dim >= 2 && cfg.emb_dim % 2 == 0, "emb_dim", "must be even and >= 2");
    require(cfg.mode == "baseline" || cfg.mode == "cfdg" || cfg.mode == "cfdg_no_guidance" ||
                cfg.mode == "cfdg_no_offline_da",
            "mode", "expected baseline|cfdg|cfdg_no_guidance|cfdg_no_offline_da, got '" + cfg.mode + "'");
}

AgentConfig agent_config(const ExperimentConfig& cfg) {
    AgentConfig a;
    a.gamma = cfg.gamma;
    a.tau_expectile = cfg.tau_expectile;
    a.awr_beta = cfg.awr_beta;
    a.polyak_rho = cfg.polyak_rho;
    a.lambda_cql_weight = cfg.lambda_cql_weight;
    a.lr_q = cfg.lr_q;
    a.lr_pi = cfg.lr_pi;
    a.n_policy_actions = static_cast<int>(cfg.n_policy_actions);
    a.cql_noise_sigma = cfg.cql_noise_sigma;
    a.explore_sigma = cfg.explore_sigma;
    return a;
}

MixConfig mix_config(const ExperimentConfig& cfg, const std::string& mode) {
    MixConfig m;
    m.r = cfg.r;
    m.syn_online_fraction = cfg.syn_online_fraction;
    m.oorb_p = cfg.oorb_p;
    m.refresh_every = cfg.refresh_every;
    m.gen_count_per_refresh = cfg.gen_count_per_refresh;
    m.refresh_train_steps = cfg.refresh_train_steps;
    m.paradigm = cfg.paradigm == "oorb" ? Paradigm::Oorb : Paradigm::Concat5050;
    m.guidance_w = cfg.guidance_w;
    m.denoiser_batch = static_cast<int>(cfg.denoiser_batch);
    m.denoiser_lr = cfg.denoiser_lr;
    m.sample_threads = static_cast<int>(cfg.threads);
    if (mode == "baseline") {
        m.r = 0.0;
        m.refresh_every = cfg.online_steps + 1;  // augmentation fully disabled
    } else if (mode == "cfdg_no_guidance") {
        m.unconditional_gen = true;
    } else if (mode == "cfdg_no_offline_da") {
        m.syn_online_fraction = 1.0;
    } else if (mode != "cfdg") {
        throw ValidationError("unknown mode '" + mode + "'");
    }
    return m;
}

NoiseSchedule noise_schedule(const ExperimentConfig& cfg) {
    NoiseSchedule s;
    s.sigma_min = cfg.sigma_min;
    s.sigma_max = cfg.sigma_max;
    s.n_steps = static_cast<int>(cfg.sample_steps);
    return s;
}

DenoiserConfig denoiser_config(const ExperimentConfig& cfg, int data_dim) {
    DenoiserConfig d;
    d.data_dim = data_dim;
    d.emb_dim = static_cast<int>(cfg.emb_dim);
    d.width = static_cast<int>(cfg.denoiser_width);
    d.depth = static_cast<int>(cfg.denoiser_depth);
    d.p_uncond = cfg.p_uncond;
    d.sigma_data = cfg.sigma_data;
    return d;
}

}  // namespace cfdg
