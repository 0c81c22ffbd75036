#pragma once

#include <string>
#include <vector>

#include "cfdg/augmentor.hpp"

namespace cfdg {

// Every experiment knob, flat. Loaded from `key = value` files (# comments);
// unknown keys are rejected by name and a save/load round-trip is lossless.
struct ExperimentConfig {
    // experiment identity
    std::string env = "pointmass";
    std::string exp_name = "exp";
    std::string out_dir = "out";
    std::string dataset = "data/pointmass_medium.csv";
    std::vector<long> seeds = {0, 1, 2, 3, 4};
    std::string mode = "cfdg";

    // dataset generation
    std::string data_mix = "medium";
    long data_n = 20000;
    long data_seed = 0;

    // budgets
    long offline_steps = 20000;
    long online_steps = 5000;
    long eval_every = 250;
    long eval_episodes = 10;
    long batch_size = 128;

    // agent
    double gamma = 0.99;
    double tau_expectile = 0.7;
    double awr_beta = 3.0;
    double polyak_rho = 0.005;
    double lambda_cql_weight = 1.0;
    double lr_q = 3e-4;
    double lr_pi = 3e-4;
    long n_policy_actions = 4;
    double cql_noise_sigma = 0.2;
    double explore_sigma = 0.2;
    long agent_width = 64;
    long agent_depth = 2;

    // data mixing / augmentation
    std::string paradigm = "concat5050";  // concat5050 | oorb
    double r = 1.0 / 3.0;
    double syn_online_fraction = 0.8;
    double oorb_p = 0.5;
    long refresh_every = 500;
    long gen_count_per_refresh = 5000;
    long refresh_train_steps = 2000;
    double guidance_w = 1.0;
    long capacity_online = 100000;
    long capacity_offline = 1000000;
    long capacity_synthetic = 1000000;

    // denoiser
    long denoiser_width = 256;
    long denoiser_depth = 4;
    double denoiser_lr = 3e-4;
    long denoiser_batch = 128;
    double p_uncond = 0.1;
    long sample_steps = 32;
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double sigma_data = 1.0;
    long emb_dim = 32;
    long threads = 0;
};

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Applies one "key=value" assignment; unknown keys are rejected by name.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Throws ValidationError naming the offending field.
void validate_config(const ExperimentConfig& cfg);

AgentConfig agent_config(const ExperimentConfig& cfg);
MixConfig mix_config(const ExperimentConfig& cfg, const std::string& mode);
NoiseSchedule noise_schedule(const ExperimentConfig& cfg);
DenoiserConfig denoiser_config(const ExperimentConfig& cfg, int data_dim);

}  // namespace cfdg
