#include <CLI11.hpp>
#include <iostream>

#include "cfdg/experiment.hpp"

namespace {

cfdg::ExperimentConfig load_with_overrides(const std::string& config_path,
                                           const std::vector<std::string>& sets) {
    cfdg::ExperimentConfig cfg = cfdg::load_config(config_path);
    for (const auto& s : sets) cfdg::apply_override(cfg, s);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline-to-online RL with conditional diffusion data augmentation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mode;
    std::string out_path = "report.csv";
    std::vector<std::string> sets;
    std::vector<std::string> run_dirs;

    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "experiment config file")->required();
        sub->add_option("--set", sets, "override a config key, e.g. --set seeds=0,1");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate an offline dataset");
    add_config_opts(gen);

    CLI::App* off = app.add_subcommand("train-offline", "offline pre-training for every seed");
    add_config_opts(off);

    CLI::App* fin = app.add_subcommand("finetune", "online fine-tuning for every seed");
    add_config_opts(fin);
    fin->add_option("-m,--mode", mode,
                    "baseline | cfdg | cfdg_no_guidance | cfdg_no_offline_da (default: config key)");

    CLI::App* rep = app.add_subcommand("report", "aggregate learning curves across runs");
    rep->add_option("-o,--out", out_path, "output CSV path");
    rep->add_option("runs", run_dirs, "run directories (<out>/<exp>/<mode>/<seed>)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            cfdg::cmd_gen_data(load_with_overrides(config_path, sets));
        } else if (off->parsed()) {
            cfdg::cmd_train_offline(load_with_overrides(config_path, sets));
        } else if (fin->parsed()) {
            cfdg::ExperimentConfig cfg = load_with_overrides(config_path, sets);
            cfdg::cmd_finetune(cfg, mode.empty() ? cfg.mode : mode);
        } else if (rep->parsed()) {
            cfdg::cmd_report(run_dirs, out_path);
        }
    } catch (const cfdg::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cfdg::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const cfdg::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
