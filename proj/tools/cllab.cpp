#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "cllab/commands.hpp"
#include "cllab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale contrastive sentence-embedding laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string checkpoint_path;
    std::string values_csv;
    std::string pads_csv;
    std::string pairs_tsv;
    std::string axis;
    std::size_t jobs = 1;
    std::size_t k = 10;
    std::size_t draws = 200;
    bool deterministic = false;
    double step = 1e-5;
    double threshold = 1e-4;
    std::size_t seeds = 5;
    bool inject_sign_flip = false;
    bool show_schema = false;

    auto* train = app.add_subcommand("train", "Train one configuration");
    train->add_option("--config", config_path, "experiment config file")->required();
    train->add_option("--set", overrides, "key=value override (repeatable)");
    train->add_flag("--schema", show_schema, "print the config key schema and exit");

    auto* ablate = app.add_subcommand("ablate", "Run a hyperparameter or noise grid");
    ablate->add_option("--config", config_path, "experiment config file")->required();
    ablate->add_option("--set", overrides, "key=value override (repeatable)");
    ablate->add_option("--axis", axis, "m | lambda_dcl | tau_dcl | noise")->required();
    ablate->add_option("--values", values_csv, "comma-separated grid values (numeric axes)");
    ablate->add_option("--jobs", jobs, "parallel worker threads (default 1)");

    auto* diagnose = app.add_subcommand("diagnose", "Rank/variance/geometry report");
    diagnose->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    diagnose->add_option("--config", config_path, "experiment config file")->required();
    diagnose->add_option("--set", overrides, "key=value override (repeatable)");
    diagnose->add_option("--pads", pads_csv, "pad list (default 0,100,300,704)");
    diagnose->add_option("--k", k, "mean-sampling K (default 10)");
    diagnose->add_option("--draws", draws, "Monte-Carlo draws (default 200)");
    diagnose->add_flag("--deterministic", deterministic, "use dropout-free forwards");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    gradcheck->add_option("--step", step, "central-difference step (default 1e-5)");
    gradcheck->add_option("--threshold", threshold, "max relative error (default 1e-4)");
    gradcheck->add_option("--seeds", seeds, "random batches per objective (default 5)");
    gradcheck->add_flag("--inject-sign-flip", inject_sign_flip,
                        "self-test hook: corrupt one gradient entry");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval->add_option("--config", config_path, "experiment config file")->required();
    eval->add_option("--set", overrides, "key=value override (repeatable)");
    eval->add_option("--pairs", pairs_tsv, "TSV pairs file (default: dataset test split)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (train->parsed()) {
        if (show_schema) {
            std::cout << cllab::config_schema_text();
            return 0;
        }
        return cllab::cmd_train(config_path, overrides);
    }
    if (ablate->parsed()) return cllab::cmd_ablate(config_path, overrides, axis, values_csv, jobs);
    if (diagnose->parsed())
        return cllab::cmd_diagnose(checkpoint_path, config_path, overrides, pads_csv, k,
                                   draws, deterministic);
    if (gradcheck->parsed()) return cllab::cmd_gradcheck(step, threshold, seeds, inject_sign_flip);
    if (eval->parsed()) return cllab::cmd_eval(checkpoint_path, config_path, overrides, pairs_tsv);
    return 1;
}
