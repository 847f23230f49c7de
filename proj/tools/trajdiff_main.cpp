#include <cstdint>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "trajdiff/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"trajectory diffusion toolkit: train, sample, evaluate and sweep"};
    app.require_subcommand(1);

    trajdiff::CliOptions opt;
    std::uint64_t seed_value = 0;

    auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
        sub->add_option("--config", opt.config_path, "run configuration (flat JSON)")
            ->required();
        sub->add_option("--out", opt.out_override, "output directory (overrides config)");
        auto* seed_opt = sub->add_option("--seed", seed_value, "master seed (overrides config)");
        sub->callback([&opt, seed_opt, &seed_value]() {
            if (seed_opt->count() > 0) {
                opt.has_seed_override = true;
                opt.seed_override = seed_value;
            }
        });
        if (needs_checkpoint)
            sub->add_option("--checkpoint", opt.checkpoint_path, "checkpoint file")->required();
    };

    CLI::App* train = app.add_subcommand("train", "train a denoiser and write checkpoints");
    add_common(train, false);

    CLI::App* sample = app.add_subcommand("sample", "generate stochastic predictions");
    add_common(sample, true);
    sample->add_option("--n-samples", opt.n_samples_override, "samples per window");

    CLI::App* eval = app.add_subcommand("eval", "best-of-N metrics on the test split");
    add_common(eval, true);
    eval->add_option("--n-samples", opt.n_samples_override, "samples per window");

    CLI::App* sweep = app.add_subcommand("sweep", "per-step determinacy/diversity curves");
    add_common(sweep, true);
    sweep->add_option("--n-samples", opt.n_samples_override, "samples per window");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) trajdiff::cmd_train(opt);
        if (sample->parsed()) trajdiff::cmd_sample(opt);
        if (eval->parsed()) trajdiff::cmd_eval(opt);
        if (sweep->parsed()) trajdiff::cmd_sweep(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
