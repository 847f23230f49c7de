#pragma once

#include <cstdint>
#include <string>

#include "trajdiff/config.hpp"

namespace trajdiff {

// Shared options resolved from the command line. Every command is a pure
// function of (config, checkpoint, seed): rerunning overwrites the same
// output files with identical bytes.
struct CliOptions {
    std::string config_path;
    std::string checkpoint_path;  // sample/eval/sweep
    std::string out_override;
    bool has_seed_override = false;
    std::uint64_t seed_override = 0;
    int n_samples_override = 0;  // 0 keeps the config value
};

// train: checkpoints + train_log.csv
void cmd_train(const CliOptions& opt);
// sample: samples.csv (window, sample, t, x, y) over the test windows
void cmd_sample(const CliOptions& opt);
// eval: metrics.json + metrics.csv (best-of-N, min_3/min_5, diversity)
void cmd_eval(const CliOptions& opt);
// sweep: sweep_curve.csv per reverse step + step_clouds.csv for window 0
void cmd_sweep(const CliOptions& opt);

}  // namespace trajdiff
