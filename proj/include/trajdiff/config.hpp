#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajdiff/data_io.hpp"
#include "trajdiff/model.hpp"
#include "trajdiff/training.hpp"

namespace trajdiff {

// Flat key-value run configuration (one JSON object, scalar values plus the
// scene_files list). Unknown keys are rejected so typos fail loudly. The
// full schema is documented in the README.
struct RunConfig {
    // schedule
    int k = 100;
    double beta_min = 1e-4;
    double beta_max = 0.05;

    ModelConfig model;
    TrainConfig train;

    // data
    std::string dataset = "synthetic";  // "synthetic" | "ethucy"
    SyntheticSpec synthetic;
    int synthetic_test_count = 256;
    std::vector<std::string> scene_files;
    std::string test_scene;
    int window_stride = 1;
    double coordinate_scale = 1.0;

    // evaluation
    int n_samples = 20;
    int sweep_stride = 10;
    int max_eval_windows = 0;  // 0 keeps every test window

    std::string out_dir = "out";
    std::uint64_t seed = 0;

    void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace trajdiff
