#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trajdiff/graph.hpp"
#include "trajdiff/model.hpp"
#include "trajdiff/tensor.hpp"

namespace trajdiff {

// One observed/future pair in the model's normalized frame: every window is
// translated so the last observed point sits at the origin, then multiplied
// by `scale`. `origin` carries the translation for mapping back to scene
// units; scale is shared across a dataset.
struct TrajectoryWindow {
    Tensor x;  // [t_init, 2], normalized
    Tensor y;  // [t_pred, 2], normalized
    std::array<double, 2> origin{0.0, 0.0};
    double scale = 1.0;
    int scene_id = 0;
    int agent_id = 0;
    int mode = -1;  // synthetic mode label, -1 for real data
};

Tensor normalize_path(const Tensor& raw, const std::array<double, 2>& origin, double scale);
Tensor denormalize_path(const Tensor& normed, const TrajectoryWindow& w);

// ---------------------------------------------------------------------------
// Synthetic multi-modal data

struct SyntheticSpec {
    int modes = 3;
    double noise = 0.05;       // per-coordinate Gaussian jitter, scene units
    int count = 2000;          // number of windows
    int t_init = 8;
    int t_pred = 12;
    double speed = 0.5;        // scene units per frame
    double turn_deg = 10.0;    // peak per-frame heading change across modes
};

// Agents share one straight history, then branch into `modes` constant-turn
// arcs spread evenly over [-turn_deg, +turn_deg]. Mode labels are kept.
std::vector<TrajectoryWindow> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                                 double scale);

// Noise-free mode centerlines as displacements from the last observed point,
// scene units; [t_pred, 2] each.
std::vector<Tensor> synthetic_mode_centerlines(const SyntheticSpec& spec);

// Half the minimum pairwise centerline ADE: the radius used to decide
// whether a sampled trajectory realizes a given mode.
double synthetic_mode_half_width(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Scene files ("ethucy-txt": whitespace-separated `frame_id agent_id x y`)

struct RawScene {
    struct Record {
        long frame = 0;
        long agent = 0;
        double x = 0.0;
        double y = 0.0;
    };
    std::vector<Record> records;  // file order
};

// Parses a scene file; blank lines and lines starting with '#' are skipped.
// A malformed line raises an error naming its line number.
RawScene load_scene(const std::filesystem::path& path);

// Contiguous per-agent runs in file order. A run breaks wherever the frame
// increment differs from the agent's base step (the smallest positive
// increment seen for that agent), so gaps and non-monotone frames split
// rather than fail.
std::vector<std::vector<RawScene::Record>> agent_segments(const RawScene& scene);

// Sliding windows over every agent segment of length >= t_init + t_pred.
std::vector<TrajectoryWindow> make_windows(const RawScene& scene, int t_init, int t_pred,
                                           int stride, double scale);

// Leave-one-out split over named scene files: train on all but `held_out`,
// test on it. The held-out name must be present.
std::pair<std::vector<std::string>, std::vector<std::string>> split_leave_one_out(
    const std::vector<std::string>& files, const std::string& held_out);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    ModelConfig model;
    int schedule_k = 100;
    double beta_min = 1e-4;
    double beta_max = 0.05;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    ParamStore params;
};

// Binary format, documented byte-exactly in docs/checkpoint_format.md.
// save -> load -> save is byte-identical and reloaded parameters reproduce
// forward passes bit-for-bit.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace trajdiff
