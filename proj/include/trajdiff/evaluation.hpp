#pragma once

#include <functional>
#include <map>
#include <vector>

#include "trajdiff/data_io.hpp"
#include "trajdiff/diffusion.hpp"
#include "trajdiff/model.hpp"
#include "trajdiff/rng.hpp"
#include "trajdiff/schedule.hpp"

namespace trajdiff {

// N stochastic futures for one window. When a trace is kept, snapshot 0 is
// the initial Gaussian draw and snapshot K the final prediction, so index i
// holds the state after i completed reverse steps.
struct SampleSet {
    int window_id = 0;
    std::vector<Tensor> samples;              // N x [t_pred, 2]
    std::vector<std::vector<Tensor>> trace;   // (K+1) x N x [t_pred, 2]; empty unless traced
};

// Value-level noise predictor: (y_k, k) -> eps_hat. Lets tests drive the
// sampler with analytic oracles instead of a trained network.
using DenoiseFn = std::function<Tensor(const Tensor& yk, int k)>;

// Runs N independent reverse chains. Chain i draws everything from
// chain_base.fork(i), so results do not depend on evaluation order.
SampleSet sample_chains(const DenoiseFn& fn, const NoiseSchedule& s, int t_pred, int n_samples,
                        const RngStream& chain_base, bool keep_trace);

// Chains conditioned on one window's history; outputs are mapped back to
// scene units (trace included).
SampleSet sample_window(const Denoiser& model, const ParamStore& params,
                        const TrajectoryWindow& window, const NoiseSchedule& s, int n_samples,
                        const RngStream& chain_base, bool keep_trace);

// Displacement metrics over [T, 2] paths, scene units.
double ade(const Tensor& pred, const Tensor& gt);
double fde(const Tensor& pred, const Tensor& gt);

struct BestOfResult {
    double ade = 0.0;
    double fde = 0.0;
};

// Minimum ADE over all samples and, independently, minimum FDE.
BestOfResult best_of_n(const SampleSet& set, const Tensor& gt);
// Same, restricted to the first k samples (nested prefixes, so the value is
// non-increasing in k).
BestOfResult best_of_k(const SampleSet& set, const Tensor& gt, int k);

// Average over unordered sample pairs of the per-timestep mean pointwise
// distance between two trajectories.
double diversity(const std::vector<Tensor>& samples);
double diversity(const SampleSet& set);

struct MetricReport {
    double ade = 0.0;  // best-of-N ADE, averaged over windows
    double fde = 0.0;
    std::map<int, BestOfResult> min_k;  // k in {3, 5, N}
    double diversity = 0.0;
    int n_windows = 0;
};

MetricReport evaluate_dataset(const Denoiser& model, const ParamStore& params,
                              const std::vector<TrajectoryWindow>& windows,
                              const NoiseSchedule& s, int n_samples, const RngStream& chains_base,
                              int threads);

struct SweepRow {
    int step = 0;  // completed reverse steps
    double ade = 0.0;
    double fde = 0.0;
    double min3 = 0.0;
    double min5 = 0.0;
    double diversity = 0.0;
};

// Evaluates the intermediate states of traced sampling runs: one row per
// completed reverse step (K+1 rows), metrics averaged over windows.
std::vector<SweepRow> tradeoff_sweep(const Denoiser& model, const ParamStore& params,
                                     const std::vector<TrajectoryWindow>& windows,
                                     const NoiseSchedule& s, int n_samples,
                                     const RngStream& chains_base, int threads);

struct CloudRow {
    int step = 0;
    int sample = 0;
    int t = 0;  // 1-based frame index within the predicted window
    double x = 0.0;
    double y = 0.0;
};

// Flattens a traced SampleSet to rows every `stride` steps (step K always
// included) for external density plotting.
std::vector<CloudRow> export_step_clouds(const SampleSet& traced, int stride);

}  // namespace trajdiff
