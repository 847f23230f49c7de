#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "trajdiff/data_io.hpp"
#include "trajdiff/graph.hpp"
#include "trajdiff/model.hpp"
#include "trajdiff/rng.hpp"
#include "trajdiff/schedule.hpp"

namespace trajdiff {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    long steps = 1000;
    double grad_clip = 0.0;  // global L2 norm cap; 0 disables
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    long checkpoint_every = 1000;
    int threads = 2;  // fixed chunk count for in-batch parallelism

    void validate() const;
};

// Standard Adam with bias correction; moments are keyed by parameter name
// and updated in name order.
class AdamState {
public:
    AdamState(double beta1, double beta2, double eps);

    void update(ParamStore& params, double lr);
    long step_count() const { return step_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };
    double beta1_, beta2_, eps_;
    long step_ = 0;
    std::map<std::string, Moments> moments_;
};

void adam_update(ParamStore& params, AdamState& state, double lr);

// Builds the predicted-noise node for one window; the production binding is
// Denoiser::encode_history + Denoiser::denoise, tests may substitute oracles.
using GraphDenoiseFn =
    std::function<int(Graph& g, const ParamStore& params, int yk_node, int k, const Tensor& x)>;

GraphDenoiseFn bind_denoiser(const Denoiser& model);

// One noise-matching regression step over a batch: per window draw
// k ~ U{1..K} and eps ~ N(0,I), corrupt the future, regress the predicted
// noise onto eps, then apply a single Adam update. Returns the batch loss
// (mean of per-window MSEs). Draws happen serially in window order before
// any parallel work, so results are independent of the thread layout; the
// gradient merge order is fixed by cfg.threads.
double train_step(const GraphDenoiseFn& fn, ParamStore& params, AdamState& adam,
                  const std::vector<TrajectoryWindow>& batch, const NoiseSchedule& s,
                  const TrainConfig& cfg, RngStream& k_rng, RngStream& eps_rng);

struct TrainCallbacks {
    std::function<void(long step, double loss, double wall_ms)> on_step;
    std::function<void(long step, const ParamStore& params)> on_checkpoint;
};

// Shuffled-batch training for cfg.steps steps (epochs derived as needed).
// Streams "shuffle", "k" and "eps" fan out from master_seed. Checkpoints
// fire every cfg.checkpoint_every steps and after the last step. Returns the
// number of steps executed.
long train_loop(const Denoiser& model, ParamStore& params,
                const std::vector<TrajectoryWindow>& dataset, const NoiseSchedule& s,
                const TrainConfig& cfg, std::uint64_t master_seed, const TrainCallbacks& cb = {});

}  // namespace trajdiff
