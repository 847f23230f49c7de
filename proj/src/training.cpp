#include "trajdiff/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "trajdiff/diffusion.hpp"
#include "trajdiff/parallel.hpp"

namespace trajdiff {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
    if (grad_clip < 0.0) throw std::invalid_argument("TrainConfig: grad_clip must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("TrainConfig: adam betas must lie in [0,1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("TrainConfig: adam_eps must be positive");
    if (checkpoint_every < 1) throw std::invalid_argument("TrainConfig: checkpoint_every must be >= 1");
    if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
}

AdamState::AdamState(double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamState::update(ParamStore& params, double lr) {
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (auto& [name, entry] : params) {
        auto it = moments_.find(name);
        if (it == moments_.end()) {
            Moments mo;
            mo.m = Tensor(entry.value.shape());
            mo.v = Tensor(entry.value.shape());
            it = moments_.emplace(name, std::move(mo)).first;
        }
        Moments& mo = it->second;
        if (!mo.m.same_shape(entry.value))
            throw std::invalid_argument("AdamState: moment shape mismatch for " + name);
        for (int i = 0; i < entry.value.size(); ++i) {
            double g = entry.grad[i];
            mo.m[i] = beta1_ * mo.m[i] + (1.0 - beta1_) * g;
            mo.v[i] = beta2_ * mo.v[i] + (1.0 - beta2_) * g * g;
            double mhat = mo.m[i] / bc1;
            double vhat = mo.v[i] / bc2;
            entry.value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void adam_update(ParamStore& params, AdamState& state, double lr) { state.update(params, lr); }

GraphDenoiseFn bind_denoiser(const Denoiser& model) {
    return [&model](Graph& g, const ParamStore& params, int yk_node, int k, const Tensor& x) {
        int f = model.encode_history(g, params, x);
        return model.denoise(g, params, yk_node, k, f);
    };
}

double train_step(const GraphDenoiseFn& fn, ParamStore& params, AdamState& adam,
                  const std::vector<TrajectoryWindow>& batch, const NoiseSchedule& s,
                  const TrainConfig& cfg, RngStream& k_rng, RngStream& eps_rng) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    int n = static_cast<int>(batch.size());
    for (int i = 1; i < n; ++i) {
        if (!batch[static_cast<std::size_t>(i)].x.same_shape(batch[0].x) ||
            !batch[static_cast<std::size_t>(i)].y.same_shape(batch[0].y))
            throw std::invalid_argument("train_step: windows disagree on t_init/t_pred");
    }

    // All random draws happen up front in window order; the parallel section
    // below is then free of shared mutable state.
    std::vector<int> ks(static_cast<std::size_t>(n));
    std::vector<Tensor> eps(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ks[static_cast<std::size_t>(i)] = k_rng.uniform_int(1, s.K);
        eps[static_cast<std::size_t>(i)] = eps_rng.normal_tensor(batch[0].y.shape());
    }

    int chunks = std::min(cfg.threads, n);
    std::vector<GradBuffer> buffers(static_cast<std::size_t>(chunks));
    std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
    std::vector<std::pair<int, int>> ranges;
    for (int c = 0; c < chunks; ++c)
        ranges.emplace_back(static_cast<int>(static_cast<long long>(n) * c / chunks),
                            static_cast<int>(static_cast<long long>(n) * (c + 1) / chunks));

    parallel_chunks(chunks, chunks, [&](int cb, int ce) {
        for (int c = cb; c < ce; ++c) {
            auto [begin, end] = ranges[static_cast<std::size_t>(c)];
            for (int i = begin; i < end; ++i) {
                const TrajectoryWindow& w = batch[static_cast<std::size_t>(i)];
                int k = ks[static_cast<std::size_t>(i)];
                Graph g(true);
                int yk = g.constant(forward_sample(s, w.y, k, eps[static_cast<std::size_t>(i)]));
                int eps_hat = fn(g, params, yk, k, w.x);
                int loss = g.mean_sq_error(eps_hat, g.constant(eps[static_cast<std::size_t>(i)]));
                losses[static_cast<std::size_t>(i)] = g.value(loss)[0];
                g.backward(loss);
                g.add_param_grads_to(buffers[static_cast<std::size_t>(c)], 1.0);
            }
        }
    });

    double batch_loss = 0.0;
    for (double l : losses) batch_loss += l;
    batch_loss /= n;
    if (!std::isfinite(batch_loss))
        throw std::runtime_error("train_step: non-finite loss " + std::to_string(batch_loss) +
                                 " (adam step " + std::to_string(adam.step_count() + 1) + ")");

    params.zero_grads();
    double inv_n = 1.0 / n;
    for (const GradBuffer& buf : buffers)
        for (const auto& [name, g] : buf) {
            Tensor& dst = params.at(name).grad;
            for (int i = 0; i < g.size(); ++i) dst[i] += inv_n * g[i];
        }

    if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& [name, e] : params)
            for (int i = 0; i < e.grad.size(); ++i) sq += e.grad[i] * e.grad[i];
        double norm = std::sqrt(sq);
        if (norm > cfg.grad_clip) {
            double f = cfg.grad_clip / norm;
            for (auto& [name, e] : params)
                for (int i = 0; i < e.grad.size(); ++i) e.grad[i] *= f;
        }
    }

    adam.update(params, cfg.learning_rate);
    return batch_loss;
}

long train_loop(const Denoiser& model, ParamStore& params,
                const std::vector<TrajectoryWindow>& dataset, const NoiseSchedule& s,
                const TrainConfig& cfg, std::uint64_t master_seed, const TrainCallbacks& cb) {
    cfg.validate();
    if (cfg.steps == 0) return 0;
    if (static_cast<int>(dataset.size()) < cfg.batch_size)
        throw std::invalid_argument("train_loop: dataset has " + std::to_string(dataset.size()) +
                                    " windows, need at least batch_size=" +
                                    std::to_string(cfg.batch_size));

    RngStream shuffle_rng(master_seed, "shuffle");
    RngStream k_rng(master_seed, "k");
    RngStream eps_rng(master_seed, "eps");
    GraphDenoiseFn fn = bind_denoiser(model);
    AdamState adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();  // forces a shuffle on first use

    std::vector<TrajectoryWindow> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    long step = 0;
    while (step < cfg.steps) {
        if (cursor + static_cast<std::size_t>(cfg.batch_size) > order.size()) {
            // Fisher-Yates; the tail remainder of the previous epoch is dropped.
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                std::size_t j = static_cast<std::size_t>(
                    shuffle_rng.uniform_int(0, static_cast<int>(i)));
                std::swap(order[i], order[j]);
            }
            cursor = 0;
        }
        batch.clear();
        for (int i = 0; i < cfg.batch_size; ++i)
            batch.push_back(dataset[static_cast<std::size_t>(order[cursor++])]);

        auto t0 = std::chrono::steady_clock::now();
        double loss = train_step(fn, params, adam, batch, s, cfg, k_rng, eps_rng);
        double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        ++step;
        if (cb.on_step) cb.on_step(step, loss, wall_ms);
        if (cb.on_checkpoint && (step % cfg.checkpoint_every == 0 || step == cfg.steps))
            cb.on_checkpoint(step, params);
    }
    return step;
}

}  // namespace trajdiff
