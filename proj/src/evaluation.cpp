#include "trajdiff/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trajdiff/parallel.hpp"

namespace trajdiff {

SampleSet sample_chains(const DenoiseFn& fn, const NoiseSchedule& s, int t_pred, int n_samples,
                        const RngStream& chain_base, bool keep_trace) {
    if (n_samples < 1) throw std::invalid_argument("sample_chains: need at least one sample");
    SampleSet set;
    set.samples.resize(static_cast<std::size_t>(n_samples));
    if (keep_trace)
        set.trace.assign(static_cast<std::size_t>(s.K) + 1,
                         std::vector<Tensor>(static_cast<std::size_t>(n_samples)));

    Tensor zero({t_pred, 2});
    for (int i = 0; i < n_samples; ++i) {
        RngStream rng = chain_base.fork(static_cast<std::uint64_t>(i));
        Tensor y = rng.normal_tensor({t_pred, 2});
        if (keep_trace) set.trace[0][static_cast<std::size_t>(i)] = y;
        for (int k = s.K; k >= 1; --k) {
            Tensor eps_hat = fn(y, k);
            Tensor z = k > 1 ? rng.normal_tensor({t_pred, 2}) : zero;
            y = reverse_step(s, y, k, eps_hat, z);
            if (keep_trace) set.trace[static_cast<std::size_t>(s.K - k + 1)][static_cast<std::size_t>(i)] = y;
        }
        set.samples[static_cast<std::size_t>(i)] = std::move(y);
    }
    return set;
}

SampleSet sample_window(const Denoiser& model, const ParamStore& params,
                        const TrajectoryWindow& window, const NoiseSchedule& s, int n_samples,
                        const RngStream& chain_base, bool keep_trace) {
    Tensor f = model.encode_value(params, window.x);
    DenoiseFn fn = [&model, &params, &f](const Tensor& yk, int k) {
        return model.denoise_value(params, yk, k, f);
    };
    SampleSet set = sample_chains(fn, s, model.config().t_pred, n_samples, chain_base, keep_trace);
    for (Tensor& t : set.samples) t = denormalize_path(t, window);
    for (auto& snapshot : set.trace)
        for (Tensor& t : snapshot) t = denormalize_path(t, window);
    return set;
}

double ade(const Tensor& pred, const Tensor& gt) {
    check_same_shape(pred, gt, "ade");
    if (pred.ndim() != 2 || pred.cols() != 2 || pred.rows() < 1)
        throw std::invalid_argument("ade: expected nonempty [T,2] paths");
    double acc = 0.0;
    for (int t = 0; t < pred.rows(); ++t)
        acc += std::hypot(pred.at(t, 0) - gt.at(t, 0), pred.at(t, 1) - gt.at(t, 1));
    return acc / pred.rows();
}

double fde(const Tensor& pred, const Tensor& gt) {
    check_same_shape(pred, gt, "fde");
    if (pred.ndim() != 2 || pred.cols() != 2 || pred.rows() < 1)
        throw std::invalid_argument("fde: expected nonempty [T,2] paths");
    int t = pred.rows() - 1;
    return std::hypot(pred.at(t, 0) - gt.at(t, 0), pred.at(t, 1) - gt.at(t, 1));
}

BestOfResult best_of_k(const SampleSet& set, const Tensor& gt, int k) {
    if (set.samples.empty()) throw std::invalid_argument("best_of_k: empty sample set");
    int n = std::min<int>(k, static_cast<int>(set.samples.size()));
    if (n < 1) throw std::invalid_argument("best_of_k: k must be >= 1");
    BestOfResult r;
    r.ade = 1e300;
    r.fde = 1e300;
    for (int i = 0; i < n; ++i) {
        r.ade = std::min(r.ade, ade(set.samples[static_cast<std::size_t>(i)], gt));
        r.fde = std::min(r.fde, fde(set.samples[static_cast<std::size_t>(i)], gt));
    }
    return r;
}

BestOfResult best_of_n(const SampleSet& set, const Tensor& gt) {
    return best_of_k(set, gt, static_cast<int>(set.samples.size()));
}

double diversity(const std::vector<Tensor>& samples) {
    if (samples.empty()) throw std::invalid_argument("diversity: no samples");
    std::size_t n = samples.size();
    if (n == 1) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) acc += ade(samples[i], samples[j]);
    return acc / (static_cast<double>(n) * (n - 1) / 2.0);
}

double diversity(const SampleSet& set) { return diversity(set.samples); }

MetricReport evaluate_dataset(const Denoiser& model, const ParamStore& params,
                              const std::vector<TrajectoryWindow>& windows,
                              const NoiseSchedule& s, int n_samples, const RngStream& chains_base,
                              int threads) {
    if (windows.empty()) throw std::invalid_argument("evaluate_dataset: no windows");
    if (n_samples < 1) throw std::invalid_argument("evaluate_dataset: n_samples must be >= 1");

    struct PerWindow {
        BestOfResult b3, b5, bn;
        double div = 0.0;
    };
    std::vector<PerWindow> rows(windows.size());
    parallel_chunks(static_cast<int>(windows.size()), threads, [&](int begin, int end) {
        for (int w = begin; w < end; ++w) {
            const TrajectoryWindow& win = windows[static_cast<std::size_t>(w)];
            SampleSet set = sample_window(model, params, win, s, n_samples,
                                          chains_base.fork(static_cast<std::uint64_t>(w)), false);
            Tensor gt = denormalize_path(win.y, win);
            PerWindow& r = rows[static_cast<std::size_t>(w)];
            r.b3 = best_of_k(set, gt, 3);
            r.b5 = best_of_k(set, gt, 5);
            r.bn = best_of_n(set, gt);
            r.div = diversity(set);
        }
    });

    MetricReport report;
    report.n_windows = static_cast<int>(windows.size());
    BestOfResult m3, m5, mn;
    for (const PerWindow& r : rows) {
        m3.ade += r.b3.ade;
        m3.fde += r.b3.fde;
        m5.ade += r.b5.ade;
        m5.fde += r.b5.fde;
        mn.ade += r.bn.ade;
        mn.fde += r.bn.fde;
        report.diversity += r.div;
    }
    double inv = 1.0 / report.n_windows;
    m3.ade *= inv; m3.fde *= inv;
    m5.ade *= inv; m5.fde *= inv;
    mn.ade *= inv; mn.fde *= inv;
    report.diversity *= inv;
    report.min_k[3] = m3;
    report.min_k[5] = m5;
    report.min_k[n_samples] = mn;
    report.ade = mn.ade;
    report.fde = mn.fde;
    return report;
}

std::vector<SweepRow> tradeoff_sweep(const Denoiser& model, const ParamStore& params,
                                     const std::vector<TrajectoryWindow>& windows,
                                     const NoiseSchedule& s, int n_samples,
                                     const RngStream& chains_base, int threads) {
    if (windows.empty()) throw std::invalid_argument("tradeoff_sweep: no windows");
    std::size_t n_steps = static_cast<std::size_t>(s.K) + 1;
    std::vector<std::vector<SweepRow>> per_window(windows.size());

    parallel_chunks(static_cast<int>(windows.size()), threads, [&](int begin, int end) {
        for (int w = begin; w < end; ++w) {
            const TrajectoryWindow& win = windows[static_cast<std::size_t>(w)];
            SampleSet set = sample_window(model, params, win, s, n_samples,
                                          chains_base.fork(static_cast<std::uint64_t>(w)), true);
            Tensor gt = denormalize_path(win.y, win);
            auto& rows = per_window[static_cast<std::size_t>(w)];
            rows.resize(n_steps);
            for (std::size_t step = 0; step < n_steps; ++step) {
                SampleSet state;
                state.samples = set.trace[step];
                SweepRow& r = rows[step];
                r.step = static_cast<int>(step);
                BestOfResult bn = best_of_n(state, gt);
                r.ade = bn.ade;
                r.fde = bn.fde;
                r.min3 = best_of_k(state, gt, 3).ade;
                r.min5 = best_of_k(state, gt, 5).ade;
                r.diversity = diversity(state);
            }
        }
    });

    std::vector<SweepRow> out(n_steps);
    for (std::size_t step = 0; step < n_steps; ++step) out[step].step = static_cast<int>(step);
    for (const auto& rows : per_window)
        for (std::size_t step = 0; step < n_steps; ++step) {
            out[step].ade += rows[step].ade;
            out[step].fde += rows[step].fde;
            out[step].min3 += rows[step].min3;
            out[step].min5 += rows[step].min5;
            out[step].diversity += rows[step].diversity;
        }
    double inv = 1.0 / static_cast<double>(windows.size());
    for (SweepRow& r : out) {
        r.ade *= inv;
        r.fde *= inv;
        r.min3 *= inv;
        r.min5 *= inv;
        r.diversity *= inv;
    }
    return out;
}

namespace {

void append_cloud_step(std::vector<CloudRow>& rows, const SampleSet& traced, int step) {
    const auto& snapshot = traced.trace[static_cast<std::size_t>(step)];
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        const Tensor& path = snapshot[i];
        for (int t = 0; t < path.rows(); ++t)
            rows.push_back({step, static_cast<int>(i), t + 1, path.at(t, 0), path.at(t, 1)});
    }
}

}  // namespace

std::vector<CloudRow> export_step_clouds(const SampleSet& traced, int stride) {
    if (traced.trace.empty())
        throw std::invalid_argument("export_step_clouds: sample set has no trace");
    if (stride < 1) throw std::invalid_argument("export_step_clouds: stride must be >= 1");
    int last = static_cast<int>(traced.trace.size()) - 1;
    std::vector<CloudRow> rows;
    for (int step = 0; step <= last; step += stride) append_cloud_step(rows, traced, step);
    if (last % stride != 0) append_cloud_step(rows, traced, last);
    return rows;
}

}  // namespace trajdiff
