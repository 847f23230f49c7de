#include "trajdiff/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "trajdiff/evaluation.hpp"
#include "trajdiff/rng.hpp"

namespace trajdiff {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunConfig resolve_config(const CliOptions& opt) {
    if (opt.config_path.empty()) throw std::invalid_argument("--config is required");
    RunConfig cfg = load_config(opt.config_path);
    if (!opt.out_override.empty()) cfg.out_dir = opt.out_override;
    if (opt.has_seed_override) cfg.seed = opt.seed_override;
    if (opt.n_samples_override > 0) cfg.n_samples = opt.n_samples_override;
    return cfg;
}

std::vector<TrajectoryWindow> build_windows(const RunConfig& cfg, bool test_split) {
    if (cfg.dataset == "synthetic") {
        SyntheticSpec spec = cfg.synthetic;
        if (test_split) spec.count = cfg.synthetic_test_count;
        std::uint64_t seed =
            mix_seed(cfg.seed, hash_name(test_split ? "data-test" : "data-train"));
        return generate_synthetic(spec, seed, cfg.coordinate_scale);
    }
    auto [train_files, test_files] = split_leave_one_out(cfg.scene_files, cfg.test_scene);
    const auto& files = test_split ? test_files : train_files;
    if (files.empty())
        throw std::runtime_error("build_windows: the " +
                                 std::string(test_split ? "test" : "train") + " split is empty");
    std::vector<TrajectoryWindow> windows;
    for (std::size_t i = 0; i < files.size(); ++i) {
        RawScene scene = load_scene(files[i]);
        auto ws = make_windows(scene, cfg.model.t_init, cfg.model.t_pred, cfg.window_stride,
                               cfg.coordinate_scale);
        for (auto& w : ws) w.scene_id = static_cast<int>(i);
        windows.insert(windows.end(), std::make_move_iterator(ws.begin()),
                       std::make_move_iterator(ws.end()));
    }
    return windows;
}

std::vector<TrajectoryWindow> build_eval_windows(const RunConfig& cfg) {
    auto windows = build_windows(cfg, true);
    if (windows.empty()) throw std::runtime_error("no evaluation windows available");
    if (cfg.max_eval_windows > 0 &&
        static_cast<int>(windows.size()) > cfg.max_eval_windows)
        windows.resize(static_cast<std::size_t>(cfg.max_eval_windows));
    return windows;
}

Checkpoint make_checkpoint(const RunConfig& cfg, long step, const ParamStore& params) {
    Checkpoint ckpt;
    ckpt.model = cfg.model;
    ckpt.schedule_k = cfg.k;
    ckpt.beta_min = cfg.beta_min;
    ckpt.beta_max = cfg.beta_max;
    ckpt.seed = cfg.seed;
    ckpt.step = step;
    ckpt.params = params;
    return ckpt;
}

struct LoadedModel {
    Checkpoint ckpt;
    Denoiser model;
    NoiseSchedule schedule;
};

LoadedModel load_model(const CliOptions& opt, const RunConfig& cfg) {
    if (opt.checkpoint_path.empty()) throw std::invalid_argument("--checkpoint is required");
    Checkpoint ckpt = load_checkpoint(opt.checkpoint_path);
    if (ckpt.model.t_init != cfg.model.t_init || ckpt.model.t_pred != cfg.model.t_pred)
        throw std::runtime_error("checkpoint window geometry (" +
                                 std::to_string(ckpt.model.t_init) + "," +
                                 std::to_string(ckpt.model.t_pred) +
                                 ") does not match the config's t_init/t_pred");
    Denoiser model(ckpt.model);
    NoiseSchedule schedule = build_schedule(ckpt.schedule_k, ckpt.beta_min, ckpt.beta_max);
    return {std::move(ckpt), std::move(model), std::move(schedule)};
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file " + path.string());
    return out;
}

}  // namespace

void cmd_train(const CliOptions& opt) {
    RunConfig cfg = resolve_config(opt);
    fs::create_directories(cfg.out_dir);

    auto dataset = build_windows(cfg, false);
    NoiseSchedule schedule = build_schedule(cfg.k, cfg.beta_min, cfg.beta_max);
    Denoiser model(cfg.model);
    ParamStore params;
    RngStream init(cfg.seed, "init");
    model.init_params(params, init);

    std::ofstream log = open_out(fs::path(cfg.out_dir) / "train_log.csv");
    log << "step,loss,wall_ms\n";

    TrainCallbacks cb;
    cb.on_step = [&log](long step, double loss, double wall_ms) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", wall_ms);
        log << step << "," << fmt_double(loss) << "," << buf << "\n";
    };
    cb.on_checkpoint = [&cfg](long step, const ParamStore& p) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_%06ld.ckpt", step);
        save_checkpoint(make_checkpoint(cfg, step, p), fs::path(cfg.out_dir) / name);
    };

    long steps = train_loop(model, params, dataset, schedule, cfg.train, cfg.seed, cb);
    save_checkpoint(make_checkpoint(cfg, steps, params),
                    fs::path(cfg.out_dir) / "checkpoint_final.ckpt");
}

void cmd_sample(const CliOptions& opt) {
    RunConfig cfg = resolve_config(opt);
    fs::create_directories(cfg.out_dir);
    LoadedModel lm = load_model(opt, cfg);
    auto windows = build_eval_windows(cfg);

    RngStream chains(cfg.seed, "chains");
    std::ofstream out = open_out(fs::path(cfg.out_dir) / "samples.csv");
    out << "window,sample,t,x,y\n";
    for (std::size_t w = 0; w < windows.size(); ++w) {
        SampleSet set = sample_window(lm.model, lm.ckpt.params, windows[w], lm.schedule,
                                      cfg.n_samples, chains.fork(w), false);
        for (std::size_t i = 0; i < set.samples.size(); ++i) {
            const Tensor& path = set.samples[i];
            for (int t = 0; t < path.rows(); ++t)
                out << w << "," << i << "," << (t + 1) << "," << fmt_double(path.at(t, 0)) << ","
                    << fmt_double(path.at(t, 1)) << "\n";
        }
    }
}

void cmd_eval(const CliOptions& opt) {
    RunConfig cfg = resolve_config(opt);
    fs::create_directories(cfg.out_dir);
    LoadedModel lm = load_model(opt, cfg);
    auto windows = build_eval_windows(cfg);

    RngStream chains(cfg.seed, "chains");
    MetricReport report = evaluate_dataset(lm.model, lm.ckpt.params, windows, lm.schedule,
                                           cfg.n_samples, chains, cfg.train.threads);

    std::ofstream csv = open_out(fs::path(cfg.out_dir) / "metrics.csv");
    csv << "metric,value\n";
    csv << "ade," << fmt_double(report.ade) << "\n";
    csv << "fde," << fmt_double(report.fde) << "\n";
    for (const auto& [k, best] : report.min_k) {
        csv << "min" << k << "_ade," << fmt_double(best.ade) << "\n";
        csv << "min" << k << "_fde," << fmt_double(best.fde) << "\n";
    }
    csv << "diversity," << fmt_double(report.diversity) << "\n";
    csv << "n_windows," << report.n_windows << "\n";

    std::ofstream js = open_out(fs::path(cfg.out_dir) / "metrics.json");
    js << "{\n";
    js << "  \"ade\": " << fmt_double(report.ade) << ",\n";
    js << "  \"fde\": " << fmt_double(report.fde) << ",\n";
    for (const auto& [k, best] : report.min_k) {
        js << "  \"min" << k << "_ade\": " << fmt_double(best.ade) << ",\n";
        js << "  \"min" << k << "_fde\": " << fmt_double(best.fde) << ",\n";
    }
    js << "  \"diversity\": " << fmt_double(report.diversity) << ",\n";
    js << "  \"n_windows\": " << report.n_windows << "\n";
    js << "}\n";
}

void cmd_sweep(const CliOptions& opt) {
    RunConfig cfg = resolve_config(opt);
    fs::create_directories(cfg.out_dir);
    LoadedModel lm = load_model(opt, cfg);
    auto windows = build_eval_windows(cfg);

    RngStream chains(cfg.seed, "chains");
    auto rows = tradeoff_sweep(lm.model, lm.ckpt.params, windows, lm.schedule, cfg.n_samples,
                               chains, cfg.train.threads);

    std::ofstream curve = open_out(fs::path(cfg.out_dir) / "sweep_curve.csv");
    curve << "step,ade,fde,min3,min5,diversity\n";
    for (const SweepRow& r : rows)
        curve << r.step << "," << fmt_double(r.ade) << "," << fmt_double(r.fde) << ","
              << fmt_double(r.min3) << "," << fmt_double(r.min5) << ","
              << fmt_double(r.diversity) << "\n";

    // per-step sample cloud of the first test window, same chain streams as
    // the sweep's window 0
    SampleSet traced = sample_window(lm.model, lm.ckpt.params, windows[0], lm.schedule,
                                     cfg.n_samples, chains.fork(0), true);
    auto cloud = export_step_clouds(traced, cfg.sweep_stride);
    std::ofstream cl = open_out(fs::path(cfg.out_dir) / "step_clouds.csv");
    cl << "step,sample,t,x,y\n";
    for (const CloudRow& r : cloud)
        cl << r.step << "," << r.sample << "," << r.t << "," << fmt_double(r.x) << ","
           << fmt_double(r.y) << "\n";
}

}  // namespace trajdiff
