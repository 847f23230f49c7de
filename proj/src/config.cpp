#include "trajdiff/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace trajdiff {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys = {
    "k", "beta_min", "beta_max",
    "d_model", "heads", "layers", "ff_dim", "enc_dim", "enc_hidden", "t_init", "t_pred",
    "learning_rate", "batch_size", "steps", "grad_clip",
    "adam_beta1", "adam_beta2", "adam_eps", "checkpoint_every", "threads",
    "dataset", "synthetic_modes", "synthetic_noise", "synthetic_count", "synthetic_test_count",
    "synthetic_speed", "synthetic_turn_deg",
    "scene_files", "test_scene", "window_stride", "coordinate_scale",
    "n_samples", "sweep_stride", "max_eval_windows",
    "out_dir", "seed",
};

template <typename T>
void read(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(std::string("config: key '") + key + "' has the wrong type");
    }
}

}  // namespace

void RunConfig::validate() const {
    if (k < 1) throw std::invalid_argument("config: k must be >= 1");
    if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
        throw std::invalid_argument("config: need 0 < beta_min <= beta_max < 1");
    model.validate();
    train.validate();
    if (dataset != "synthetic" && dataset != "ethucy")
        throw std::invalid_argument("config: dataset must be 'synthetic' or 'ethucy'");
    if (dataset == "synthetic") {
        if (synthetic.modes < 1) throw std::invalid_argument("config: synthetic_modes must be >= 1");
        if (synthetic.count < 1) throw std::invalid_argument("config: synthetic_count must be >= 1");
        if (synthetic_test_count < 1)
            throw std::invalid_argument("config: synthetic_test_count must be >= 1");
        if (synthetic.noise < 0.0)
            throw std::invalid_argument("config: synthetic_noise must be >= 0");
    } else {
        if (scene_files.empty()) throw std::invalid_argument("config: scene_files is empty");
        if (test_scene.empty()) throw std::invalid_argument("config: test_scene is required");
    }
    if (window_stride < 1) throw std::invalid_argument("config: window_stride must be >= 1");
    if (!(coordinate_scale > 0.0))
        throw std::invalid_argument("config: coordinate_scale must be positive");
    if (n_samples < 1) throw std::invalid_argument("config: n_samples must be >= 1");
    if (sweep_stride < 1) throw std::invalid_argument("config: sweep_stride must be >= 1");
    if (max_eval_windows < 0) throw std::invalid_argument("config: max_eval_windows must be >= 0");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir is empty");
}

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be one JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kKnownKeys.count(key))
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }

    RunConfig c;
    read(j, "k", c.k);
    read(j, "beta_min", c.beta_min);
    read(j, "beta_max", c.beta_max);
    read(j, "d_model", c.model.d_model);
    read(j, "heads", c.model.heads);
    read(j, "layers", c.model.layers);
    read(j, "ff_dim", c.model.ff_dim);
    read(j, "enc_dim", c.model.enc_dim);
    read(j, "enc_hidden", c.model.enc_hidden);
    read(j, "t_init", c.model.t_init);
    read(j, "t_pred", c.model.t_pred);
    read(j, "learning_rate", c.train.learning_rate);
    read(j, "batch_size", c.train.batch_size);
    read(j, "steps", c.train.steps);
    read(j, "grad_clip", c.train.grad_clip);
    read(j, "adam_beta1", c.train.adam_beta1);
    read(j, "adam_beta2", c.train.adam_beta2);
    read(j, "adam_eps", c.train.adam_eps);
    read(j, "checkpoint_every", c.train.checkpoint_every);
    read(j, "threads", c.train.threads);
    read(j, "dataset", c.dataset);
    read(j, "synthetic_modes", c.synthetic.modes);
    read(j, "synthetic_noise", c.synthetic.noise);
    read(j, "synthetic_count", c.synthetic.count);
    read(j, "synthetic_test_count", c.synthetic_test_count);
    read(j, "synthetic_speed", c.synthetic.speed);
    read(j, "synthetic_turn_deg", c.synthetic.turn_deg);
    read(j, "scene_files", c.scene_files);
    read(j, "test_scene", c.test_scene);
    read(j, "window_stride", c.window_stride);
    read(j, "coordinate_scale", c.coordinate_scale);
    read(j, "n_samples", c.n_samples);
    read(j, "sweep_stride", c.sweep_stride);
    read(j, "max_eval_windows", c.max_eval_windows);
    read(j, "out_dir", c.out_dir);
    read(j, "seed", c.seed);

    // the window geometry is shared between the model and the dataset
    c.synthetic.t_init = c.model.t_init;
    c.synthetic.t_pred = c.model.t_pred;

    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

}  // namespace trajdiff
