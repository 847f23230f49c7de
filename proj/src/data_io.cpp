#include "trajdiff/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "trajdiff/evaluation.hpp"
#include "trajdiff/rng.hpp"

namespace trajdiff {

Tensor normalize_path(const Tensor& raw, const std::array<double, 2>& origin, double scale) {
    Tensor out = raw;
    for (int r = 0; r < out.rows(); ++r) {
        out.at(r, 0) = (out.at(r, 0) - origin[0]) * scale;
        out.at(r, 1) = (out.at(r, 1) - origin[1]) * scale;
    }
    return out;
}

Tensor denormalize_path(const Tensor& normed, const TrajectoryWindow& w) {
    Tensor out = normed;
    for (int r = 0; r < out.rows(); ++r) {
        out.at(r, 0) = out.at(r, 0) / w.scale + w.origin[0];
        out.at(r, 1) = out.at(r, 1) / w.scale + w.origin[1];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

double mode_turn_deg(const SyntheticSpec& spec, int mode) {
    if (spec.modes == 1) return 0.0;
    double c = -1.0 + 2.0 * mode / (spec.modes - 1);  // evenly spaced in [-1, 1]
    return c * spec.turn_deg;
}

}  // namespace

std::vector<Tensor> synthetic_mode_centerlines(const SyntheticSpec& spec) {
    std::vector<Tensor> lines;
    for (int m = 0; m < spec.modes; ++m) {
        double turn = mode_turn_deg(spec, m) * std::numbers::pi / 180.0;
        Tensor line({spec.t_pred, 2});
        double px = 0.0, py = 0.0;
        for (int t = 1; t <= spec.t_pred; ++t) {
            double heading = turn * t;
            px += spec.speed * std::cos(heading);
            py += spec.speed * std::sin(heading);
            line.at(t - 1, 0) = px;
            line.at(t - 1, 1) = py;
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

double synthetic_mode_half_width(const SyntheticSpec& spec) {
    auto lines = synthetic_mode_centerlines(spec);
    if (lines.size() < 2) return 0.0;
    double min_sep = 1e300;
    for (std::size_t i = 0; i < lines.size(); ++i)
        for (std::size_t j = i + 1; j < lines.size(); ++j)
            min_sep = std::min(min_sep, ade(lines[i], lines[j]));
    return min_sep / 2.0;
}

std::vector<TrajectoryWindow> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                                 double scale) {
    if (spec.modes < 1 || spec.count < 0 || spec.t_init < 1 || spec.t_pred < 1)
        throw std::invalid_argument("generate_synthetic: bad spec");
    if (!(scale > 0.0)) throw std::invalid_argument("generate_synthetic: scale must be positive");

    auto centerlines = synthetic_mode_centerlines(spec);
    RngStream rng(seed, "synthetic");
    std::vector<TrajectoryWindow> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        double ox = (rng.uniform() - 0.5) * 100.0;
        double oy = (rng.uniform() - 0.5) * 100.0;
        int mode = spec.modes == 1 ? 0 : rng.uniform_int(0, spec.modes - 1);

        Tensor hist({spec.t_init, 2});
        for (int t = 0; t < spec.t_init; ++t) {
            hist.at(t, 0) = ox + spec.speed * (t - spec.t_init + 1) + spec.noise * rng.normal();
            hist.at(t, 1) = oy + spec.noise * rng.normal();
        }
        Tensor fut({spec.t_pred, 2});
        const Tensor& line = centerlines[static_cast<std::size_t>(mode)];
        for (int t = 0; t < spec.t_pred; ++t) {
            fut.at(t, 0) = ox + line.at(t, 0) + spec.noise * rng.normal();
            fut.at(t, 1) = oy + line.at(t, 1) + spec.noise * rng.normal();
        }

        TrajectoryWindow w;
        w.origin = {hist.at(spec.t_init - 1, 0), hist.at(spec.t_init - 1, 1)};
        w.scale = scale;
        w.x = normalize_path(hist, w.origin, scale);
        w.y = normalize_path(fut, w.origin, scale);
        w.scene_id = 0;
        w.agent_id = i;
        w.mode = mode;
        out.push_back(std::move(w));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scene files

RawScene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_scene: cannot open " + path.string());
    RawScene scene;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        RawScene::Record rec;
        if (!(ls >> rec.frame >> rec.agent >> rec.x >> rec.y)) {
            throw std::runtime_error("load_scene: malformed line " + std::to_string(line_no) +
                                     " in " + path.string());
        }
        std::string extra;
        if (ls >> extra)
            throw std::runtime_error("load_scene: trailing tokens on line " +
                                     std::to_string(line_no) + " in " + path.string());
        scene.records.push_back(rec);
    }
    return scene;
}

std::vector<std::vector<RawScene::Record>> agent_segments(const RawScene& scene) {
    // base step per agent: smallest positive frame increment in file order
    std::map<long, long> base_step;
    std::map<long, long> last_frame;
    for (const auto& r : scene.records) {
        auto it = last_frame.find(r.agent);
        if (it != last_frame.end()) {
            long d = r.frame - it->second;
            if (d > 0) {
                auto bs = base_step.find(r.agent);
                if (bs == base_step.end() || d < bs->second) base_step[r.agent] = d;
            }
        }
        last_frame[r.agent] = r.frame;
    }

    std::vector<std::vector<RawScene::Record>> segments;
    std::map<long, std::size_t> open;  // agent -> index of its open segment
    last_frame.clear();
    for (const auto& r : scene.records) {
        long step = base_step.count(r.agent) ? base_step[r.agent] : 1;
        auto it = open.find(r.agent);
        bool continues = it != open.end() && r.frame - last_frame[r.agent] == step;
        if (!continues) {
            segments.emplace_back();
            open[r.agent] = segments.size() - 1;
        }
        segments[open[r.agent]].push_back(r);
        last_frame[r.agent] = r.frame;
    }
    return segments;
}

std::vector<TrajectoryWindow> make_windows(const RawScene& scene, int t_init, int t_pred,
                                           int stride, double scale) {
    if (t_init < 1 || t_pred < 1 || stride < 1)
        throw std::invalid_argument("make_windows: t_init, t_pred, stride must be positive");
    if (!(scale > 0.0)) throw std::invalid_argument("make_windows: scale must be positive");

    int span = t_init + t_pred;
    std::vector<TrajectoryWindow> out;
    auto segments = agent_segments(scene);
    for (const auto& seg : segments) {
        int n = static_cast<int>(seg.size());
        for (int start = 0; start + span <= n; start += stride) {
            Tensor hist({t_init, 2});
            for (int t = 0; t < t_init; ++t) {
                hist.at(t, 0) = seg[static_cast<std::size_t>(start + t)].x;
                hist.at(t, 1) = seg[static_cast<std::size_t>(start + t)].y;
            }
            Tensor fut({t_pred, 2});
            for (int t = 0; t < t_pred; ++t) {
                fut.at(t, 0) = seg[static_cast<std::size_t>(start + t_init + t)].x;
                fut.at(t, 1) = seg[static_cast<std::size_t>(start + t_init + t)].y;
            }
            TrajectoryWindow w;
            w.origin = {hist.at(t_init - 1, 0), hist.at(t_init - 1, 1)};
            w.scale = scale;
            w.x = normalize_path(hist, w.origin, scale);
            w.y = normalize_path(fut, w.origin, scale);
            w.agent_id = static_cast<int>(seg.front().agent);
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_leave_one_out(
    const std::vector<std::string>& files, const std::string& held_out) {
    std::vector<std::string> train, test;
    for (const auto& f : files) {
        if (f == held_out)
            test.push_back(f);
        else
            train.push_back(f);
    }
    if (test.empty())
        throw std::invalid_argument("split_leave_one_out: held-out scene '" + held_out +
                                    "' not among the named files");
    return {train, test};
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
    Reader(const std::string& buf, const std::string& what) : buf_(buf), what_(what) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw std::runtime_error("load_checkpoint: truncated file " + what_);
    }
    const std::string& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'T', 'J', 'D', 'K'};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, ckpt.version);
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.d_model));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.heads));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.layers));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.ff_dim));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.enc_dim));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.enc_hidden));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.t_init));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.t_pred));
    put_u32(out, static_cast<std::uint32_t>(ckpt.schedule_k));
    put_f64(out, ckpt.beta_min);
    put_f64(out, ckpt.beta_max);
    put_u64(out, ckpt.seed);
    put_u64(out, static_cast<std::uint64_t>(ckpt.step));

    put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, entry] : ckpt.params) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put_u32(out, static_cast<std::uint32_t>(entry.value.ndim()));
        for (int d : entry.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (int i = 0; i < entry.value.size(); ++i) put_f64(out, entry.value[i]);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(buf, path.string());

    if (r.bytes(4) != std::string(kMagic, 4))
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != kCheckpointVersion)
        throw std::runtime_error("load_checkpoint: version " + std::to_string(ckpt.version) +
                                 " unsupported (expected " + std::to_string(kCheckpointVersion) +
                                 ") in " + path.string());
    ckpt.model.d_model = static_cast<int>(r.u32());
    ckpt.model.heads = static_cast<int>(r.u32());
    ckpt.model.layers = static_cast<int>(r.u32());
    ckpt.model.ff_dim = static_cast<int>(r.u32());
    ckpt.model.enc_dim = static_cast<int>(r.u32());
    ckpt.model.enc_hidden = static_cast<int>(r.u32());
    ckpt.model.t_init = static_cast<int>(r.u32());
    ckpt.model.t_pred = static_cast<int>(r.u32());
    ckpt.schedule_k = static_cast<int>(r.u32());
    ckpt.beta_min = r.f64();
    ckpt.beta_max = r.f64();
    ckpt.seed = r.u64();
    ckpt.step = static_cast<std::int64_t>(r.u64());

    std::uint32_t n_params = r.u32();
    for (std::uint32_t p = 0; p < n_params; ++p) {
        std::uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        std::uint32_t ndim = r.u32();
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.u32()));
        Tensor& value = ckpt.params.create(name, shape);
        for (int i = 0; i < value.size(); ++i) value[i] = r.f64();
    }
    if (!r.done()) throw std::runtime_error("load_checkpoint: trailing bytes in " + path.string());
    return ckpt;
}

}  // namespace trajdiff
