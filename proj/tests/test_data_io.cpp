#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unistd.h>

#include "trajdiff/data_io.hpp"
#include "trajdiff/evaluation.hpp"
#include "trajdiff/rng.hpp"

using namespace trajdiff;
namespace fs = std::filesystem;

// minimum pairwise centerline ADE for the default 3-mode spec, halved;
// computed independently from the arc geometry and frozen
static constexpr double kHalfWidth3Mode = 1.2154371497194105;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("trajdiff_test_" + std::to_string(getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("data: noiseless single-mode futures are identical") {
    SyntheticSpec spec;
    spec.modes = 1;
    spec.noise = 0.0;
    spec.count = 10;
    auto windows = generate_synthetic(spec, 1, 1.0);
    REQUIRE(windows.size() == 10);
    for (const auto& w : windows) {
        CHECK(w.mode == 0);
        for (int i = 0; i < w.y.size(); ++i)
            CHECK(std::abs(w.y[i] - windows[0].y[i]) < 1e-10);
    }
}

TEST_CASE("data: synthetic generation is seed-reproducible") {
    SyntheticSpec spec;
    auto a = generate_synthetic(spec, 42, 0.25);
    auto b = generate_synthetic(spec, 42, 0.25);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].mode == b[i].mode);
        for (int j = 0; j < a[i].x.size(); ++j) CHECK(a[i].x[j] == b[i].x[j]);
        for (int j = 0; j < a[i].y.size(); ++j) CHECK(a[i].y[j] == b[i].y[j]);
    }
    auto c = generate_synthetic(spec, 43, 0.25);
    bool any_diff = false;
    for (int j = 0; j < a[0].y.size(); ++j) any_diff |= a[0].y[j] != c[0].y[j];
    CHECK(any_diff);
}

TEST_CASE("data: mode frequencies are uniform by a chi-square test") {
    SyntheticSpec spec;
    spec.modes = 3;
    spec.count = 10000;
    auto windows = generate_synthetic(spec, 7, 1.0);
    int counts[3] = {0, 0, 0};
    for (const auto& w : windows) ++counts[w.mode];
    double expected = 10000.0 / 3.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 13.815510557964274);  // 0.1% significance, 2 dof
}

TEST_CASE("data: centerline geometry and the mode half width") {
    SyntheticSpec spec;  // 3 modes, speed 0.5, 10 deg
    auto lines = synthetic_mode_centerlines(spec);
    REQUIRE(lines.size() == 3);
    // mode order: index 0 turns right, 1 straight, 2 left
    CHECK(lines[1].at(11, 0) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(lines[1].at(11, 1) == 0.0);
    CHECK(lines[2].at(11, 1) > 2.0);
    CHECK(lines[0].at(11, 1) < -2.0);
    CHECK(synthetic_mode_half_width(spec) == doctest::Approx(kHalfWidth3Mode).epsilon(1e-12));

    SyntheticSpec one;
    one.modes = 1;
    CHECK(synthetic_mode_half_width(one) == 0.0);
}

TEST_CASE("data: normalization round trips exactly") {
    RngStream rng(2, "norm");
    Tensor raw = rng.normal_tensor({12, 2});
    for (int i = 0; i < raw.size(); ++i) raw[i] = raw[i] * 20.0 + 5.0;
    TrajectoryWindow w;
    w.origin = {17.25, -3.5};
    w.scale = 0.25;
    Tensor normed = normalize_path(raw, w.origin, w.scale);
    Tensor back = denormalize_path(normed, w);
    for (int i = 0; i < raw.size(); ++i) CHECK(std::abs(back[i] - raw[i]) < 1e-12);
}

TEST_CASE("data: windows end their observed part at the origin") {
    SyntheticSpec spec;
    auto windows = generate_synthetic(spec, 3, 0.25);
    for (const auto& w : windows) {
        CHECK(w.x.at(spec.t_init - 1, 0) == 0.0);
        CHECK(w.x.at(spec.t_init - 1, 1) == 0.0);
    }
}

TEST_CASE("data: empty scene file loads as an empty scene") {
    TempDir tmp;
    write_file(tmp.path / "empty.txt", "");
    RawScene scene = load_scene(tmp.path / "empty.txt");
    CHECK(scene.records.empty());
    CHECK(make_windows(scene, 8, 12, 1, 1.0).empty());
}

TEST_CASE("data: one-line scene file round trips") {
    TempDir tmp;
    write_file(tmp.path / "one.txt", "10 3 1.5 -2.25\n");
    RawScene scene = load_scene(tmp.path / "one.txt");
    REQUIRE(scene.records.size() == 1);
    CHECK(scene.records[0].frame == 10);
    CHECK(scene.records[0].agent == 3);
    CHECK(scene.records[0].x == 1.5);
    CHECK(scene.records[0].y == -2.25);
}

TEST_CASE("data: comments and blank lines are skipped, bad lines name their number") {
    TempDir tmp;
    write_file(tmp.path / "bad.txt", "# header\n1 1 0.0 0.0\n\n2 1 nonsense 0.0\n");
    try {
        load_scene(tmp.path / "bad.txt");
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
    write_file(tmp.path / "trail.txt", "1 1 0.0 0.0 extra\n");
    CHECK_THROWS_AS(load_scene(tmp.path / "trail.txt"), std::runtime_error);
}

TEST_CASE("data: a frame gap splits an agent into two segments") {
    // 20 records for agent 1 with one gap: frames 1..10, then 15..24
    std::string text;
    for (int f = 1; f <= 10; ++f) text += std::to_string(f) + " 1 0.0 0.0\n";
    for (int f = 15; f <= 24; ++f) text += std::to_string(f) + " 1 0.0 0.0\n";
    TempDir tmp;
    write_file(tmp.path / "gap.txt", text);
    RawScene scene = load_scene(tmp.path / "gap.txt");
    REQUIRE(scene.records.size() == 20);
    auto segments = agent_segments(scene);
    REQUIRE(segments.size() == 2);
    CHECK(segments[0].size() == 10);
    CHECK(segments[1].size() == 10);
}

TEST_CASE("data: non-monotone frames split rather than fail") {
    TempDir tmp;
    write_file(tmp.path / "mono.txt", "3 1 0 0\n2 1 0 0\n1 1 0 0\n");
    auto segments = agent_segments(load_scene(tmp.path / "mono.txt"));
    CHECK(segments.size() == 3);
}

TEST_CASE("data: window counts for segment lengths 19, 20 and 25") {
    auto scene_of_length = [](int n) {
        RawScene s;
        for (int f = 0; f < n; ++f)
            s.records.push_back({f, 1, 0.1 * f, -0.2 * f});
        return s;
    };
    CHECK(make_windows(scene_of_length(19), 8, 12, 1, 1.0).size() == 0);
    CHECK(make_windows(scene_of_length(20), 8, 12, 1, 1.0).size() == 1);
    CHECK(make_windows(scene_of_length(25), 8, 12, 1, 1.0).size() == 6);
    CHECK(make_windows(scene_of_length(25), 8, 12, 5, 1.0).size() == 2);  // offsets 0 and 5
}

TEST_CASE("data: windows never mix agents") {
    RawScene s;
    for (int f = 0; f < 20; ++f) {
        s.records.push_back({f, 1, 1000.0 + f, 0.0});
        s.records.push_back({f, 2, -1000.0 - f, 0.0});
    }
    auto windows = make_windows(s, 8, 12, 1, 1.0);
    REQUIRE(windows.size() == 2);
    for (const auto& w : windows) {
        // displacements within one window stay small; mixing agents would
        // produce a ~2000 unit jump
        for (int t = 1; t < 12; ++t) {
            double dx = std::abs(w.y.at(t, 0) - w.y.at(t - 1, 0));
            CHECK(dx < 10.0);
        }
    }
}

TEST_CASE("data: interleaved records per agent still form contiguous runs") {
    RawScene s;
    for (int f = 0; f < 20; ++f) s.records.push_back({f, 7, 1.0 * f, 0.0});
    auto segments = agent_segments(s);
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].size() == 20);
}

TEST_CASE("data: leave-one-out split") {
    std::vector<std::string> files = {"a.txt", "b.txt", "c.txt"};
    auto [train, test] = split_leave_one_out(files, "b.txt");
    REQUIRE(train.size() == 2);
    REQUIRE(test.size() == 1);
    CHECK(test[0] == "b.txt");
    CHECK_THROWS_AS(split_leave_one_out(files, "zzz.txt"), std::invalid_argument);
}

namespace {

Checkpoint sample_checkpoint() {
    Checkpoint ckpt;
    ckpt.model.d_model = 8;
    ckpt.model.heads = 2;
    ckpt.model.layers = 1;
    ckpt.model.ff_dim = 12;
    ckpt.model.enc_dim = 4;
    ckpt.model.enc_hidden = 6;
    ckpt.model.t_init = 4;
    ckpt.model.t_pred = 3;
    ckpt.schedule_k = 100;
    ckpt.beta_min = 0.0001;
    ckpt.beta_max = 0.05;
    ckpt.seed = 1234567890123456789ULL;
    ckpt.step = 4242;
    Denoiser model(ckpt.model);
    RngStream init(3, "init");
    model.init_params(ckpt.params, init);
    return ckpt;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("data: checkpoint save-load-save is byte identical") {
    TempDir tmp;
    Checkpoint ckpt = sample_checkpoint();
    fs::path p1 = tmp.path / "a.ckpt";
    fs::path p2 = tmp.path / "b.ckpt";
    save_checkpoint(ckpt, p1);
    Checkpoint loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(file_bytes(p1) == file_bytes(p2));

    CHECK(loaded.seed == ckpt.seed);
    CHECK(loaded.step == 4242);
    CHECK(loaded.schedule_k == 100);
    CHECK(loaded.beta_min == 0.0001);
    CHECK(loaded.model.d_model == 8);
}

TEST_CASE("data: reloaded parameters reproduce a recorded forward pass") {
    TempDir tmp;
    Checkpoint ckpt = sample_checkpoint();
    Denoiser model(ckpt.model);
    RngStream rng(4, "golden");
    Tensor x = rng.normal_tensor({4, 2});
    Tensor yk = rng.normal_tensor({3, 2});
    Tensor f = model.encode_value(ckpt.params, x);
    Tensor golden = model.denoise_value(ckpt.params, yk, 17, f);

    fs::path p = tmp.path / "roundtrip.ckpt";
    save_checkpoint(ckpt, p);
    Checkpoint loaded = load_checkpoint(p);
    Tensor f2 = model.encode_value(loaded.params, x);
    Tensor again = model.denoise_value(loaded.params, yk, 17, f2);
    for (int i = 0; i < golden.size(); ++i) CHECK(again[i] == golden[i]);
}

TEST_CASE("data: truncated checkpoints fail cleanly") {
    TempDir tmp;
    Checkpoint ckpt = sample_checkpoint();
    fs::path p = tmp.path / "trunc.ckpt";
    save_checkpoint(ckpt, p);
    std::string bytes = file_bytes(p);
    write_file(tmp.path / "cut.ckpt", bytes.substr(0, bytes.size() - 10));
    try {
        load_checkpoint(tmp.path / "cut.ckpt");
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("data: version and magic mismatches are rejected with a message") {
    TempDir tmp;
    Checkpoint ckpt = sample_checkpoint();
    fs::path p = tmp.path / "v.ckpt";
    save_checkpoint(ckpt, p);
    std::string bytes = file_bytes(p);

    std::string wrong_version = bytes;
    wrong_version[4] = 2;  // version field, little endian
    write_file(tmp.path / "v2.ckpt", wrong_version);
    try {
        load_checkpoint(tmp.path / "v2.ckpt");
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }

    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    write_file(tmp.path / "m.ckpt", wrong_magic);
    CHECK_THROWS_AS(load_checkpoint(tmp.path / "m.ckpt"), std::runtime_error);
}

TEST_CASE("data: bad generation arguments are rejected") {
    SyntheticSpec spec;
    CHECK_THROWS_AS(generate_synthetic(spec, 1, 0.0), std::invalid_argument);
    spec.modes = 0;
    CHECK_THROWS_AS(generate_synthetic(spec, 1, 1.0), std::invalid_argument);
    RawScene s;
    CHECK_THROWS_AS(make_windows(s, 0, 12, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_windows(s, 8, 12, 0, 1.0), std::invalid_argument);
}
