#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trajdiff/evaluation.hpp"

using namespace trajdiff;

namespace {

Tensor single_point(double x, double y) { return Tensor::from({1, 2}, {x, y}); }

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.ff_dim = 12;
    cfg.enc_dim = 4;
    cfg.enc_hidden = 6;
    cfg.t_init = 8;
    cfg.t_pred = 12;
    return cfg;
}

}  // namespace

TEST_CASE("evaluation: ade and fde fixtures") {
    RngStream rng(1, "m");
    Tensor gt = rng.normal_tensor({12, 2});
    CHECK(ade(gt, gt) == 0.0);
    CHECK(fde(gt, gt) == 0.0);

    // a constant (3,4) offset is distance 5 everywhere
    Tensor off = gt;
    for (int t = 0; t < 12; ++t) {
        off.at(t, 0) += 3.0;
        off.at(t, 1) += 4.0;
    }
    CHECK(ade(off, gt) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(fde(off, gt) == doctest::Approx(5.0).epsilon(1e-14));

    // random pair against a scalar loop
    Tensor a = rng.normal_tensor({12, 2});
    double acc = 0.0;
    for (int t = 0; t < 12; ++t)
        acc += std::sqrt((a.at(t, 0) - gt.at(t, 0)) * (a.at(t, 0) - gt.at(t, 0)) +
                         (a.at(t, 1) - gt.at(t, 1)) * (a.at(t, 1) - gt.at(t, 1)));
    CHECK(ade(a, gt) == doctest::Approx(acc / 12.0).epsilon(1e-14));
    int last = 11;
    double fd = std::sqrt((a.at(last, 0) - gt.at(last, 0)) * (a.at(last, 0) - gt.at(last, 0)) +
                          (a.at(last, 1) - gt.at(last, 1)) * (a.at(last, 1) - gt.at(last, 1)));
    CHECK(fde(a, gt) == doctest::Approx(fd).epsilon(1e-14));

    CHECK_THROWS_AS(ade(a, Tensor({11, 2})), std::invalid_argument);
}

TEST_CASE("evaluation: best-of-N equals the plain metric for one sample") {
    RngStream rng(2, "b");
    Tensor gt = rng.normal_tensor({12, 2});
    SampleSet set;
    set.samples.push_back(rng.normal_tensor({12, 2}));
    BestOfResult r = best_of_n(set, gt);
    CHECK(r.ade == ade(set.samples[0], gt));
    CHECK(r.fde == fde(set.samples[0], gt));
}

TEST_CASE("evaluation: duplicate samples reduce to the single-sample metric") {
    RngStream rng(3, "b2");
    Tensor gt = rng.normal_tensor({12, 2});
    Tensor s = rng.normal_tensor({12, 2});
    SampleSet set;
    for (int i = 0; i < 5; ++i) set.samples.push_back(s);
    BestOfResult r = best_of_n(set, gt);
    CHECK(r.ade == ade(s, gt));
    CHECK(r.fde == fde(s, gt));
}

TEST_CASE("evaluation: best-of-N enumerates hand-built samples") {
    // gt at the origin; three single-point samples at distances 5, 2, 7,
    // with the FDE minimizer differing from the ADE minimizer
    Tensor gt = single_point(0.0, 0.0);
    SampleSet set;
    set.samples.push_back(single_point(3.0, 4.0));   // 5
    set.samples.push_back(single_point(2.0, 0.0));   // 2
    set.samples.push_back(single_point(0.0, 7.0));   // 7
    BestOfResult r = best_of_n(set, gt);
    CHECK(r.ade == 2.0);
    CHECK(r.fde == 2.0);
    CHECK(best_of_k(set, gt, 1).ade == 5.0);
    CHECK(best_of_k(set, gt, 2).ade == 2.0);
}

TEST_CASE("evaluation: min_k is non-increasing for nested prefixes") {
    RngStream rng(4, "mk");
    Tensor gt = rng.normal_tensor({12, 2});
    SampleSet set;
    for (int i = 0; i < 20; ++i) set.samples.push_back(rng.normal_tensor({12, 2}));
    double prev = 1e300;
    for (int k : {1, 3, 5, 20}) {
        double cur = best_of_k(set, gt, k).ade;
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("evaluation: diversity fixtures") {
    SampleSet same;
    RngStream rng(5, "d");
    Tensor s = rng.normal_tensor({12, 2});
    for (int i = 0; i < 4; ++i) same.samples.push_back(s);
    CHECK(diversity(same) == 0.0);

    std::vector<Tensor> two = {single_point(0.0, 0.0), single_point(2.0, 0.0)};
    CHECK(diversity(two) == 2.0);

    std::vector<Tensor> three = {single_point(0.0, 0.0), single_point(1.0, 0.0),
                                 single_point(2.0, 0.0)};
    CHECK(diversity(three) == 4.0 / 3.0);  // pairwise distances 1, 2, 1
}

TEST_CASE("evaluation: diversity is symmetric and translation invariant") {
    RngStream rng(6, "d2");
    std::vector<Tensor> samples;
    for (int i = 0; i < 6; ++i) samples.push_back(rng.normal_tensor({12, 2}));
    double base = diversity(samples);

    std::vector<Tensor> reversed(samples.rbegin(), samples.rend());
    CHECK(diversity(reversed) == doctest::Approx(base).epsilon(1e-15));

    std::vector<Tensor> shifted = samples;
    for (Tensor& t : shifted)
        for (int r = 0; r < t.rows(); ++r) {
            t.at(r, 0) += 123.75;
            t.at(r, 1) -= 17.5;
        }
    CHECK(std::abs(diversity(shifted) - base) < 1e-12);
}

TEST_CASE("evaluation: sampling is seed-reproducible with K+1 trace snapshots") {
    NoiseSchedule s = build_schedule(20, 0.0001, 0.05);
    DenoiseFn zero = [](const Tensor& yk, int) { return Tensor(yk.shape()); };
    RngStream base(7, "chains");
    SampleSet a = sample_chains(zero, s, 12, 3, base, true);
    SampleSet b = sample_chains(zero, s, 12, 3, base, true);
    REQUIRE(a.trace.size() == 21);
    REQUIRE(a.samples.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (int j = 0; j < 24; ++j) CHECK(a.samples[i][j] == b.samples[i][j]);

    // snapshot 0 is the chain's own initial Gaussian draw
    RngStream chain0 = base.fork(0);
    Tensor y_k = chain0.normal_tensor({12, 2});
    for (int j = 0; j < 24; ++j) CHECK(a.trace[0][0][j] == y_k[j]);
    // snapshot K is the returned sample
    for (int j = 0; j < 24; ++j) CHECK(a.trace[20][0][j] == a.samples[0][j]);

    CHECK_THROWS_AS(sample_chains(zero, s, 12, 0, base, false), std::invalid_argument);
}

TEST_CASE("evaluation: an oracle denoiser contracts the chain onto the clean path") {
    // The stub recovers, at every step, exactly the noise that links the
    // current state to a fixed clean path; the chain must then land on that
    // path (the k=1 posterior collapses onto it) starting from pure noise.
    NoiseSchedule s = build_schedule(100, 0.0001, 0.05);
    RngStream rng(8, "oracle");
    Tensor y0({12, 2});
    for (int t = 0; t < 12; ++t) {
        y0.at(t, 0) = 0.3 * (t + 1);
        y0.at(t, 1) = -0.1 * (t + 1);
    }
    DenoiseFn oracle = [&s, &y0](const Tensor& yk, int k) {
        double sa = std::sqrt(s.alpha_bar[k - 1]);
        double sb = std::sqrt(s.one_minus_alpha_bar[k - 1]);
        Tensor eps(yk.shape());
        for (int i = 0; i < yk.size(); ++i) eps[i] = (yk[i] - sa * y0[i]) / sb;
        return eps;
    };
    SampleSet set = sample_chains(oracle, s, 12, 4, RngStream(9, "chains"), true);
    for (int i = 0; i < 4; ++i) {
        double initial = ade(set.trace[0][static_cast<std::size_t>(i)], y0);
        double final_err = ade(set.samples[static_cast<std::size_t>(i)], y0);
        CHECK(final_err < initial);
        CHECK(final_err < 1e-9);
    }
}

TEST_CASE("evaluation: step cloud export strides and row counts") {
    NoiseSchedule s = build_schedule(100, 0.0001, 0.05);
    DenoiseFn zero = [](const Tensor& yk, int) { return Tensor(yk.shape()); };
    SampleSet set = sample_chains(zero, s, 12, 3, RngStream(10, "chains"), true);

    auto rows10 = export_step_clouds(set, 10);
    CHECK(rows10.size() == 11u * 3u * 12u);  // steps 0,10,...,100

    auto rows_full = export_step_clouds(set, 100);
    CHECK(rows_full.size() == 2u * 3u * 12u);  // first and last only

    auto rows30 = export_step_clouds(set, 30);
    CHECK(rows30.size() == 5u * 3u * 12u);  // 0,30,60,90 plus the forced final

    SampleSet untr = sample_chains(zero, s, 12, 2, RngStream(11, "chains"), false);
    CHECK_THROWS_AS(export_step_clouds(untr, 10), std::invalid_argument);
    CHECK_THROWS_AS(export_step_clouds(set, 0), std::invalid_argument);
}

TEST_CASE("evaluation: dataset evaluation is invariant to the thread layout") {
    ModelConfig cfg = tiny_config();
    Denoiser model(cfg);
    ParamStore params;
    RngStream init(12, "init");
    model.init_params(params, init);
    NoiseSchedule s = build_schedule(10, 0.0001, 0.05);
    SyntheticSpec spec;
    spec.count = 6;
    auto windows = generate_synthetic(spec, 13, 0.25);

    RngStream chains(14, "chains");
    MetricReport one = evaluate_dataset(model, params, windows, s, 4, chains, 1);
    MetricReport four = evaluate_dataset(model, params, windows, s, 4, chains, 4);
    CHECK(one.ade == four.ade);
    CHECK(one.fde == four.fde);
    CHECK(one.diversity == four.diversity);
    CHECK(one.min_k.at(3).ade == four.min_k.at(3).ade);
    CHECK(one.min_k.at(5).fde == four.min_k.at(5).fde);
    CHECK(one.n_windows == 6);
}

TEST_CASE("evaluation: sweep produces K+1 averaged rows") {
    ModelConfig cfg = tiny_config();
    Denoiser model(cfg);
    ParamStore params;
    RngStream init(15, "init");
    model.init_params(params, init);
    NoiseSchedule s = build_schedule(10, 0.0001, 0.05);
    SyntheticSpec spec;
    spec.count = 3;
    auto windows = generate_synthetic(spec, 16, 0.25);

    auto rows = tradeoff_sweep(model, params, windows, s, 4, RngStream(17, "chains"), 2);
    REQUIRE(rows.size() == 11);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].step == static_cast<int>(i));
        CHECK(rows[i].ade >= 0.0);
        CHECK(rows[i].diversity >= 0.0);
        CHECK(rows[i].min3 >= rows[i].min5 * 0.999999);  // nested prefixes
    }
}

TEST_CASE("evaluation: windowed sampling lands in scene units") {
    ModelConfig cfg = tiny_config();
    Denoiser model(cfg);
    ParamStore params;
    RngStream init(18, "init");
    model.init_params(params, init);
    NoiseSchedule s = build_schedule(10, 0.0001, 0.05);
    SyntheticSpec spec;
    spec.count = 1;
    auto windows = generate_synthetic(spec, 19, 0.25);

    SampleSet set = sample_window(model, params, windows[0], s, 2, RngStream(20, "chains"), false);
    // de-normalized samples sit near the window origin, not near (0,0) in
    // normalized space
    for (const Tensor& sample : set.samples)
        for (int t = 0; t < sample.rows(); ++t) {
            CHECK(std::abs(sample.at(t, 0) - windows[0].origin[0]) < 200.0);
            CHECK(std::isfinite(sample.at(t, 1)));
        }
}
