#include "trajdiff/model.hpp"

#include <cmath>
#include <stdexcept>

namespace trajdiff {

void ModelConfig::validate() const {
    if (d_model < 2 || heads < 1 || layers < 1 || ff_dim < 1 || enc_dim < 1 || enc_hidden < 1 ||
        t_init < 1 || t_pred < 1)
        throw std::invalid_argument("ModelConfig: all dimensions must be positive");
    if (d_model % heads != 0)
        throw std::invalid_argument("ModelConfig: d_model must be divisible by heads");
    if (d_model % 2 != 0)
        throw std::invalid_argument("ModelConfig: d_model must be even");
}

Tensor positional_embedding(int T, int d) {
    if (T < 1 || d < 2 || d % 2 != 0)
        throw std::invalid_argument("positional_embedding: need T >= 1 and even d >= 2");
    Tensor pe({T, d});
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < d / 2; ++i) {
            double freq = std::pow(10000.0, -2.0 * i / d);
            pe.at(t, 2 * i) = std::sin(t * freq);
            pe.at(t, 2 * i + 1) = std::cos(t * freq);
        }
    }
    return pe;
}

int step_context(Graph& g, int k, int f_node) {
    if (k < 1) throw std::out_of_range("step_context: k must be >= 1");
    double kd = static_cast<double>(k);
    int step = g.constant(Tensor::from({1, 3}, {kd, std::sin(kd), std::cos(kd)}));
    return g.concat({step, f_node});
}

int gated_block(Graph& g, const ParamStore& params, const std::string& prefix, int h_node,
                int ctx_node) {
    int a = g.linear(h_node, g.param(params, prefix + ".w1"), g.param(params, prefix + ".b1"));
    int gate = g.sigmoid(
        g.linear(ctx_node, g.param(params, prefix + ".w2"), g.param(params, prefix + ".b2")));
    int shift = g.linear(ctx_node, g.param(params, prefix + ".w3"), g.param(params, prefix + ".b3"));
    return g.add(g.mul(a, gate), shift);
}

Denoiser::Denoiser(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    pos_embedding_ = positional_embedding(cfg_.t_pred, cfg_.d_model);
}

namespace {

void init_weight(ParamStore& store, RngStream& rng, const std::string& name, int in, int out) {
    Tensor& w = store.create(name, {in, out});
    double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (int i = 0; i < w.size(); ++i) w[i] = scale * rng.normal();
}

void init_bias(ParamStore& store, const std::string& name, int out) {
    store.create(name, {out});
}

void init_gated(ParamStore& store, RngStream& rng, const std::string& prefix, int in, int out,
                int ctx) {
    init_weight(store, rng, prefix + ".w1", in, out);
    init_bias(store, prefix + ".b1", out);
    init_weight(store, rng, prefix + ".w2", ctx, out);
    init_bias(store, prefix + ".b2", out);
    init_weight(store, rng, prefix + ".w3", ctx, out);
    init_bias(store, prefix + ".b3", out);
}

void init_layer_norm(ParamStore& store, const std::string& prefix, int d) {
    Tensor& gain = store.create(prefix + ".g", {d});
    gain.fill(1.0);
    store.create(prefix + ".b", {d});
}

}  // namespace

void Denoiser::init_params(ParamStore& store, RngStream& init) const {
    int ctx = cfg_.ctx_dim();
    init_weight(store, init, "enc.w1", 4 * cfg_.t_init, cfg_.enc_hidden);
    init_bias(store, "enc.b1", cfg_.enc_hidden);
    init_weight(store, init, "enc.w2", cfg_.enc_hidden, cfg_.enc_dim);
    init_bias(store, "enc.b2", cfg_.enc_dim);

    init_gated(store, init, "up", 2, cfg_.d_model, ctx);
    init_weight(store, init, "fup.w", cfg_.enc_dim, cfg_.d_model);
    init_bias(store, "fup.b", cfg_.d_model);

    for (int i = 0; i < cfg_.layers; ++i) {
        std::string L = std::to_string(i);
        init_weight(store, init, "attn" + L + ".wq", cfg_.d_model, cfg_.d_model);
        init_bias(store, "attn" + L + ".bq", cfg_.d_model);
        init_weight(store, init, "attn" + L + ".wk", cfg_.d_model, cfg_.d_model);
        init_bias(store, "attn" + L + ".bk", cfg_.d_model);
        init_weight(store, init, "attn" + L + ".wv", cfg_.d_model, cfg_.d_model);
        init_bias(store, "attn" + L + ".bv", cfg_.d_model);
        init_weight(store, init, "attn" + L + ".wo", cfg_.d_model, cfg_.d_model);
        init_bias(store, "attn" + L + ".bo", cfg_.d_model);
        init_layer_norm(store, "ln1_" + L, cfg_.d_model);
        init_weight(store, init, "ff" + L + ".w1", cfg_.d_model, cfg_.ff_dim);
        init_bias(store, "ff" + L + ".b1", cfg_.ff_dim);
        init_weight(store, init, "ff" + L + ".w2", cfg_.ff_dim, cfg_.d_model);
        init_bias(store, "ff" + L + ".b2", cfg_.d_model);
        init_layer_norm(store, "ln2_" + L, cfg_.d_model);
    }

    init_gated(store, init, "down1", cfg_.d_model, cfg_.d_model / 2, ctx);
    init_gated(store, init, "down2", cfg_.d_model / 2, 2, ctx);
}

int Denoiser::encode_history(Graph& g, const ParamStore& params, const Tensor& x) const {
    if (x.ndim() != 2 || x.rows() != cfg_.t_init || x.cols() != 2)
        throw std::invalid_argument("encode_history: expected [" + std::to_string(cfg_.t_init) +
                                    ",2] observed path, got " + x.shape_str());
    // Per-frame features: position and first difference, flattened to one row.
    Tensor feats({1, 4 * cfg_.t_init});
    for (int t = 0; t < cfg_.t_init; ++t) {
        double dx = t == 0 ? 0.0 : x.at(t, 0) - x.at(t - 1, 0);
        double dy = t == 0 ? 0.0 : x.at(t, 1) - x.at(t - 1, 1);
        feats[4 * t + 0] = x.at(t, 0);
        feats[4 * t + 1] = x.at(t, 1);
        feats[4 * t + 2] = dx;
        feats[4 * t + 3] = dy;
    }
    int h = g.linear(g.constant(std::move(feats)), g.param(params, "enc.w1"),
                     g.param(params, "enc.b1"));
    return g.linear(g.gelu(h), g.param(params, "enc.w2"), g.param(params, "enc.b2"));
}

int Denoiser::denoise(Graph& g, const ParamStore& params, int yk_node, int k, int f_node) const {
    const Tensor& yk = g.value(yk_node);
    if (yk.ndim() != 2 || yk.rows() != cfg_.t_pred || yk.cols() != 2)
        throw std::invalid_argument("denoise: expected [" + std::to_string(cfg_.t_pred) +
                                    ",2] path, got " + yk.shape_str());
    if (k < 1) throw std::out_of_range("denoise: k must be >= 1");

    int ctx = step_context(g, k, f_node);
    int h = gated_block(g, params, "up", yk_node, ctx);
    int fu = g.linear(f_node, g.param(params, "fup.w"), g.param(params, "fup.b"));
    h = g.add(h, fu);
    h = g.add(h, g.constant(pos_embedding_));

    for (int i = 0; i < cfg_.layers; ++i) {
        std::string L = std::to_string(i);
        int q = g.linear(h, g.param(params, "attn" + L + ".wq"), g.param(params, "attn" + L + ".bq"));
        int kk = g.linear(h, g.param(params, "attn" + L + ".wk"), g.param(params, "attn" + L + ".bk"));
        int v = g.linear(h, g.param(params, "attn" + L + ".wv"), g.param(params, "attn" + L + ".bv"));
        int a = g.softmax_attention(q, kk, v, cfg_.heads);
        a = g.linear(a, g.param(params, "attn" + L + ".wo"), g.param(params, "attn" + L + ".bo"));
        h = g.layer_norm(g.add(h, a), g.param(params, "ln1_" + L + ".g"),
                         g.param(params, "ln1_" + L + ".b"));
        int ff = g.linear(h, g.param(params, "ff" + L + ".w1"), g.param(params, "ff" + L + ".b1"));
        ff = g.linear(g.gelu(ff), g.param(params, "ff" + L + ".w2"),
                      g.param(params, "ff" + L + ".b2"));
        h = g.layer_norm(g.add(h, ff), g.param(params, "ln2_" + L + ".g"),
                         g.param(params, "ln2_" + L + ".b"));
    }

    int d1 = g.gelu(gated_block(g, params, "down1", h, ctx));
    return gated_block(g, params, "down2", d1, ctx);
}

Tensor Denoiser::encode_value(const ParamStore& params, const Tensor& x) const {
    Graph g(false);
    return g.value(encode_history(g, params, x));
}

Tensor Denoiser::denoise_value(const ParamStore& params, const Tensor& yk, int k,
                               const Tensor& f) const {
    Graph g(false);
    int fn = g.constant(f);
    return g.value(denoise(g, params, g.constant(yk), k, fn));
}

}  // namespace trajdiff
