#pragma once

#include <string>

#include "trajdiff/graph.hpp"
#include "trajdiff/rng.hpp"
#include "trajdiff/tensor.hpp"

namespace trajdiff {

struct ModelConfig {
    int d_model = 64;     // token embedding width
    int heads = 4;        // attention heads
    int layers = 3;       // self-attention layers
    int ff_dim = 128;     // feed-forward width
    int enc_dim = 32;     // state-embedding width
    int enc_hidden = 64;  // hidden width of the history encoder
    int t_init = 8;       // observed frames
    int t_pred = 12;      // predicted frames

    int ctx_dim() const { return 3 + enc_dim; }  // [k, sin k, cos k, f]
    void validate() const;
};

// Standard sinusoidal table, [T, d]. Row 0 is the (0, 1, 0, 1, ...) pattern.
Tensor positional_embedding(int T, int d);

// Step-plus-condition context vector [1, 3 + enc_dim]: the raw step index,
// its sinusoids, and the state embedding.
int step_context(Graph& g, int k, int f_node);

// Gated MLP sub-network: (W1 h + b1) * sigmoid(W2 c + b2) + (W3 c + b3),
// where the gate and the additive path depend only on the context row.
// Parameters are looked up as <prefix>.w1/b1/w2/b2/w3/b3.
int gated_block(Graph& g, const ParamStore& params, const std::string& prefix, int h_node,
                int ctx_node);

// History encoder plus the noise-prediction network. The class owns no
// parameters; it names, initializes and wires tensors inside a ParamStore so
// that several stores (e.g. checkpoints) can share one wiring.
class Denoiser {
public:
    explicit Denoiser(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    // Creates every named parameter; weights are fan-in-scaled normals drawn
    // from `init`, biases zero, layer-norm affine identity.
    void init_params(ParamStore& store, RngStream& init) const;

    // Observed path [t_init, 2] -> state embedding node [1, enc_dim].
    int encode_history(Graph& g, const ParamStore& params, const Tensor& x) const;

    // Noisy future node [t_pred, 2] + step k + state embedding -> predicted
    // noise node of the same shape.
    int denoise(Graph& g, const ParamStore& params, int yk_node, int k, int f_node) const;

    // Value-only conveniences (no gradient bookkeeping).
    Tensor encode_value(const ParamStore& params, const Tensor& x) const;
    Tensor denoise_value(const ParamStore& params, const Tensor& yk, int k, const Tensor& f) const;

private:
    ModelConfig cfg_;
    Tensor pos_embedding_;
};

}  // namespace trajdiff
