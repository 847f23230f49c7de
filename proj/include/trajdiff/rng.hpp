#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "trajdiff/tensor.hpp"

namespace trajdiff {

// One master seed fans out into independent named streams ("shuffle", "k",
// "eps", "z", "init", ...), and streams fork into per-item substreams (one
// per sampling chain, for instance). A stream's output depends only on its
// derivation path, never on what other streams consumed, so components stay
// reproducible in isolation and under any parallel layout.
//
// Gaussians come from Box-Muller over the raw engine output, which keeps
// values bit-identical across standard library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);
    RngStream(std::uint64_t master_seed, std::string_view stream_name);

    // Derives an independent child stream, e.g. one per chain or window.
    RngStream fork(std::uint64_t index) const;

    std::uint64_t next_u64();
    double uniform();        // [0, 1)
    double normal();         // standard normal
    int uniform_int(int lo, int hi);  // inclusive bounds, unbiased

    void fill_normal(Tensor& t);
    Tensor normal_tensor(std::vector<int> shape);

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_ = 0;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_name(std::string_view name);

}  // namespace trajdiff
