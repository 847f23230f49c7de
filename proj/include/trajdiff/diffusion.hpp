#pragma once

#include "trajdiff/schedule.hpp"
#include "trajdiff/tensor.hpp"

namespace trajdiff {

// Model-free diffusion kernels. Paths and noise are dense [T, 2] tensors and
// every kernel treats them as flat Gaussian-algebra vectors, so the same code
// serves any path length. All functions are pure.

// Corrupts a clean path to step k in closed form:
// sqrt(abar_k) * y0 + sqrt(1 - abar_k) * eps.
Tensor forward_sample(const NoiseSchedule& s, const Tensor& y0, int k, const Tensor& eps);

// Exact inverse of forward_sample given the same noise.
Tensor reconstruct_y0(const NoiseSchedule& s, const Tensor& yk, int k, const Tensor& eps);

// Mean of the Gaussian posterior over y_{k-1} given (y_k, y_0).
Tensor posterior_mean(const NoiseSchedule& s, const Tensor& y0, const Tensor& yk, int k);

// Reverse-transition mean parameterized by the predicted noise:
// (y_k - beta_k / sqrt(1 - abar_k) * eps_hat) / sqrt(alpha_k).
Tensor reparam_mean(const NoiseSchedule& s, const Tensor& yk, int k, const Tensor& eps_hat);

// One reverse sampling step: reparam_mean + sqrt(beta_k) * z. The final step
// must be deterministic, so nonzero z at k = 1 is rejected.
Tensor reverse_step(const NoiseSchedule& s, const Tensor& yk, int k, const Tensor& eps_hat,
                    const Tensor& z);

// Mean squared error over all entries.
double simple_loss(const Tensor& eps, const Tensor& eps_hat);

}  // namespace trajdiff
