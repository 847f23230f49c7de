#pragma once

#include <vector>

namespace trajdiff {

// Precomputed variance-schedule tables for the K-step noise chain. Step
// indices are 1-based (k = 1..K); vectors store entry k at [k-1]. Immutable
// after construction, so concurrent reads are safe.
struct NoiseSchedule {
    int K = 0;
    std::vector<double> beta;                 // beta_k
    std::vector<double> alpha;                // alpha_k = 1 - beta_k
    std::vector<double> alpha_bar;            // running product of alpha
    std::vector<double> one_minus_alpha_bar;  // 1 - alpha_bar, kept exact at k=1
    std::vector<double> beta_tilde;           // posterior variance, beta_tilde_1 = 0

    // alpha_bar with the alpha_bar_0 = 1 convention; k in [0, K].
    double alpha_bar_at(int k) const;
    double one_minus_alpha_bar_at(int k) const;
    void check_step(int k) const;  // throws on k outside [1, K]
};

// Linear ramp from beta_min to beta_max over K steps (beta_1 = beta_min when
// K = 1). Rejects K < 1 and bounds outside 0 < beta_min <= beta_max < 1.
NoiseSchedule build_schedule(int K, double beta_min, double beta_max);

struct PosteriorCoefficients {
    double coef_y0 = 0.0;  // weight of the clean path in the posterior mean
    double coef_yk = 0.0;  // weight of the noisy path
    double var = 0.0;      // posterior variance beta_tilde_k
};

// Closed-form coefficients of the Gaussian posterior over the previous step
// given (y_k, y_0). At k = 1 this is exactly (1, 0, 0): the posterior mean
// collapses onto the clean path.
PosteriorCoefficients posterior_coefficients(const NoiseSchedule& s, int k);

}  // namespace trajdiff
