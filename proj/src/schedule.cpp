#include "trajdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace trajdiff {

double NoiseSchedule::alpha_bar_at(int k) const {
    if (k < 0 || k > K) throw std::out_of_range("alpha_bar_at: k outside [0,K]");
    return k == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(k - 1)];
}

double NoiseSchedule::one_minus_alpha_bar_at(int k) const {
    if (k < 0 || k > K) throw std::out_of_range("one_minus_alpha_bar_at: k outside [0,K]");
    return k == 0 ? 0.0 : one_minus_alpha_bar[static_cast<std::size_t>(k - 1)];
}

void NoiseSchedule::check_step(int k) const {
    if (k < 1 || k > K)
        throw std::out_of_range("step index k=" + std::to_string(k) + " outside [1," +
                                std::to_string(K) + "]");
}

NoiseSchedule build_schedule(int K, double beta_min, double beta_max) {
    if (K < 1) throw std::invalid_argument("build_schedule: K must be >= 1");
    if (!(beta_min > 0.0) || !(beta_max < 1.0))
        throw std::invalid_argument("build_schedule: bounds must satisfy 0 < beta_min <= beta_max < 1");
    if (beta_min > beta_max)
        throw std::invalid_argument("build_schedule: beta_min > beta_max");

    NoiseSchedule s;
    s.K = K;
    s.beta.resize(K);
    s.alpha.resize(K);
    s.alpha_bar.resize(K);
    s.one_minus_alpha_bar.resize(K);
    s.beta_tilde.resize(K);

    for (int k = 1; k <= K; ++k) {
        double b = (K == 1) ? beta_min
                            : beta_min + (static_cast<double>(k - 1) / (K - 1)) * (beta_max - beta_min);
        s.beta[k - 1] = b;
        s.alpha[k - 1] = 1.0 - b;
    }

    // 1 - alpha_bar via the recurrence 1 - a_k*abar_{k-1} = b_k + a_k*(1 - abar_{k-1}),
    // which makes one_minus_alpha_bar[0] equal beta_1 bit-exactly. That keeps the
    // k = 1 posterior coefficients exact and avoids cancellation for small k.
    double abar = 1.0;
    double one_minus = 0.0;
    for (int k = 1; k <= K; ++k) {
        abar *= s.alpha[k - 1];
        one_minus = s.beta[k - 1] + s.alpha[k - 1] * one_minus;
        s.alpha_bar[k - 1] = abar;
        s.one_minus_alpha_bar[k - 1] = one_minus;
        double prev_one_minus = (k == 1) ? 0.0 : s.one_minus_alpha_bar[k - 2];
        s.beta_tilde[k - 1] = prev_one_minus / one_minus * s.beta[k - 1];
    }
    return s;
}

PosteriorCoefficients posterior_coefficients(const NoiseSchedule& s, int k) {
    s.check_step(k);
    double abar_prev = s.alpha_bar_at(k - 1);
    double one_minus_prev = s.one_minus_alpha_bar_at(k - 1);
    double one_minus_k = s.one_minus_alpha_bar[k - 1];
    PosteriorCoefficients c;
    c.coef_y0 = std::sqrt(abar_prev) * s.beta[k - 1] / one_minus_k;
    c.coef_yk = std::sqrt(s.alpha[k - 1]) * one_minus_prev / one_minus_k;
    c.var = s.beta_tilde[k - 1];
    return c;
}

}  // namespace trajdiff
