#include "trajdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace trajdiff {

Tensor forward_sample(const NoiseSchedule& s, const Tensor& y0, int k, const Tensor& eps) {
    s.check_step(k);
    check_same_shape(y0, eps, "forward_sample");
    double a = std::sqrt(s.alpha_bar[k - 1]);
    double b = std::sqrt(s.one_minus_alpha_bar[k - 1]);
    Tensor out(y0.shape());
    for (int i = 0; i < y0.size(); ++i) out[i] = a * y0[i] + b * eps[i];
    return out;
}

Tensor reconstruct_y0(const NoiseSchedule& s, const Tensor& yk, int k, const Tensor& eps) {
    s.check_step(k);
    check_same_shape(yk, eps, "reconstruct_y0");
    double a = std::sqrt(s.alpha_bar[k - 1]);
    double b = std::sqrt(s.one_minus_alpha_bar[k - 1]);
    Tensor out(yk.shape());
    for (int i = 0; i < yk.size(); ++i) out[i] = (yk[i] - b * eps[i]) / a;
    return out;
}

Tensor posterior_mean(const NoiseSchedule& s, const Tensor& y0, const Tensor& yk, int k) {
    s.check_step(k);
    check_same_shape(y0, yk, "posterior_mean");
    PosteriorCoefficients c = posterior_coefficients(s, k);
    Tensor out(y0.shape());
    for (int i = 0; i < y0.size(); ++i) out[i] = c.coef_y0 * y0[i] + c.coef_yk * yk[i];
    return out;
}

Tensor reparam_mean(const NoiseSchedule& s, const Tensor& yk, int k, const Tensor& eps_hat) {
    s.check_step(k);
    check_same_shape(yk, eps_hat, "reparam_mean");
    double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha[k - 1]);
    double noise_coef = s.beta[k - 1] / std::sqrt(s.one_minus_alpha_bar[k - 1]);
    Tensor out(yk.shape());
    for (int i = 0; i < yk.size(); ++i)
        out[i] = inv_sqrt_alpha * (yk[i] - noise_coef * eps_hat[i]);
    return out;
}

Tensor reverse_step(const NoiseSchedule& s, const Tensor& yk, int k, const Tensor& eps_hat,
                    const Tensor& z) {
    s.check_step(k);
    check_same_shape(yk, z, "reverse_step");
    if (k == 1) {
        for (int i = 0; i < z.size(); ++i)
            if (z[i] != 0.0)
                throw std::invalid_argument("reverse_step: z must be zero at k=1");
    }
    Tensor out = reparam_mean(s, yk, k, eps_hat);
    double sigma = std::sqrt(s.beta[k - 1]);
    for (int i = 0; i < out.size(); ++i) out[i] += sigma * z[i];
    return out;
}

double simple_loss(const Tensor& eps, const Tensor& eps_hat) {
    check_same_shape(eps, eps_hat, "simple_loss");
    if (eps.size() == 0) throw std::invalid_argument("simple_loss: empty tensors");
    double acc = 0.0;
    for (int i = 0; i < eps.size(); ++i) {
        double d = eps[i] - eps_hat[i];
        acc += d * d;
    }
    return acc / eps.size();
}

}  // namespace trajdiff
