#ifndef CODIS_TEMPLATE_MODEL_HPP
#define CODIS_TEMPLATE_MODEL_HPP

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "codis/types.hpp"

namespace codis {

// Four-peak asymmetric-Gaussian event model. Each peak i contributes
//   A_i * exp(-(t - mu_i)^2 / (2 w_i(t)^2)),
// with w_i(t) = sigma_i * (1 + alpha_i) for t >= mu_i and
// sigma_i * (1 - alpha_i) for t < mu_i, so alpha controls left/right
// asymmetry and alpha = 0 reduces to a symmetric Gaussian.

double eval_template_at(const EventTemplateParams& p, double t);

// Adds the template evaluated on the uniform grid t_k = t0 + k/fs to out.
void add_template(const EventTemplateParams& p, double t0, double fs,
                  std::vector<double>& out);

std::vector<double> eval_template(const EventTemplateParams& p, double t0, double fs,
                                  std::size_t n);

// d(value)/d(A_i, alpha_i, mu_i, sigma_i) for all four peaks at time t,
// packed as [dA0..dA3, dAlpha0..3, dMu0..3, dSigma0..3].
void template_gradient_at(const EventTemplateParams& p, double t,
                          std::array<double, 16>& grad);

// [mu_1 - 4*sigma_1, mu_4 + 4*sigma_4]; the span used by the stream merge
// rule and by dataset windowing.
std::pair<double, double> template_support(const EventTemplateParams& p);

}  // namespace codis

#endif
