#include "codis/template_model.hpp"

#include <cmath>

namespace codis {

namespace {

inline double side_width(double sigma, double alpha, double dt) {
  return dt >= 0.0 ? sigma * (1.0 + alpha) : sigma * (1.0 - alpha);
}

}  // namespace

double eval_template_at(const EventTemplateParams& p, double t) {
  double v = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double dt = t - p.center[i];
    const double w = side_width(p.width[i], p.shape[i], dt);
    const double z = dt / w;
    v += p.amplitude[i] * std::exp(-0.5 * z * z);
  }
  return v;
}

void add_template(const EventTemplateParams& p, double t0, double fs,
                  std::vector<double>& out) {
  p.validate();
  const double dt_s = 1.0 / fs;
  for (int i = 0; i < 4; ++i) {
    if (p.amplitude[i] == 0.0) continue;
    // 8-sigma reach on the wide side is below double noise floor already
    const double reach = 8.0 * p.width[i] * (1.0 + std::abs(p.shape[i]));
    const double lo = p.center[i] - reach;
    const double hi = p.center[i] + reach;
    long k0 = static_cast<long>(std::ceil((lo - t0) * fs));
    long k1 = static_cast<long>(std::floor((hi - t0) * fs));
    if (k0 < 0) k0 = 0;
    if (k1 >= static_cast<long>(out.size())) k1 = static_cast<long>(out.size()) - 1;
    for (long k = k0; k <= k1; ++k) {
      const double t = t0 + static_cast<double>(k) * dt_s;
      const double d = t - p.center[i];
      const double w = side_width(p.width[i], p.shape[i], d);
      const double z = d / w;
      out[static_cast<std::size_t>(k)] += p.amplitude[i] * std::exp(-0.5 * z * z);
    }
  }
}

std::vector<double> eval_template(const EventTemplateParams& p, double t0, double fs,
                                  std::size_t n) {
  std::vector<double> out(n, 0.0);
  add_template(p, t0, fs, out);
  return out;
}

void template_gradient_at(const EventTemplateParams& p, double t,
                          std::array<double, 16>& grad) {
  for (int i = 0; i < 4; ++i) {
    const double dt = t - p.center[i];
    const double sigma = p.width[i];
    const double alpha = p.shape[i];
    const double w = side_width(sigma, alpha, dt);
    const double z = dt / w;
    const double e = std::exp(-0.5 * z * z);
    const double a = p.amplitude[i];
    const double dside = dt >= 0.0 ? 1.0 : -1.0;  // d w / d alpha = dside*sigma
    grad[i] = e;                                          // dA
    grad[4 + i] = a * e * z * z * (dside * sigma) / w;    // dAlpha
    grad[8 + i] = a * e * dt / (w * w);                   // dMu
    grad[12 + i] = a * e * z * z / sigma;                 // dSigma
  }
}

std::pair<double, double> template_support(const EventTemplateParams& p) {
  return {p.center[0] - 4.0 * p.width[0], p.center[3] + 4.0 * p.width[3]};
}

}  // namespace codis
