#include "codis/cs.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "codis/dsp.hpp"
#include "codis/template_model.hpp"

namespace codis::cs {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Optimizer coordinates per event (16): signed magnitudes + ordered offsets
// keep the feasible set identical to the template invariants.
//   [0..3]  peak magnitudes (>= 0)
//   [4..7]  shape factors
//   [8]     first center
//   [9..11] center gaps (> 0)
//   [12..15] widths
struct FitSpace {
  int n_events = 0;
  double fs = 0.0;
  std::size_t len = 0;
  std::vector<std::array<int, 4>> signs;
  std::vector<double> lower, upper, scale;

  int dim() const { return 16 * n_events; }
};

FitSpace make_space(int n, double fs, std::size_t len, double amp_max,
                    const std::vector<std::array<int, 4>>& signs) {
  FitSpace sp;
  sp.n_events = n;
  sp.fs = fs;
  sp.len = len;
  sp.signs = signs;
  const double span = static_cast<double>(len) / fs;
  const double a = std::max(amp_max, 1e-300);
  sp.lower.assign(static_cast<std::size_t>(sp.dim()), 0.0);
  sp.upper.assign(static_cast<std::size_t>(sp.dim()), 0.0);
  sp.scale.assign(static_cast<std::size_t>(sp.dim()), 1.0);
  for (int e = 0; e < n; ++e) {
    const std::size_t base = static_cast<std::size_t>(16 * e);
    for (int i = 0; i < 4; ++i) {
      sp.lower[base + i] = 0.0;
      sp.upper[base + i] = 20.0 * a;
      sp.scale[base + i] = a;
      sp.lower[base + 4 + i] = -0.9;
      sp.upper[base + 4 + i] = 0.9;
      sp.scale[base + 4 + i] = 1.0;
      sp.lower[base + 12 + i] = 2.0 / fs;
      sp.upper[base + 12 + i] = span / 4.0;
      sp.scale[base + 12 + i] = span;
    }
    sp.lower[base + 8] = -0.1 * span;
    sp.upper[base + 8] = 1.1 * span;
    sp.scale[base + 8] = span;
    for (int j = 0; j < 3; ++j) {
      sp.lower[base + 9 + j] = 2.0 / fs;
      sp.upper[base + 9 + j] = span;
      sp.scale[base + 9 + j] = span;
    }
  }
  return sp;
}

void clamp_theta(const FitSpace& sp, std::vector<double>& theta) {
  for (std::size_t p = 0; p < theta.size(); ++p)
    theta[p] = std::clamp(theta[p], sp.lower[p], sp.upper[p]);
}

std::vector<double> pack(const FitSpace& sp, const std::vector<EventTemplateParams>& comps) {
  std::vector<double> theta(static_cast<std::size_t>(sp.dim()), 0.0);
  for (int e = 0; e < sp.n_events; ++e) {
    const auto& c = comps[static_cast<std::size_t>(e)];
    const std::size_t base = static_cast<std::size_t>(16 * e);
    for (int i = 0; i < 4; ++i) {
      theta[base + i] = std::abs(c.amplitude[i]);
      theta[base + 4 + i] = c.shape[i];
      theta[base + 12 + i] = c.width[i];
    }
    theta[base + 8] = c.center[0];
    for (int j = 0; j < 3; ++j) theta[base + 9 + j] = c.center[j + 1] - c.center[j];
  }
  return theta;
}

std::vector<EventTemplateParams> unpack(const FitSpace& sp, const std::vector<double>& theta) {
  std::vector<EventTemplateParams> comps(static_cast<std::size_t>(sp.n_events));
  for (int e = 0; e < sp.n_events; ++e) {
    auto& c = comps[static_cast<std::size_t>(e)];
    const std::size_t base = static_cast<std::size_t>(16 * e);
    double mu = theta[base + 8];
    for (int i = 0; i < 4; ++i) {
      c.amplitude[i] = static_cast<double>(sp.signs[static_cast<std::size_t>(e)][i]) *
                       theta[base + static_cast<std::size_t>(i)];
      c.shape[i] = theta[base + 4 + static_cast<std::size_t>(i)];
      c.width[i] = theta[base + 12 + static_cast<std::size_t>(i)];
      c.center[i] = mu;
      if (i < 3) mu += theta[base + 9 + static_cast<std::size_t>(i)];
    }
  }
  return comps;
}

// Adds one component to the model; peaks are truncated at 8 sigma reach.
void add_component(const EventTemplateParams& c, double fs, std::vector<double>& model) {
  for (int i = 0; i < 4; ++i) {
    if (c.amplitude[i] == 0.0) continue;
    const double reach = 8.0 * c.width[i] * (1.0 + std::abs(c.shape[i]));
    long k0 = static_cast<long>(std::ceil((c.center[i] - reach) * fs));
    long k1 = static_cast<long>(std::floor((c.center[i] + reach) * fs));
    k0 = std::max(k0, 0L);
    k1 = std::min(k1, static_cast<long>(model.size()) - 1);
    for (long k = k0; k <= k1; ++k) {
      const double dt = static_cast<double>(k) / fs - c.center[i];
      const double w = dt >= 0.0 ? c.width[i] * (1.0 + c.shape[i])
                                 : c.width[i] * (1.0 - c.shape[i]);
      const double z = dt / w;
      model[static_cast<std::size_t>(k)] += c.amplitude[i] * std::exp(-0.5 * z * z);
    }
  }
}

std::vector<double> eval_model(const FitSpace& sp, const std::vector<double>& theta) {
  std::vector<double> model(sp.len, 0.0);
  for (const auto& c : unpack(sp, theta)) add_component(c, sp.fs, model);
  return model;
}

double eval_cost(const FitSpace& sp, const std::vector<double>& theta,
                 const std::vector<double>& y) {
  const auto model = eval_model(sp, theta);
  double c = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double r = model[k] - y[k];
    c += r * r;
  }
  return c;
}

// Natural-parameter partials of one peak at one sample, chained into the
// optimizer coordinates. `emit(p, value)` accumulates into column p.
template <typename Emit>
void chain_peak(const FitSpace& sp, int e, int i, const EventTemplateParams& c, long k,
                Emit&& emit) {
  const double dt = static_cast<double>(k) / sp.fs - c.center[i];
  const double sigma = c.width[i];
  const double alpha = c.shape[i];
  const double w = dt >= 0.0 ? sigma * (1.0 + alpha) : sigma * (1.0 - alpha);
  const double z = dt / w;
  const double ex = std::exp(-0.5 * z * z);
  const double a = c.amplitude[i];
  const double dside = dt >= 0.0 ? 1.0 : -1.0;
  const std::size_t base = static_cast<std::size_t>(16 * e);

  const double d_amp = ex;                                  // wrt signed A
  const double d_alpha = a * ex * z * z * dside * sigma / w;
  const double d_mu = a * ex * dt / (w * w);
  const double d_sigma = a * ex * z * z / sigma;

  emit(base + static_cast<std::size_t>(i),
       d_amp * static_cast<double>(sp.signs[static_cast<std::size_t>(e)][i]));
  emit(base + 4 + static_cast<std::size_t>(i), d_alpha);
  emit(base + 8, d_mu);
  for (int j = 0; j < 3; ++j)
    if (i > j) emit(base + 9 + static_cast<std::size_t>(j), d_mu);
  emit(base + 12 + static_cast<std::size_t>(i), d_sigma);
}

struct CostGrad {
  double cost = 0.0;
  std::vector<double> grad;
};

CostGrad cost_and_grad(const FitSpace& sp, const std::vector<double>& theta,
                       const std::vector<double>& y) {
  CostGrad out;
  out.grad.assign(static_cast<std::size_t>(sp.dim()), 0.0);
  const auto comps = unpack(sp, theta);
  std::vector<double> model(sp.len, 0.0);
  for (const auto& c : comps) add_component(c, sp.fs, model);
  std::vector<double> diff(sp.len);
  for (std::size_t k = 0; k < sp.len; ++k) {
    diff[k] = model[k] - y[k];
    out.cost += diff[k] * diff[k];
  }
  for (int e = 0; e < sp.n_events; ++e) {
    const auto& c = comps[static_cast<std::size_t>(e)];
    for (int i = 0; i < 4; ++i) {
      const double reach = 8.0 * c.width[i] * (1.0 + std::abs(c.shape[i]));
      long k0 = static_cast<long>(std::ceil((c.center[i] - reach) * sp.fs));
      long k1 = static_cast<long>(std::floor((c.center[i] + reach) * sp.fs));
      k0 = std::max(k0, 0L);
      k1 = std::min(k1, static_cast<long>(sp.len) - 1);
      for (long k = k0; k <= k1; ++k) {
        const double two_r = 2.0 * diff[static_cast<std::size_t>(k)];
        chain_peak(sp, e, i, c, k,
                   [&](std::size_t p, double v) { out.grad[p] += two_r * v; });
      }
    }
  }
  return out;
}

// Residual Jacobian, residual r = model - y.
void residual_jacobian(const FitSpace& sp, const std::vector<double>& theta,
                       const std::vector<double>& y, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
  const auto comps = unpack(sp, theta);
  std::vector<double> model(sp.len, 0.0);
  for (const auto& c : comps) add_component(c, sp.fs, model);
  r.resize(static_cast<long>(sp.len));
  for (std::size_t k = 0; k < sp.len; ++k) r(static_cast<long>(k)) = model[k] - y[k];
  jac.setZero(static_cast<long>(sp.len), sp.dim());
  for (int e = 0; e < sp.n_events; ++e) {
    const auto& c = comps[static_cast<std::size_t>(e)];
    for (int i = 0; i < 4; ++i) {
      const double reach = 8.0 * c.width[i] * (1.0 + std::abs(c.shape[i]));
      long k0 = static_cast<long>(std::ceil((c.center[i] - reach) * sp.fs));
      long k1 = static_cast<long>(std::floor((c.center[i] + reach) * sp.fs));
      k0 = std::max(k0, 0L);
      k1 = std::min(k1, static_cast<long>(sp.len) - 1);
      for (long k = k0; k <= k1; ++k) {
        chain_peak(sp, e, i, c, k, [&](std::size_t p, double v) {
          jac(k, static_cast<long>(p)) += v;
        });
      }
    }
  }
}

double head_noise_estimate(const std::vector<double>& y) {
  const std::size_t m = std::min<std::size_t>(50, y.size());
  std::vector<double> head(y.begin(), y.begin() + static_cast<long>(m));
  return population_std(head);
}

double max_abs(const std::vector<double>& y) {
  double a = 0.0;
  for (double v : y) a = std::max(a, std::abs(v));
  return a;
}

// sigma from the half-width of the lobe around `apex` on |y|
double lobe_sigma(const std::vector<double>& y, std::size_t apex, double fs) {
  const double half = std::abs(y[apex]) * 0.5;
  std::size_t l = apex, rgt = apex;
  while (l > 0 && std::abs(y[l]) > half) --l;
  while (rgt + 1 < y.size() && std::abs(y[rgt]) > half) ++rgt;
  const double hw = 0.5 * static_cast<double>(rgt - l);
  return std::max(hw / 1.1774, 2.0) / fs;
}

}  // namespace

void CsConfig::validate() const {
  for (double f : ftols)
    if (!(f > 0.0)) throw std::invalid_argument("cs: ftols must be positive");
  if (!(timeout_s > 0.0)) throw std::invalid_argument("cs: timeout must be > 0");
  if (adam_epochs < 0) throw std::invalid_argument("cs: adam_epochs must be >= 0");
  if (savgol_window % 2 == 0) throw std::invalid_argument("cs: savgol window must be odd");
}

CsConfig cs_config_for(const SignalProfile& profile, double fs) {
  CsConfig cfg;
  if (profile.name == "cd4") cfg.gmr_distance = 18e-6;
  else if (profile.name == "cd14") cfg.gmr_distance = 16e-6;
  else cfg.gmr_distance = 14e-6;

  // library seed: the profile's median single-event template, first center at 0
  const double spacing = profile.sensing_distance / (profile.velocity_mean * 1e-3);
  const double sigma = profile.width_per_um * profile.true_diameter_mean;
  const double gap = std::max(profile.event_duration_mean - 2.0 * spacing - 8.0 * sigma,
                              std::max(0.25 * spacing, 8.5 / fs));
  EventTemplateParams seed;
  seed.center = {0.0, spacing, spacing + gap, 2.0 * spacing + gap};
  for (int i = 0; i < 4; ++i) {
    seed.amplitude[i] = static_cast<double>(profile.signs[i]) * profile.amplitude_scale;
    seed.shape[i] = 0.0;
    seed.width[i] = sigma;
  }
  cfg.template_library.push_back(seed);
  return cfg;
}

std::vector<double> preprocess(const Waveform& x, const CsConfig& cfg) {
  if (x.samples.empty()) throw std::invalid_argument("cs: empty input");
  if (!cfg.smooth) return x.samples;
  return savgol_filter(x.samples, cfg.savgol_window, cfg.savgol_polyorder);
}

std::vector<EventTemplateParams> init_candidates(const Waveform& x, int n,
                                                 const CsConfig& cfg) {
  if (n < 1 || n > 4) throw std::invalid_argument("cs: count must be in 1..4");
  const auto y = preprocess(x, cfg);
  const double fs = x.sample_rate;
  const double span = static_cast<double>(y.size()) / fs;
  const double a_max = max_abs(y);
  const double noise = std::max(head_noise_estimate(y), 0.02 * a_max);

  std::vector<EventTemplateParams> seeds;
  if (a_max > 0.0 && noise > 0.0) {
    const auto lobes = prominent_lobes(y, 3.0 * noise);

    // alternating runs of four lobes become direct candidates
    std::vector<std::vector<PeakInfo>> runs;
    for (const auto& l : lobes) {
      if (runs.empty() || runs.back().size() == 4 ||
          runs.back().back().value * l.value >= 0.0) {
        runs.emplace_back();
      }
      runs.back().push_back(l);
    }
    std::vector<std::size_t> complete;
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (runs[i].size() == 4) complete.push_back(i);
    std::sort(complete.begin(), complete.end(), [&](std::size_t a, std::size_t b) {
      double pa = 0.0, pb = 0.0;
      for (const auto& l : runs[a]) pa += l.prominence;
      for (const auto& l : runs[b]) pb += l.prominence;
      return pa > pb;
    });
    if (complete.size() > static_cast<std::size_t>(n)) complete.resize(static_cast<std::size_t>(n));
    std::sort(complete.begin(), complete.end());

    for (std::size_t idx : complete) {
      const auto& run = runs[idx];
      EventTemplateParams t;
      for (int i = 0; i < 4; ++i) {
        t.center[i] = static_cast<double>(run[static_cast<std::size_t>(i)].index) / fs;
        t.amplitude[i] = run[static_cast<std::size_t>(i)].value;
        t.shape[i] = 0.0;
        t.width[i] = lobe_sigma(y, run[static_cast<std::size_t>(i)].index, fs);
      }
      for (int i = 1; i < 4; ++i)
        t.center[i] = std::max(t.center[i], t.center[i - 1] + 2.5 / fs);
      seeds.push_back(t);
    }
  }

  // uniform placement fallback for the remainder
  const std::size_t missing = static_cast<std::size_t>(n) - seeds.size();
  if (missing > 0) {
    EventTemplateParams lib;
    if (!cfg.template_library.empty()) {
      lib = cfg.template_library.front();
    } else {
      lib.center = {0.0, span / 8.0, span / 4.0, 3.0 * span / 8.0};
      for (int i = 0; i < 4; ++i) {
        lib.amplitude[i] = (i % 2 == 0 ? 1.0 : -1.0);
        lib.shape[i] = 0.0;
        lib.width[i] = span / 24.0;
      }
    }
    const double lib_mid = 0.5 * (lib.center[0] + lib.center[3]);
    double lib_amp = 0.0;
    for (double a : lib.amplitude) lib_amp = std::max(lib_amp, std::abs(a));
    const double amp_scale = a_max > 0.0 ? a_max / std::max(lib_amp, 1e-300) : 1.0;
    for (std::size_t j = 0; j < missing; ++j) {
      EventTemplateParams t = lib;
      const double target_mid =
          (static_cast<double>(j) + 0.5) * span / static_cast<double>(missing);
      const double shift = target_mid - lib_mid;
      for (int i = 0; i < 4; ++i) {
        t.center[i] += shift;
        t.amplitude[i] *= amp_scale;
        t.width[i] = std::min(t.width[i], span / 4.5);
      }
      seeds.push_back(t);
    }
  }

  std::sort(seeds.begin(), seeds.end(),
            [](const EventTemplateParams& a, const EventTemplateParams& b) {
              return a.center[0] < b.center[0];
            });
  return seeds;
}

Disentanglement disentangle(const Waveform& x, int n, const CsConfig& cfg) {
  cfg.validate();
  if (n < 1 || n > 4) throw std::invalid_argument("cs: count must be in 1..4");
  if (x.samples.size() < 8) throw std::invalid_argument("cs: input too short");
  const auto t0 = Clock::now();

  Disentanglement out;
  out.preprocessed = preprocess(x, cfg);
  const auto& y = out.preprocessed;
  const double fs = x.sample_rate;

  auto seeds = init_candidates(x, n, cfg);
  std::vector<std::array<int, 4>> signs(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) {
    for (int i = 0; i < 4; ++i) {
      const double a = seeds[static_cast<std::size_t>(e)].amplitude[i];
      int s = a > 0.0 ? 1 : (a < 0.0 ? -1 : 0);
      if (s == 0) s = (i % 2 == 0) ? 1 : -1;
      signs[static_cast<std::size_t>(e)][static_cast<std::size_t>(i)] = s;
    }
  }

  FitSpace sp = make_space(n, fs, y.size(), max_abs(y), signs);
  std::vector<double> theta = pack(sp, seeds);
  clamp_theta(sp, theta);

  std::vector<double> best_theta = theta;
  double best_cost = eval_cost(sp, theta, y);
  out.adam_cost.reserve(static_cast<std::size_t>(cfg.adam_epochs));

  // phase 1: projected Adam in normalized coordinates
  {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::vector<double> m(theta.size(), 0.0), v(theta.size(), 0.0);
    for (int epoch = 0; epoch < cfg.adam_epochs; ++epoch) {
      if (seconds_since(t0) > cfg.timeout_s) break;
      auto cg = cost_and_grad(sp, theta, y);
      if (cg.cost < best_cost) {
        best_cost = cg.cost;
        best_theta = theta;
      }
      out.adam_cost.push_back(best_cost);
      ++out.adam_epochs_run;
      const double t = static_cast<double>(epoch + 1);
      const double corr = std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
      for (std::size_t p = 0; p < theta.size(); ++p) {
        const double g = cg.grad[p] * sp.scale[p];  // d cost / d (theta/scale)
        m[p] = b1 * m[p] + (1.0 - b1) * g;
        v[p] = b2 * v[p] + (1.0 - b2) * g * g;
        const double step = cfg.adam_lr * corr * m[p] / (std::sqrt(v[p]) + eps);
        theta[p] = std::clamp(theta[p] - step * sp.scale[p], sp.lower[p], sp.upper[p]);
      }
    }
    const double final_cost = eval_cost(sp, theta, y);
    if (final_cost < best_cost) {
      best_cost = final_cost;
      best_theta = theta;
    }
  }

  // phase 2: projected Levenberg-Marquardt with Marquardt scaling
  theta = best_theta;
  {
    const double ftol = cfg.ftols[static_cast<std::size_t>(n - 1)];
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    double cost = best_cost;
    double lambda = 1e-3;
    for (int iter = 0; iter < cfg.lm_max_iters; ++iter) {
      if (seconds_since(t0) > cfg.timeout_s) break;
      residual_jacobian(sp, theta, y, r, jac);
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd g = jac.transpose() * r;
      const double max_diag = std::max(jtj.diagonal().maxCoeff(), 1e-300);
      Eigen::VectorXd d = jtj.diagonal().cwiseMax(1e-12 * max_diag);

      bool accepted = false;
      std::vector<double> trial(theta.size());
      double trial_cost = cost;
      for (int tries = 0; tries < 16; ++tries) {
        Eigen::MatrixXd a = jtj;
        a.diagonal() += lambda * d;
        const Eigen::VectorXd delta = a.ldlt().solve(-g);
        for (std::size_t p = 0; p < theta.size(); ++p)
          trial[p] = std::clamp(theta[p] + delta(static_cast<long>(p)), sp.lower[p], sp.upper[p]);
        trial_cost = eval_cost(sp, trial, y);
        if (trial_cost < cost) {
          accepted = true;
          lambda = std::max(lambda / 3.0, 1e-12);
          break;
        }
        lambda *= 4.0;
        if (lambda > 1e14) break;
      }
      ++out.lm_iters_run;
      if (!accepted) break;  // stalled (likely at a bound)

      const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
      theta = trial;
      cost = trial_cost;
      if (cost < best_cost) {
        best_cost = cost;
        best_theta = theta;
      }
      if (rel < ftol) {
        out.converged = true;
        break;
      }
    }
  }

  out.cost = best_cost;
  out.components = unpack(sp, best_theta);
  std::sort(out.components.begin(), out.components.end(),
            [](const EventTemplateParams& a, const EventTemplateParams& b) {
              return a.center[0] < b.center[0];
            });
  out.rendered.resize(out.components.size());
  std::vector<double> recon(y.size(), 0.0);
  for (std::size_t e = 0; e < out.components.size(); ++e) {
    out.rendered[e].assign(y.size(), 0.0);
    add_component(out.components[e], fs, out.rendered[e]);
    for (std::size_t k = 0; k < y.size(); ++k) recon[k] += out.rendered[e][k];
  }
  out.residual.resize(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) out.residual[k] = y[k] - recon[k];

  Waveform pre;
  pre.sample_rate = fs;
  pre.samples = y;
  out.fidelity = fidelity(pre, out);
  return out;
}

FidelityMetrics fidelity(const Waveform& raw, const Disentanglement& d) {
  if (d.rendered.empty()) throw std::invalid_argument("fidelity: no components");
  const std::size_t len = raw.samples.size();
  for (const auto& r : d.rendered)
    if (r.size() != len) throw std::invalid_argument("fidelity: length mismatch");

  std::vector<double> recon(len, 0.0);
  for (const auto& r : d.rendered)
    for (std::size_t k = 0; k < len; ++k) recon[k] += r[k];

  double raw_e = 0.0, rec_e = 0.0, dot = 0.0, raw_int = 0.0, rec_int = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    raw_e += raw.samples[k] * raw.samples[k];
    rec_e += recon[k] * recon[k];
    dot += raw.samples[k] * recon[k];
    raw_int += std::abs(raw.samples[k]);
    rec_int += std::abs(recon[k]);
  }
  if (!(raw_e > 0.0)) throw std::invalid_argument("fidelity: zero-energy raw signal");

  FidelityMetrics m;
  m.cross_correlation = rec_e > 0.0 ? dot / std::sqrt(raw_e * rec_e) : 0.0;
  m.integral_deviation = rec_int / raw_int - 1.0;

  // mean absolute apex of the strongest lobes, same extractor on both sides
  const std::size_t want = 4 * std::max<std::size_t>(d.components.size(), 1);
  auto lobe_mean = [&](const std::vector<double>& v) {
    const double thr = 0.25 * max_abs(v);
    auto lobes = prominent_lobes(v, thr);
    std::sort(lobes.begin(), lobes.end(),
              [](const PeakInfo& a, const PeakInfo& b) { return a.prominence > b.prominence; });
    if (lobes.size() > want) lobes.resize(want);
    if (lobes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& l : lobes) s += std::abs(l.value);
    return s / static_cast<double>(lobes.size());
  };
  const double raw_amp = lobe_mean(raw.samples);
  const double rec_amp = lobe_mean(recon);
  m.amplitude_deviation = raw_amp > 0.0 ? rec_amp / raw_amp - 1.0 : 0.0;
  return m;
}

double gradient_check(const std::vector<double>& target, double fs,
                      const std::vector<EventTemplateParams>& components) {
  if (components.empty() || components.size() > 4)
    throw std::invalid_argument("gradient_check: need 1..4 components");
  const int n = static_cast<int>(components.size());
  std::vector<std::array<int, 4>> signs(components.size());
  for (std::size_t e = 0; e < components.size(); ++e)
    for (int i = 0; i < 4; ++i) {
      const double a = components[e].amplitude[i];
      signs[e][static_cast<std::size_t>(i)] = a >= 0.0 ? 1 : -1;
    }
  FitSpace sp = make_space(n, fs, target.size(), max_abs(target), signs);
  std::vector<double> theta = pack(sp, components);

  const auto cg = cost_and_grad(sp, theta, target);
  double gmax = 0.0;
  for (double g : cg.grad) gmax = std::max(gmax, std::abs(g));

  double worst = 0.0;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    const double h = 1e-6 * std::max(std::abs(theta[p]), 0.05 * sp.scale[p]);
    std::vector<double> tp = theta, tm = theta;
    tp[p] += h;
    tm[p] -= h;
    const double fd = (eval_cost(sp, tp, target) - eval_cost(sp, tm, target)) / (2.0 * h);
    const double denom = std::max({std::abs(cg.grad[p]), std::abs(fd), 1e-6 * gmax, 1e-300});
    worst = std::max(worst, std::abs(cg.grad[p] - fd) / denom);
  }
  return worst;
}

}  // namespace codis::cs
