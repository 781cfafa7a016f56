#ifndef CODIS_CS_HPP
#define CODIS_CS_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "codis/types.hpp"

namespace codis::cs {

struct CsConfig {
  double gmr_distance = 14e-6;  // meters; carried through to property inference
  std::array<double, 4> ftols{1e-2, 1e-6, 1e-6, 1e-6};  // indexed by count label
  double timeout_s = 45.0;      // wall clock per call
  int adam_epochs = 2000;
  double adam_lr = 0.02;        // step size in normalized coordinates
  bool smooth = true;
  std::size_t savgol_window = 25;
  int savgol_polyorder = 3;
  bool add_noise_pad = true;
  int lm_max_iters = 120;
  std::vector<EventTemplateParams> template_library;  // seeds, first center at 0

  void validate() const;
};

// Table-S4-style defaults plus a library seed built from the profile's
// median single-event geometry.
CsConfig cs_config_for(const SignalProfile& profile, double fs);

struct FidelityMetrics {
  double cross_correlation = 0.0;   // zero-lag, normalized, in [-1, 1]
  double integral_deviation = 0.0;  // relative, rectified integrals
  double amplitude_deviation = 0.0; // relative, mean absolute peak amplitudes
};

struct Disentanglement {
  std::vector<EventTemplateParams> components;  // ordered by first center
  std::vector<std::vector<double>> rendered;    // one trace per component
  std::vector<double> residual;                 // preprocessed input minus sum
  std::vector<double> preprocessed;             // the fit target
  FidelityMetrics fidelity;                     // vs the preprocessed input
  bool converged = false;
  double cost = 0.0;
  std::vector<double> adam_cost;                // best-so-far cost per epoch
  int adam_epochs_run = 0;
  int lm_iters_run = 0;
};

// Savitzky-Golay smoothing with the configured window/order.
std::vector<double> preprocess(const Waveform& x, const CsConfig& cfg);

// Deterministic seeds: library templates matched to the n largest-prominence
// peak clusters of the smoothed signal, uniform placement as fallback.
std::vector<EventTemplateParams> init_candidates(const Waveform& x, int n,
                                                 const CsConfig& cfg);

// Minimizes ||preprocess(x) - sum of n templates||^2 over all n*16 parameters:
// projected Adam first, then bounded Levenberg-Marquardt down to ftols[n-1].
// Sign alternation and center ordering are kept by construction (signed
// magnitudes, ordered offsets). Aborts at the timeout with best-so-far.
Disentanglement disentangle(const Waveform& x, int n, const CsConfig& cfg);

FidelityMetrics fidelity(const Waveform& raw, const Disentanglement& d);

// Max relative error between analytic and central-difference gradients of the
// fit objective at the given feasible point.
double gradient_check(const std::vector<double>& target, double fs,
                      const std::vector<EventTemplateParams>& components);

}  // namespace codis::cs

#endif
