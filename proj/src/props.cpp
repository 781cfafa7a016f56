#include "codis/props.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "codis/dsp.hpp"

namespace codis::props {

std::string origin_name(Origin o) {
  switch (o) {
    case Origin::kIsolated: return "isolated";
    case Origin::kDisentangled: return "disentangled";
    case Origin::kStateMachine: return "state-machine";
  }
  return "?";
}

std::array<PeakFeature, 4> peak_features(const EventTemplateParams& tmpl) {
  std::array<PeakFeature, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = {tmpl.center[i], tmpl.amplitude[i]};
  return out;
}

std::array<PeakFeature, 4> peak_features(const Waveform& x, double noise) {
  if (!(noise > 0.0)) throw std::invalid_argument("peak_features: noise must be > 0");
  auto lobes = prominent_lobes(x.samples, 3.0 * noise);

  // strongest-first greedy selection that keeps time-ordered sign alternation
  std::vector<std::size_t> order(lobes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lobes[a].prominence > lobes[b].prominence;
  });
  std::vector<std::size_t> chosen;
  for (std::size_t idx : order) {
    std::vector<std::size_t> trial = chosen;
    trial.push_back(idx);
    std::sort(trial.begin(), trial.end());
    bool alternating = true;
    for (std::size_t i = 1; i < trial.size(); ++i) {
      if (lobes[trial[i]].value * lobes[trial[i - 1]].value >= 0.0) {
        alternating = false;
        break;
      }
    }
    if (!alternating) continue;
    chosen = trial;
    if (chosen.size() == 4) break;
  }
  if (chosen.size() < 4) throw std::runtime_error("peak_features: unresolvable");

  std::array<PeakFeature, 4> out;
  for (int i = 0; i < 4; ++i) {
    const auto& l = lobes[chosen[static_cast<std::size_t>(i)]];
    out[i] = {static_cast<double>(l.index) / x.sample_rate, l.value};
  }
  return out;
}

double velocity(const std::array<PeakFeature, 4>& peaks, double gmr_distance_m,
                VelocityStrategy strategy) {
  for (int i = 1; i < 4; ++i) {
    if (!(peaks[i].time > peaks[i - 1].time))
      throw std::invalid_argument("velocity: peak times must be strictly increasing");
  }
  double dt;
  if (strategy == VelocityStrategy::kPairsMean) {
    dt = 0.5 * ((peaks[1].time - peaks[0].time) + (peaks[3].time - peaks[2].time));
  } else {
    // outer span normalized by the three inter-peak gaps it contains
    dt = (peaks[3].time - peaks[0].time) / 3.0;
  }
  return gmr_distance_m / dt * 1e3;  // m/s -> mm/s
}

double normalized_integral(const Waveform& x, const std::array<PeakFeature, 4>& peaks,
                           double bound_factor) {
  const double amp = mean_amplitude(peaks);
  if (!(amp > 0.0)) throw std::invalid_argument("normalized_integral: zero mean amplitude");
  const double spacing =
      0.5 * ((peaks[1].time - peaks[0].time) + (peaks[3].time - peaks[2].time));
  const double lo = peaks[0].time - bound_factor * spacing;
  const double hi = peaks[3].time + bound_factor * spacing;
  const double fs = x.sample_rate;
  long k0 = static_cast<long>(std::ceil(lo * fs));
  long k1 = static_cast<long>(std::floor(hi * fs));
  k0 = std::max(k0, 0L);
  k1 = std::min(k1, static_cast<long>(x.samples.size()) - 1);
  double acc = 0.0;
  for (long k = k0; k <= k1; ++k) acc += std::abs(x.samples[static_cast<std::size_t>(k)]);
  return acc / fs / amp;
}

Calibration fit_calibration(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 20)
    throw std::invalid_argument("fit_calibration: need at least 20 points");
  double lo = pts.front().first, hi = pts.front().first;
  for (const auto& [i, d] : pts) {
    lo = std::min(lo, i);
    hi = std::max(hi, i);
  }
  if (!(hi > lo)) throw std::invalid_argument("fit_calibration: degenerate integrals");

  Eigen::MatrixXd a(static_cast<long>(pts.size()), 4);
  Eigen::VectorXd b(static_cast<long>(pts.size()));
  for (long r = 0; r < a.rows(); ++r) {
    const double x = pts[static_cast<std::size_t>(r)].first;
    a(r, 0) = 1.0;
    a(r, 1) = x;
    a(r, 2) = x * x;
    a(r, 3) = x * x * x;
    b(r) = pts[static_cast<std::size_t>(r)].second;
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);

  Calibration cal;
  cal.coeffs = {c(0), c(1), c(2), c(3)};
  cal.integral_lo = lo;
  cal.integral_hi = hi;
  const Eigen::VectorXd resid = a * c - b;
  cal.rms_residual_um = std::sqrt(resid.squaredNorm() / static_cast<double>(pts.size()));

  for (int k = 0; k <= 200; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / 200.0;
    const double slope = c(1) + 2.0 * c(2) * x + 3.0 * c(3) * x * x;
    if (!(slope > 0.0))
      throw std::runtime_error("fit_calibration: calibration not monotonic over data range");
  }
  return cal;
}

double diameter(double integral, const Calibration& cal, bool* in_range) {
  // in range = within 1.5x the calibrated span around its midpoint
  const double half_span = 0.5 * (cal.integral_hi - cal.integral_lo);
  const double mid = 0.5 * (cal.integral_hi + cal.integral_lo);
  if (in_range) *in_range = std::abs(integral - mid) <= 1.5 * half_span;
  double v = cal.coeffs[3];
  v = v * integral + cal.coeffs[2];
  v = v * integral + cal.coeffs[1];
  v = v * integral + cal.coeffs[0];
  if (!(v > 0.0)) throw std::runtime_error("diameter: calibration out of domain");
  return v;
}

double mean_amplitude(const std::array<PeakFeature, 4>& peaks) {
  double s = 0.0;
  for (const auto& p : peaks) s += std::abs(p.amplitude);
  return s / 4.0;
}

double concentration(double total_events, double flow_rate_ul_min, double duration_s) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("concentration: zero duration");
  if (!(flow_rate_ul_min > 0.0))
    throw std::invalid_argument("concentration: flow rate must be > 0");
  if (total_events < 0.0) throw std::invalid_argument("concentration: negative event count");
  return total_events / (flow_rate_ul_min * duration_s / 60.0);
}

}  // namespace codis::props
