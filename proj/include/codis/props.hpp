#ifndef CODIS_PROPS_HPP
#define CODIS_PROPS_HPP

#include <array>
#include <string>
#include <vector>

#include "codis/types.hpp"

namespace codis::props {

struct PeakFeature {
  double time = 0.0;       // seconds
  double amplitude = 0.0;  // signed volts
};

enum class Origin { kIsolated, kDisentangled, kStateMachine };
std::string origin_name(Origin o);

struct PropertyRecord {
  double velocity = 0.0;        // mm/s
  double diameter = 0.0;        // micrometers
  double mean_amplitude = 0.0;  // volts
  int coincidence_level = 0;
  Origin origin = Origin::kIsolated;
};

// Cubic map from peak-normalized integral (seconds) to diameter (um),
// monotonically increasing over the calibrated range.
struct Calibration {
  std::array<double, 4> coeffs{};  // c0..c3
  double integral_lo = 0.0;
  double integral_hi = 0.0;
  double rms_residual_um = 0.0;
  std::string source;
};

enum class VelocityStrategy { kPairsMean, kOuterSpan };

// Template path: the four (mu_i, A_i) read out directly.
std::array<PeakFeature, 4> peak_features(const EventTemplateParams& tmpl);

// Raw path: the four highest-prominence alternating-polarity lobes in time
// order. Throws "unresolvable" when fewer than four qualify above the noise.
std::array<PeakFeature, 4> peak_features(const Waveform& x, double noise);

// v = gmr_distance / mean(dt12, dt34) reported in mm/s (pairs-mean default).
double velocity(const std::array<PeakFeature, 4>& peaks, double gmr_distance_m,
                VelocityStrategy strategy = VelocityStrategy::kPairsMean);

// Integral of |x| over [t1 - k*spacing, t4 + k*spacing] divided by the mean
// absolute peak amplitude; spacing is the mean antipodal pair spacing.
double normalized_integral(const Waveform& x, const std::array<PeakFeature, 4>& peaks,
                           double bound_factor = 0.5);

Calibration fit_calibration(const std::vector<std::pair<double, double>>& integral_diameter);

// Horner evaluation; flags (not clamps) inputs outside 1.5x the calibrated
// range; throws on a negative result.
double diameter(double integral, const Calibration& cal, bool* in_range = nullptr);

double mean_amplitude(const std::array<PeakFeature, 4>& peaks);

// events / (flow_rate_ul_min * duration_s / 60)
double concentration(double total_events, double flow_rate_ul_min, double duration_s);

}  // namespace codis::props

#endif
