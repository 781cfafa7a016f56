#ifndef CODIS_TYPES_HPP
#define CODIS_TYPES_HPP

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace codis {

// Uniformly sampled voltage trace; the universal signal currency.
struct Waveform {
  double sample_rate = 0.0;  // samples/s
  std::vector<double> samples;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// One single-event component: four asymmetric Gaussian peaks, each with
// amplitude A (signed volts), shape factor alpha in (-1,1), center mu
// (seconds) and width sigma (seconds).
struct EventTemplateParams {
  std::array<double, 4> amplitude{};    // signed volts
  std::array<double, 4> shape{};        // alpha, dimensionless
  std::array<double, 4> center{};       // seconds
  std::array<double, 4> width{};        // sigma, seconds

  void validate() const {
    for (int i = 0; i < 4; ++i) {
      if (!(width[i] > 0.0)) throw std::invalid_argument("template width must be > 0");
      if (!(shape[i] > -1.0 && shape[i] < 1.0))
        throw std::invalid_argument("template shape factor must lie in (-1, 1)");
    }
    for (int i = 1; i < 4; ++i) {
      if (!(center[i] > center[i - 1]))
        throw std::invalid_argument("template centers must be strictly increasing");
    }
  }
};

// Ground truth for one generated event.
struct EventGroundTruth {
  double arrival_time = 0.0;             // seconds, first peak center
  double diameter = 0.0;                 // micrometers
  double velocity = 0.0;                 // mm/s
  std::array<double, 4> peak_amplitudes{};  // signed volts
  EventTemplateParams tmpl;
};

// A cropped waveform with its ground-truth event count and generators.
struct LabeledSignal {
  Waveform waveform;
  int count = 0;
  std::vector<EventGroundTruth> events;
  std::string profile_name;
  double window_start = 0.0;  // seconds; template centers are absolute, local
                              // grid time t maps to window_start + t
};

// Morphology and noise description of one bead or cell type.
struct SignalProfile {
  std::string name;
  double amplitude_scale = 0.0;      // volts, median single-peak mean amplitude
  double noise_std = 0.0;            // volts
  double event_duration_mean = 0.0;  // seconds, median event support length
  double event_duration_cv = 0.0;
  double velocity_mean = 0.0;        // mm/s
  double velocity_cv = 0.0;
  double true_diameter_mean = 0.0;   // micrometers
  double true_diameter_cv = 0.0;
  double drift_amplitude = 0.0;      // volts, 0 disables
  double jump_probability = 0.0;     // per signal

  // Synthetic-geometry knobs (free parameters, not paper medians).
  double sensing_distance = 0.0;     // meters; antipodal spacing = distance/velocity
  double width_per_um = 0.0;         // seconds of peak sigma per micrometer
  double amplitude_cv = 0.15;
  double alpha_range = 0.3;          // per-peak |shape factor| upper bound
  std::array<int, 4> signs{+1, -1, +1, -1};

  double snr() const { return noise_std > 0 ? amplitude_scale / noise_std : 1e18; }

  void validate() const {
    if (!(amplitude_scale > 0.0)) throw std::invalid_argument("amplitude_scale must be > 0");
    if (noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
    for (double cv : {event_duration_cv, velocity_cv, true_diameter_cv}) {
      if (cv < 0.0 || cv > 0.5) throw std::invalid_argument("CV out of [0, 0.5]");
    }
    if (noise_std > 0.0 && !(amplitude_scale / noise_std > 1.0))
      throw std::invalid_argument("SNR must exceed 1");
    if (!(velocity_mean > 0.0)) throw std::invalid_argument("velocity_mean must be > 0");
    if (!(true_diameter_mean > 0.0)) throw std::invalid_argument("diameter must be > 0");
    if (!(sensing_distance > 0.0)) throw std::invalid_argument("sensing_distance must be > 0");
    if (!(width_per_um > 0.0)) throw std::invalid_argument("width_per_um must be > 0");
  }
};

}  // namespace codis

#endif
