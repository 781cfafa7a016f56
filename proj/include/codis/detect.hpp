#ifndef CODIS_DETECT_HPP
#define CODIS_DETECT_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "codis/types.hpp"

namespace codis::detect {

// Field names and per-profile values follow the detection parameter table.
struct DetectionParams {
  double scaling = 1e6;                 // volts -> microvolts before amplitude checks
  std::size_t std_interval = 200;       // moving std window
  std::size_t std_thrcalc_interval = 5000;
  std::size_t std_thrcalc_step = 1000;
  double std_thr_mult = 5.0;
  std::size_t buffer = 100;
  std::size_t min_length = 400;
  std::size_t max_length = 8000;
  double min_amp = 1.836e-6;            // bounds on the peak moving std, volts
  double max_amp = 1836e-6;
  double jump_goodwill = 0.1;           // |baseline step| / peak-to-peak
  std::size_t min_zero_cross = 2;
  std::size_t min_peaks = 2;
  double peak_prominence_mult = 3.0;    // count_peaks threshold, multiples of base noise

  void validate() const;
};

DetectionParams detection_params_for(const std::string& profile_name);

struct Segment {
  std::size_t start = 0;       // sample index into the stream
  Waveform samples;            // cropped slice including buffer
  bool accepted = false;
  std::string reason;          // empty when accepted
  double noise_estimate = 0.0; // base noise of the parent stream, volts
};

// Population standard deviation over each window; length = n - window + 1.
std::vector<double> moving_std(const Waveform& x, std::size_t window);

// Minimum over stride-`step` windows of the window-mean of the moving std.
double estimate_base_noise(const std::vector<double>& mstd, std::size_t interval,
                           std::size_t step);

// Noise-adaptive segmentation: a segment opens where the moving std exceeds
// base_noise * std_thr_mult, closes when it falls back, and is cropped with
// `buffer` samples on each side (merging segments that touch after cropping).
// Every returned segment carries its quality verdict.
std::vector<Segment> detect_events(const Waveform& stream, const DetectionParams& p);

// Returns the empty string when accepted, otherwise the first failing
// criterion: "length", "zero crossings", "moving std", "bias jump", "peaks".
std::string quality_filter(const Segment& seg, const DetectionParams& p);

// Lobes of |x| with prominence above mult * noise.
std::size_t count_peaks(const std::vector<double>& x, double noise, double mult = 3.0);

}  // namespace codis::detect

#endif
