#ifndef CODIS_SIM_HPP
#define CODIS_SIM_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "codis/types.hpp"

namespace codis::sim {

// Six built-in profiles: four bead-like (12um, 8um100, 8um53, 8um16) and two
// cell-like (cd4, cd14). Medians follow the characterization data; SNR is
// strictly ordered 8um100 > 8um53 > 12um > 8um16 and the cell profiles have
// drift/jump artifacts enabled.
std::vector<SignalProfile> builtin_profiles();
SignalProfile profile_by_name(const std::string& name);

// Evaluates the event template on the grid t_k = k/fs, k = 0..n-1. No noise.
Waveform render_event(const EventGroundTruth& gt, double fs, std::size_t n);

// Draws one event whose first peak center sits at t_first_peak (seconds).
EventGroundTruth draw_event(const SignalProfile& profile, double fs, double t_first_peak,
                            std::uint64_t seed);

// [support_lo, support_hi] = centers +- 4 widths of the outer peaks.
std::pair<double, double> event_support(const EventGroundTruth& gt);

struct DatasetOptions {
  double offset_min_frac = 0.05;  // consecutive-event offset, fraction of support
  double offset_max_frac = 0.95;
  bool add_noise = true;
  std::size_t margin_samples = 100;  // noise context on each side of the window
};

// Class-stratified direct generation; class_mix is over counts 1..4 and must
// sum to 1. Stratification is exact up to largest-remainder rounding.
std::vector<LabeledSignal> make_dataset(const SignalProfile& profile, std::size_t n_signals,
                                        const std::array<double, 4>& class_mix, double fs,
                                        std::uint64_t seed,
                                        const DatasetOptions& options = {});

struct StreamOptions {
  bool add_noise = true;
  std::size_t label_margin_samples = 100;
};

struct StreamResult {
  Waveform stream;
  std::vector<LabeledSignal> signals;
};

// Homogeneous Poisson arrivals; events whose rendered supports overlap merge
// into one LabeledSignal. Event count per signal is capped at 4 (excess
// arrivals in a cluster are dropped from the stream).
StreamResult sample_stream(const SignalProfile& profile, double rate, double duration,
                           double fs, std::uint64_t seed, const StreamOptions& options = {});

// Same stream assembly with explicit first-peak arrival times; used by
// detection oracles that need events at known positions.
StreamResult inject_stream(const SignalProfile& profile, const std::vector<double>& arrivals,
                           double duration, double fs, std::uint64_t seed,
                           const StreamOptions& options = {});

}  // namespace codis::sim

#endif
