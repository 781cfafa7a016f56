#include "codis/baseline.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "codis/dsp.hpp"

namespace codis::baseline {

void StateMachineParams::validate() const {
  if (!(amplitude_threshold > 0.0))
    throw std::invalid_argument("sm: amplitude_threshold must be > 0");
  if (!(min_peak_spacing < max_peak_spacing))
    throw std::invalid_argument("sm: min_peak_spacing must be < max_peak_spacing");
}

StateMachineParams sm_params_for(const SignalProfile& profile, double fs) {
  StateMachineParams p;
  if (profile.name == "cd4") {
    p.amplitude_threshold = 3.0e-6;
  } else if (profile.name == "cd14") {
    p.amplitude_threshold = 4.2e-6;
  } else {
    p.amplitude_threshold = 4.0 * profile.noise_std;
  }
  // spacing window sized from the profile's nominal antipodal spacing; the
  // upper bound has to admit the mid-event gap as well
  const double nominal_samples = profile.sensing_distance / (profile.velocity_mean * 1e-3) * fs;
  p.min_peak_spacing = static_cast<std::size_t>(std::max(2.0, 0.4 * nominal_samples));
  p.max_peak_spacing = static_cast<std::size_t>(4.5 * nominal_samples);
  return p;
}

std::optional<std::array<props::PeakFeature, 4>> sm_detect(const Waveform& x,
                                                           const StateMachineParams& p) {
  p.validate();
  const auto lobes = find_lobes(x.samples);
  std::vector<PeakInfo> qualifying;
  for (const auto& l : lobes) {
    if (std::abs(l.value) >= p.amplitude_threshold && l.prominence >= 0.5 * p.amplitude_threshold)
      qualifying.push_back(l);
  }

  std::vector<PeakInfo> chain;
  for (const auto& peak : qualifying) {
    if (chain.empty()) {
      chain.push_back(peak);
      continue;
    }
    const auto& last = chain.back();
    const std::size_t spacing = peak.index - last.index;
    const bool alternates = peak.value * last.value < 0.0;
    if (spacing < p.min_peak_spacing) continue;  // too close: ignore this peak
    if (!alternates || spacing > p.max_peak_spacing) {
      chain.clear();  // restart the chain here
      chain.push_back(peak);
      continue;
    }
    chain.push_back(peak);
    if (chain.size() == 4) break;
  }
  if (chain.size() < 4) return std::nullopt;

  std::array<props::PeakFeature, 4> out;
  for (int i = 0; i < 4; ++i)
    out[i] = {static_cast<double>(chain[static_cast<std::size_t>(i)].index) / x.sample_rate,
              chain[static_cast<std::size_t>(i)].value};
  return out;
}

props::PropertyRecord sm_properties(const Waveform& x,
                                    const std::array<props::PeakFeature, 4>& event,
                                    double gmr_distance_m, const props::Calibration& cal) {
  props::PropertyRecord rec;
  rec.velocity = props::velocity(event, gmr_distance_m);
  rec.diameter = props::diameter(props::normalized_integral(x, event), cal);
  rec.mean_amplitude = props::mean_amplitude(event);
  rec.coincidence_level = 1;  // the state machine assumes single events
  rec.origin = props::Origin::kStateMachine;
  return rec;
}

}  // namespace codis::baseline
