#ifndef CODIS_BASELINE_HPP
#define CODIS_BASELINE_HPP

#include <array>
#include <optional>
#include <string>

#include "codis/props.hpp"
#include "codis/types.hpp"

namespace codis::baseline {

// Conventional single-event detector: accepts the first four alternating
// peaks above the amplitude cutoff with plausible spacing and ignores the
// rest of the signal.
struct StateMachineParams {
  double amplitude_threshold = 0.0;  // volts
  std::size_t min_peak_spacing = 0;  // samples
  std::size_t max_peak_spacing = 0;

  void validate() const;
};

StateMachineParams sm_params_for(const SignalProfile& profile, double fs = 10000.0);

// The four accepted peaks in time order, or nullopt when fewer than four
// qualifying peaks exist. Rejection is a value, not an error.
std::optional<std::array<props::PeakFeature, 4>> sm_detect(const Waveform& x,
                                                           const StateMachineParams& p);

props::PropertyRecord sm_properties(const Waveform& x,
                                    const std::array<props::PeakFeature, 4>& event,
                                    double gmr_distance_m, const props::Calibration& cal);

}  // namespace codis::baseline

#endif
