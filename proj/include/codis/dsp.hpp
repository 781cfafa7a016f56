#ifndef CODIS_DSP_HPP
#define CODIS_DSP_HPP

#include <cstddef>
#include <vector>

namespace codis {

// Local extremum of |x| (one signal lobe).
struct PeakInfo {
  std::size_t index = 0;
  double value = 0.0;       // signed sample value at the lobe apex
  double prominence = 0.0;  // topographic prominence on |x|
};

// Population standard deviation over the trailing window ending at each
// sample; output length = n - window + 1.
std::vector<double> moving_std(const std::vector<double>& x, std::size_t window);

// Strict sign changes between consecutive nonzero samples.
std::size_t count_zero_crossings(const std::vector<double>& x);

// All plateau-aware local maxima of |x| with their prominences, time-ordered.
std::vector<PeakInfo> find_lobes(const std::vector<double>& x);

// Lobes with prominence above the threshold, time-ordered.
std::vector<PeakInfo> prominent_lobes(const std::vector<double>& x, double min_prominence);

// Savitzky-Golay smoothing; polynomial edge handling (the filter value near
// the ends comes from a least-squares fit over the first/last window).
std::vector<double> savgol_filter(const std::vector<double>& x, std::size_t window,
                                  int polyorder);

// FIR Gaussian smoothing, reflected edges, kernel truncated at 4 sigma.
std::vector<double> gaussian_filter(const std::vector<double>& x, double sigma);

double mean(const std::vector<double>& x);
double population_std(const std::vector<double>& x);

}  // namespace codis

#endif
