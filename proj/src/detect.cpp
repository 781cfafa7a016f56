#include "codis/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "codis/dsp.hpp"

namespace codis::detect {

void DetectionParams::validate() const {
  if (!(min_length < max_length)) throw std::invalid_argument("min_length must be < max_length");
  if (!(min_amp < max_amp)) throw std::invalid_argument("min_amp must be < max_amp");
  if (!(std_thr_mult > 0.0)) throw std::invalid_argument("std_thr_mult must be > 0");
  if (std_thrcalc_step > std_thrcalc_interval)
    throw std::invalid_argument("std_thrcalc_step must be <= std_thrcalc_interval");
  if (std_interval < 2) throw std::invalid_argument("std_intervall must be >= 2");
}

DetectionParams detection_params_for(const std::string& name) {
  DetectionParams p;
  if (name == "12um") {
    p.std_thr_mult = 5;
    p.min_amp = 1.836e-6;
    p.max_amp = 1836e-6;
  } else if (name == "8um100") {
    p.std_thr_mult = 5;
    p.min_amp = 1.649e-6;
    p.max_amp = 1649e-6;
  } else if (name == "8um53" || name == "8um16") {
    p.std_thr_mult = 2;
    p.min_amp = 0.542e-6;
    p.max_amp = 542e-6;
  } else if (name == "cd4") {
    p.std_thr_mult = 3;
    p.buffer = 150;
    p.min_length = 600;
    p.min_amp = 1.402e-6;
    p.max_amp = 1402e-6;
    p.jump_goodwill = 0.4;
    p.min_zero_cross = 3;
  } else if (name == "cd14") {
    p.std_thr_mult = 2;
    p.buffer = 300;
    p.min_length = 1400;
    p.min_amp = 0.020e-6;
    p.max_amp = 20e-6;
    p.jump_goodwill = 0.4;
    p.min_zero_cross = 3;
  } else {
    throw std::invalid_argument("no detection parameters for profile: " + name);
  }
  return p;
}

std::vector<double> moving_std(const Waveform& x, std::size_t window) {
  return codis::moving_std(x.samples, window);
}

double estimate_base_noise(const std::vector<double>& mstd, std::size_t interval,
                           std::size_t step) {
  if (mstd.size() < interval || interval == 0)
    throw std::invalid_argument("estimate_base_noise: input shorter than interval");
  if (step == 0) throw std::invalid_argument("estimate_base_noise: step must be >= 1");
  double best = 1e300;
  for (std::size_t j = 0; j + interval <= mstd.size(); j += step) {
    double s = 0.0;
    for (std::size_t k = j; k < j + interval; ++k) s += mstd[k];
    best = std::min(best, s / static_cast<double>(interval));
  }
  return best;
}

std::size_t count_peaks(const std::vector<double>& x, double noise, double mult) {
  if (!(noise > 0.0)) throw std::invalid_argument("count_peaks: noise must be > 0");
  return prominent_lobes(x, mult * noise).size();
}

std::string quality_filter(const Segment& seg, const DetectionParams& p) {
  const auto& x = seg.samples.samples;
  if (x.empty()) throw std::invalid_argument("quality_filter: empty segment");

  if (x.size() < p.min_length || x.size() > p.max_length) return "length";

  // median-referenced crossings so a baseline offset does not hide them
  std::vector<double> centered = x;
  {
    std::vector<double> tmp = x;
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    const double med = tmp[tmp.size() / 2];
    for (auto& v : centered) v -= med;
  }
  if (count_zero_crossings(centered) < p.min_zero_cross) return "zero crossings";

  double peak_mstd = 0.0;
  if (x.size() >= p.std_interval) {
    const auto mstd = codis::moving_std(x, p.std_interval);
    peak_mstd = *std::max_element(mstd.begin(), mstd.end());
  } else {
    peak_mstd = population_std(x);
  }
  if (peak_mstd * p.scaling < p.min_amp * p.scaling ||
      peak_mstd * p.scaling > p.max_amp * p.scaling)
    return "moving std";

  const std::size_t m = std::max<std::size_t>(1, std::min(p.buffer, x.size() / 4));
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    head += x[i];
    tail += x[x.size() - 1 - i];
  }
  head /= static_cast<double>(m);
  tail /= static_cast<double>(m);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double p2p = *hi - *lo;
  if (p2p > 0.0 && std::abs(tail - head) / p2p > p.jump_goodwill) return "bias jump";

  const double noise = seg.noise_estimate > 0.0 ? seg.noise_estimate : population_std(centered);
  if (count_peaks(x, noise, p.peak_prominence_mult) < p.min_peaks) return "peaks";

  return {};
}

std::vector<Segment> detect_events(const Waveform& stream, const DetectionParams& p) {
  p.validate();
  const std::size_t n = stream.samples.size();
  if (n < p.std_interval + 2) throw std::invalid_argument("detect_events: stream too short");

  const auto mstd = codis::moving_std(stream.samples, p.std_interval);
  double base;
  if (mstd.size() >= p.std_thrcalc_interval) {
    base = estimate_base_noise(mstd, p.std_thrcalc_interval, p.std_thrcalc_step);
  } else {
    // short input (e.g. re-detection on a cropped segment): quietest single window
    base = *std::min_element(mstd.begin(), mstd.end());
  }
  const double threshold = base * p.std_thr_mult;
  const std::size_t offset = p.std_interval - 1;

  // threshold crossings in mstd index space -> sample spans with buffer
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  bool open = false;
  std::size_t j0 = 0;
  for (std::size_t j = 0; j <= mstd.size(); ++j) {
    const bool above = j < mstd.size() && mstd[j] > threshold;
    if (above && !open) {
      open = true;
      j0 = j;
    } else if (!above && open) {
      open = false;
      const std::size_t s = j0 > p.buffer ? j0 - p.buffer : 0;
      const std::size_t e = std::min(n - 1, (j - 1) + offset + p.buffer);
      if (!spans.empty() && s <= spans.back().second + 1) {
        spans.back().second = std::max(spans.back().second, e);
      } else {
        spans.emplace_back(s, e);
      }
    }
  }

  std::vector<Segment> out;
  out.reserve(spans.size());
  for (const auto& [s, e] : spans) {
    Segment seg;
    seg.start = s;
    seg.noise_estimate = base;
    seg.samples.sample_rate = stream.sample_rate;
    seg.samples.samples.assign(stream.samples.begin() + static_cast<long>(s),
                               stream.samples.begin() + static_cast<long>(e) + 1);
    seg.reason = quality_filter(seg, p);
    seg.accepted = seg.reason.empty();
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace codis::detect
