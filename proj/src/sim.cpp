#include "codis/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "codis/rng.hpp"
#include "codis/template_model.hpp"

namespace codis::sim {

namespace {

constexpr double kMicro = 1e-6;

SignalProfile base_profile() {
  SignalProfile p;
  p.velocity_cv = 0.10;
  p.event_duration_cv = 0.05;
  p.amplitude_cv = 0.15;
  p.alpha_range = 0.3;
  p.sensing_distance = 2.45e-3;
  p.width_per_um = 80e-6;
  return p;
}

double clamp_rel(double z) { return std::clamp(z, -3.0, 3.0); }

// Per-event geometry: antipodal pair spacing from velocity, peak width from
// diameter, mid gap from the drawn support duration.
struct EventGeometry {
  double pair_spacing;  // seconds
  double sigma;         // seconds
  double gap;           // seconds
};

EventGeometry geometry_for(const SignalProfile& p, double velocity_mm_s, double diameter_um,
                           double duration_s, double fs) {
  EventGeometry g;
  g.pair_spacing = p.sensing_distance / (velocity_mm_s * 1e-3);
  g.sigma = p.width_per_um * diameter_um;
  const double floor_gap = std::max(0.25 * g.pair_spacing, 8.5 / fs);
  g.gap = std::max(duration_s - 2.0 * g.pair_spacing - 8.0 * g.sigma, floor_gap);
  return g;
}

void check_resolvable(const EventGeometry& g, double fs) {
  if (g.pair_spacing * fs < 8.0 || g.gap * fs < 8.0)
    throw std::invalid_argument(
        "sample rate too low: fewer than 8 samples between adjacent peak centers");
}

// Snaps the window to the sample grid and renders all events plus the
// profile's artifacts into one labeled signal.
LabeledSignal assemble_signal(const SignalProfile& profile,
                              std::vector<EventGroundTruth> events, double fs,
                              std::size_t margin_samples, bool add_noise,
                              std::uint64_t noise_seed) {
  double lo = events.front().tmpl.center[0];
  double hi = lo;
  for (const auto& e : events) {
    const auto [a, b] = event_support(e);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  const double margin = static_cast<double>(margin_samples) / fs;
  const double window_start = std::floor((lo - margin) * fs) / fs;
  const std::size_t n = static_cast<std::size_t>(std::ceil((hi + margin - window_start) * fs));

  LabeledSignal sig;
  sig.profile_name = profile.name;
  sig.window_start = window_start;
  sig.count = static_cast<int>(events.size());
  sig.waveform.sample_rate = fs;
  sig.waveform.samples.assign(n, 0.0);
  for (const auto& e : events) add_template(e.tmpl, window_start, fs, sig.waveform.samples);
  sig.events = std::move(events);

  Rng rng(noise_seed);
  if (profile.drift_amplitude > 0.0) {
    const double amp = profile.drift_amplitude * rng.uniform(0.5, 1.0);
    const double period = rng.uniform(2.0, 5.0);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / fs;
      sig.waveform.samples[k] += amp * std::sin(6.283185307179586 * t / period + phase);
    }
  }
  if (profile.jump_probability > 0.0 && rng.uniform() < profile.jump_probability) {
    const std::size_t at = static_cast<std::size_t>(rng.uniform(0.1, 0.9) * static_cast<double>(n));
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double height = side * rng.uniform(4.0, 8.0) * profile.noise_std;
    for (std::size_t k = at; k < n; ++k) sig.waveform.samples[k] += height;
  }
  if (add_noise && profile.noise_std > 0.0) {
    for (std::size_t k = 0; k < n; ++k)
      sig.waveform.samples[k] += rng.normal(0.0, profile.noise_std);
  }
  return sig;
}

// Exact per-class counts via largest-remainder rounding.
std::array<std::size_t, 4> stratified_counts(std::size_t n, const std::array<double, 4>& mix) {
  double total = 0.0;
  for (double p : mix) {
    if (p < 0.0) throw std::invalid_argument("class mix entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("class mix must sum to 1");

  std::array<std::size_t, 4> counts{};
  std::array<double, 4> frac{};
  std::size_t assigned = 0;
  for (int k = 0; k < 4; ++k) {
    const double exact = static_cast<double>(n) * mix[k];
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < n) {
    int best = 0;
    for (int k = 1; k < 4; ++k)
      if (frac[k] > frac[best] + 1e-12) best = k;
    ++counts[best];
    frac[best] = -1.0;
    ++assigned;
  }
  return counts;
}

}  // namespace

std::vector<SignalProfile> builtin_profiles() {
  std::vector<SignalProfile> out;

  {
    SignalProfile p = base_profile();
    p.name = "12um";
    p.amplitude_scale = 9.9 * kMicro;
    p.noise_std = p.amplitude_scale / 16.0;
    p.velocity_mean = 740.0;
    p.true_diameter_mean = 12.0;
    p.true_diameter_cv = 0.04;
    p.event_duration_mean = 22.6e-3;
    out.push_back(p);
  }
  {
    SignalProfile p = base_profile();
    p.name = "8um100";
    p.amplitude_scale = 10.9 * kMicro;
    p.noise_std = p.amplitude_scale / 30.0;
    p.amplitude_cv = 0.12;
    p.velocity_mean = 467.0;
    p.true_diameter_mean = 8.7;
    p.true_diameter_cv = 0.05;
    p.event_duration_mean = 24.0e-3;
    out.push_back(p);
  }
  {
    SignalProfile p = base_profile();
    p.name = "8um53";
    p.amplitude_scale = 9.9 * kMicro;
    p.noise_std = p.amplitude_scale / 22.0;
    p.amplitude_cv = 0.20;
    p.velocity_mean = 445.0;
    p.true_diameter_mean = 9.1;
    p.true_diameter_cv = 0.05;
    p.event_duration_mean = 25.1e-3;
    out.push_back(p);
  }
  {
    SignalProfile p = base_profile();
    p.name = "8um16";
    p.amplitude_scale = 9.4 * kMicro;
    p.noise_std = p.amplitude_scale / 10.0;
    p.amplitude_cv = 0.25;
    p.velocity_mean = 424.0;
    p.true_diameter_mean = 9.0;
    p.true_diameter_cv = 0.06;
    p.event_duration_mean = 26.0e-3;
    out.push_back(p);
  }
  {
    SignalProfile p = base_profile();
    p.name = "cd4";
    p.amplitude_scale = 6.0 * kMicro;
    p.noise_std = 0.75 * kMicro;
    p.amplitude_cv = 0.25;
    p.velocity_mean = 260.0;
    p.velocity_cv = 0.15;
    p.true_diameter_mean = 11.0;
    p.true_diameter_cv = 0.12;
    p.event_duration_mean = 56.5e-3;
    p.event_duration_cv = 0.08;
    p.drift_amplitude = 1.5 * kMicro;
    p.jump_probability = 0.05;
    p.sensing_distance = 3.15e-3;
    p.width_per_um = 160e-6;
    out.push_back(p);
  }
  {
    SignalProfile p = base_profile();
    p.name = "cd14";
    p.amplitude_scale = 8.4 * kMicro;
    p.noise_std = 0.6 * kMicro;
    p.amplitude_cv = 0.20;
    p.velocity_mean = 140.0;
    p.velocity_cv = 0.15;
    p.true_diameter_mean = 13.1;
    p.true_diameter_cv = 0.10;
    p.event_duration_mean = 91.2e-3;
    p.event_duration_cv = 0.08;
    p.drift_amplitude = 1.2 * kMicro;
    p.jump_probability = 0.05;
    p.sensing_distance = 2.8e-3;
    p.width_per_um = 240e-6;
    out.push_back(p);
  }

  for (const auto& p : out) p.validate();
  return out;
}

SignalProfile profile_by_name(const std::string& name) {
  for (auto& p : builtin_profiles())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown profile: " + name);
}

Waveform render_event(const EventGroundTruth& gt, double fs, std::size_t n) {
  if (!(fs > 0.0)) throw std::invalid_argument("render_event: fs must be > 0");
  gt.tmpl.validate();
  const double span = static_cast<double>(n) / fs;
  for (double c : gt.tmpl.center) {
    if (c < 0.0 || c > span)
      throw std::invalid_argument("render_event: template centers outside [0, n/fs]");
  }
  Waveform w;
  w.sample_rate = fs;
  w.samples.assign(n, 0.0);
  add_template(gt.tmpl, 0.0, fs, w.samples);
  return w;
}

EventGroundTruth draw_event(const SignalProfile& profile, double fs, double t_first_peak,
                            std::uint64_t seed) {
  Rng rng(seed);
  EventGroundTruth gt;
  gt.velocity = profile.velocity_mean * (1.0 + profile.velocity_cv * clamp_rel(rng.normal()));
  gt.velocity = std::max(gt.velocity, 0.2 * profile.velocity_mean);
  gt.diameter =
      profile.true_diameter_mean * (1.0 + profile.true_diameter_cv * clamp_rel(rng.normal()));
  gt.diameter = std::max(gt.diameter, 0.3 * profile.true_diameter_mean);
  const double duration =
      profile.event_duration_mean * (1.0 + profile.event_duration_cv * clamp_rel(rng.normal()));

  const EventGeometry g = geometry_for(profile, gt.velocity, gt.diameter, duration, fs);
  check_resolvable(g, fs);

  const double event_amp = profile.amplitude_scale * std::exp(profile.amplitude_cv * rng.normal());
  std::array<double, 4> jitter{};
  double jitter_mean = 0.0;
  for (int i = 0; i < 4; ++i) {
    jitter[i] = std::clamp(1.0 + 0.12 * rng.normal(), 0.7, 1.3);
    jitter_mean += jitter[i];
  }
  jitter_mean /= 4.0;

  gt.arrival_time = t_first_peak;
  gt.tmpl.center = {t_first_peak, t_first_peak + g.pair_spacing,
                    t_first_peak + g.pair_spacing + g.gap,
                    t_first_peak + 2.0 * g.pair_spacing + g.gap};
  for (int i = 0; i < 4; ++i) {
    gt.tmpl.amplitude[i] =
        static_cast<double>(profile.signs[i]) * event_amp * jitter[i] / jitter_mean;
    gt.tmpl.shape[i] = rng.uniform(-profile.alpha_range, profile.alpha_range);
    gt.tmpl.width[i] = g.sigma;
    gt.peak_amplitudes[i] = gt.tmpl.amplitude[i];
  }
  gt.tmpl.validate();
  return gt;
}

std::pair<double, double> event_support(const EventGroundTruth& gt) {
  return template_support(gt.tmpl);
}

std::vector<LabeledSignal> make_dataset(const SignalProfile& profile, std::size_t n_signals,
                                        const std::array<double, 4>& class_mix, double fs,
                                        std::uint64_t seed, const DatasetOptions& options) {
  profile.validate();
  const auto counts = stratified_counts(n_signals, class_mix);

  // proportional interleave of the exact class counts
  std::vector<int> schedule;
  schedule.reserve(n_signals);
  std::array<double, 4> acc{};
  std::array<std::size_t, 4> left = counts;
  for (std::size_t i = 0; i < n_signals; ++i) {
    for (int k = 0; k < 4; ++k)
      acc[k] += static_cast<double>(counts[k]) / static_cast<double>(n_signals);
    int best = -1;
    for (int k = 0; k < 4; ++k) {
      if (left[k] == 0) continue;
      if (best < 0 || acc[k] > acc[best]) best = k;
    }
    schedule.push_back(best + 1);
    acc[best] -= 1.0;
    --left[best];
  }

  std::vector<LabeledSignal> out;
  out.reserve(n_signals);
  std::uint64_t event_counter = 0;
  for (std::size_t i = 0; i < n_signals; ++i) {
    const int k = schedule[i];
    Rng offsets(mix_seed(seed, 0x0FF5E700ULL + i));
    std::vector<EventGroundTruth> events;
    double t = 0.1;  // arbitrary origin; windows are relative anyway
    for (int j = 0; j < k; ++j) {
      EventGroundTruth e = draw_event(profile, fs, t, mix_seed(seed, ++event_counter));
      const auto [lo, hi] = event_support(e);
      t = e.arrival_time +
          offsets.uniform(options.offset_min_frac, options.offset_max_frac) * (hi - lo);
      events.push_back(std::move(e));
    }
    std::sort(events.begin(), events.end(),
              [](const EventGroundTruth& a, const EventGroundTruth& b) {
                return a.arrival_time < b.arrival_time;
              });
    out.push_back(assemble_signal(profile, std::move(events), fs, options.margin_samples,
                                  options.add_noise, mix_seed(seed, 0xA0150000ULL + i)));
  }
  return out;
}

StreamResult inject_stream(const SignalProfile& profile, const std::vector<double>& arrivals,
                           double duration, double fs, std::uint64_t seed,
                           const StreamOptions& options) {
  profile.validate();
  const std::size_t n = static_cast<std::size_t>(std::llround(duration * fs));
  StreamResult res;
  res.stream.sample_rate = fs;
  res.stream.samples.assign(n, 0.0);

  std::vector<EventGroundTruth> events;
  events.reserve(arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i)
    events.push_back(draw_event(profile, fs, arrivals[i], mix_seed(seed, i + 1)));
  std::sort(events.begin(), events.end(),
            [](const EventGroundTruth& a, const EventGroundTruth& b) {
              return a.arrival_time < b.arrival_time;
            });

  // cluster by support overlap; clusters are capped at 4 events
  std::vector<std::vector<EventGroundTruth>> clusters;
  double cluster_hi = -1e300;
  for (auto& e : events) {
    const auto [lo, hi] = event_support(e);
    if (clusters.empty() || lo > cluster_hi) {
      clusters.emplace_back();
      cluster_hi = hi;
    } else {
      cluster_hi = std::max(cluster_hi, hi);
    }
    if (clusters.back().size() >= 4) continue;  // drop excess arrivals
    clusters.back().push_back(std::move(e));
  }

  for (const auto& c : clusters)
    for (const auto& e : c) add_template(e.tmpl, 0.0, fs, res.stream.samples);

  Rng artifact_rng(mix_seed(seed, 0xD21F7ULL));
  if (profile.drift_amplitude > 0.0) {
    const double amp = profile.drift_amplitude * artifact_rng.uniform(0.5, 1.0);
    const double period = artifact_rng.uniform(2.0, 5.0);
    const double phase = artifact_rng.uniform(0.0, 6.283185307179586);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / fs;
      res.stream.samples[k] += amp * std::sin(6.283185307179586 * t / period + phase);
    }
  }
  if (profile.jump_probability > 0.0) {
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (artifact_rng.uniform() >= profile.jump_probability) continue;
      const auto [lo, hi] = event_support(clusters[c].front());
      const std::size_t at = static_cast<std::size_t>(
          std::clamp(artifact_rng.uniform(lo, hi) * fs, 0.0, static_cast<double>(n - 1)));
      const double side = artifact_rng.uniform() < 0.5 ? -1.0 : 1.0;
      const double height = side * artifact_rng.uniform(4.0, 8.0) * profile.noise_std;
      for (std::size_t k = at; k < n; ++k) res.stream.samples[k] += height;
    }
  }
  if (options.add_noise && profile.noise_std > 0.0) {
    Rng noise_rng(mix_seed(seed, 0x4015EULL));
    for (std::size_t k = 0; k < n; ++k)
      res.stream.samples[k] += noise_rng.normal(0.0, profile.noise_std);
  }

  // labels crop the finished stream so every artifact lands in the window
  const double margin = static_cast<double>(options.label_margin_samples) / fs;
  for (const auto& c : clusters) {
    double lo = 1e300, hi = -1e300;
    for (const auto& e : c) {
      const auto [a, b] = event_support(e);
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
    long k0 = static_cast<long>(std::floor((lo - margin) * fs));
    long k1 = static_cast<long>(std::ceil((hi + margin) * fs));
    k0 = std::max(k0, 0L);
    k1 = std::min(k1, static_cast<long>(n) - 1);
    LabeledSignal sig;
    sig.profile_name = profile.name;
    sig.window_start = static_cast<double>(k0) / fs;
    sig.count = static_cast<int>(c.size());
    sig.events = c;
    sig.waveform.sample_rate = fs;
    sig.waveform.samples.assign(res.stream.samples.begin() + k0,
                                res.stream.samples.begin() + k1 + 1);
    res.signals.push_back(std::move(sig));
  }
  return res;
}

StreamResult sample_stream(const SignalProfile& profile, double rate, double duration,
                           double fs, std::uint64_t seed, const StreamOptions& options) {
  if (!(rate > 0.0)) throw std::invalid_argument("sample_stream: rate must be > 0");
  if (duration * rate < 1.0)
    throw std::invalid_argument("sample_stream: expected event count below 1");
  const double margin = 1.5 * profile.event_duration_mean + 0.05;
  if (duration <= 2.0 * margin)
    throw std::invalid_argument("sample_stream: duration too short for event margins");

  Rng rng(mix_seed(seed, 0xA221AAULL));
  std::vector<double> arrivals;
  double t = margin;
  while (true) {
    t += rng.exponential(rate);
    if (t > duration - margin) break;
    arrivals.push_back(t);
  }
  return inject_stream(profile, arrivals, duration, fs, seed, options);
}

}  // namespace codis::sim
