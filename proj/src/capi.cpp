#include "codis/codis.h"

#include <cstring>
#include <string>
#include <vector>

#include "codis/cs.hpp"
#include "codis/detect.hpp"
#include "codis/fcn.hpp"
#include "codis/io.hpp"
#include "codis/pipeline.hpp"
#include "codis/props.hpp"
#include "codis/sim.hpp"

namespace {

thread_local std::string g_last_error = "";

codis_status fail(codis_status code, const char* what) {
  g_last_error = what ? what : "unknown error";
  return code;
}

template <typename Fn>
codis_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const codis::ConfigError& e) {
    return fail(CODIS_ERROR_CONFIG, e.what());
  } catch (const codis::pipeline::BudgetError& e) {
    return fail(CODIS_ERROR_BUDGET, e.what());
  } catch (const codis::pipeline::DataError& e) {
    return fail(CODIS_ERROR_DATA, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(CODIS_ERROR_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(CODIS_ERROR, e.what());
  }
}

void copy_str(char* dst, size_t cap, const std::string& src) {
  if (!dst || cap == 0) return;
  const size_t n = std::min(cap - 1, src.size());
  std::memcpy(dst, src.data(), n);
  dst[n] = '\0';
}

codis::Waveform make_waveform(const double* x, int64_t n, double fs) {
  if (!x || n <= 0) throw std::invalid_argument("null or empty sample buffer");
  codis::Waveform w;
  w.sample_rate = fs;
  w.samples.assign(x, x + n);
  return w;
}

}  // namespace

struct codis_dataset {
  codis::io::DatasetMeta meta;
  std::vector<codis::LabeledSignal> signals;
};

struct codis_segments {
  std::vector<codis::detect::Segment> segments;
};

struct codis_model {
  codis::fcn::FcnModel model;
};

struct codis_components {
  codis::cs::Disentanglement d;
  double sample_rate = 0.0;
};

struct codis_calibration {
  codis::props::Calibration cal;
};

extern "C" {

const char* codis_version(void) { return "codis 1.0.0"; }

const char* codis_last_error(void) { return g_last_error.c_str(); }

int codis_profile_count(void) {
  return static_cast<int>(codis::sim::builtin_profiles().size());
}

static void fill_profile(const codis::SignalProfile& p, codis_profile_info* out) {
  copy_str(out->name, sizeof(out->name), p.name);
  out->amplitude_scale = p.amplitude_scale;
  out->noise_std = p.noise_std;
  out->event_duration_mean = p.event_duration_mean;
  out->event_duration_cv = p.event_duration_cv;
  out->velocity_mean = p.velocity_mean;
  out->velocity_cv = p.velocity_cv;
  out->true_diameter_mean = p.true_diameter_mean;
  out->true_diameter_cv = p.true_diameter_cv;
  out->drift_amplitude = p.drift_amplitude;
  out->jump_probability = p.jump_probability;
  out->sensing_distance = p.sensing_distance;
}

codis_status codis_profile_get_index(int index, codis_profile_info* out) {
  return guarded([&]() -> codis_status {
    if (!out) throw std::invalid_argument("null output");
    const auto profiles = codis::sim::builtin_profiles();
    if (index < 0 || static_cast<size_t>(index) >= profiles.size())
      throw std::invalid_argument("profile index out of range");
    fill_profile(profiles[static_cast<size_t>(index)], out);
    return CODIS_OK;
  });
}

codis_status codis_profile_get(const char* name, codis_profile_info* out) {
  return guarded([&]() -> codis_status {
    if (!name || !out) throw std::invalid_argument("null argument");
    fill_profile(codis::sim::profile_by_name(name), out);
    return CODIS_OK;
  });
}

codis_status codis_dataset_generate(const char* profile, uint64_t n_signals,
                                    const double class_mix[4], double sample_rate,
                                    uint64_t seed, int add_noise, codis_dataset** out) {
  return guarded([&]() -> codis_status {
    if (!profile || !out) throw std::invalid_argument("null argument");
    const auto prof = codis::sim::profile_by_name(profile);
    std::array<double, 4> mix{0.6, 0.25, 0.1, 0.05};
    if (class_mix)
      for (int i = 0; i < 4; ++i) mix[static_cast<size_t>(i)] = class_mix[i];
    codis::sim::DatasetOptions options;
    options.add_noise = add_noise != 0;
    auto ds = new codis_dataset;
    ds->signals = codis::sim::make_dataset(prof, n_signals, mix, sample_rate, seed, options);
    ds->meta.profile = prof.name;
    ds->meta.fs = sample_rate;
    ds->meta.seed = seed;
    ds->meta.sensing_distance = prof.sensing_distance;
    ds->meta.noise = options.add_noise;
    for (const auto& s : ds->signals)
      if (s.count >= 1 && s.count <= 4)
        ++ds->meta.class_hist[static_cast<size_t>(s.count - 1)];
    *out = ds;
    return CODIS_OK;
  });
}

codis_status codis_dataset_load(const char* dir, codis_dataset** out) {
  return guarded([&]() -> codis_status {
    if (!dir || !out) throw std::invalid_argument("null argument");
    auto ds = new codis_dataset;
    try {
      std::tie(ds->meta, ds->signals) = codis::io::load_dataset(dir);
    } catch (...) {
      delete ds;
      throw;
    }
    *out = ds;
    return CODIS_OK;
  });
}

codis_status codis_dataset_save(const codis_dataset* ds, const char* dir) {
  return guarded([&]() -> codis_status {
    if (!ds || !dir) throw std::invalid_argument("null argument");
    codis::io::save_dataset(dir, ds->meta, ds->signals);
    return CODIS_OK;
  });
}

int64_t codis_dataset_size(const codis_dataset* ds) {
  return ds ? static_cast<int64_t>(ds->signals.size()) : -1;
}

codis_status codis_dataset_signal(const codis_dataset* ds, int64_t index,
                                  const double** samples, int64_t* n_samples,
                                  double* sample_rate, int* event_count) {
  return guarded([&]() -> codis_status {
    if (!ds) throw std::invalid_argument("null dataset");
    if (index < 0 || static_cast<size_t>(index) >= ds->signals.size())
      throw std::invalid_argument("signal index out of range");
    const auto& s = ds->signals[static_cast<size_t>(index)];
    if (samples) *samples = s.waveform.samples.data();
    if (n_samples) *n_samples = static_cast<int64_t>(s.waveform.samples.size());
    if (sample_rate) *sample_rate = s.waveform.sample_rate;
    if (event_count) *event_count = s.count;
    return CODIS_OK;
  });
}

void codis_dataset_free(codis_dataset* ds) { delete ds; }

codis_status codis_detect(const double* samples, int64_t n, double sample_rate,
                          const char* profile, codis_segments** out) {
  return guarded([&]() -> codis_status {
    if (!out) throw std::invalid_argument("null output");
    const auto w = make_waveform(samples, n, sample_rate);
    codis::detect::DetectionParams params;
    if (profile && profile[0] != '\0') params = codis::detect::detection_params_for(profile);
    auto segs = new codis_segments;
    try {
      segs->segments = codis::detect::detect_events(w, params);
    } catch (...) {
      delete segs;
      throw;
    }
    *out = segs;
    return CODIS_OK;
  });
}

int64_t codis_segments_count(const codis_segments* segs) {
  return segs ? static_cast<int64_t>(segs->segments.size()) : -1;
}

codis_status codis_segments_info(const codis_segments* segs, int64_t index, int64_t* start,
                                 int64_t* length, int* accepted, char* reason,
                                 size_t reason_size) {
  return guarded([&]() -> codis_status {
    if (!segs) throw std::invalid_argument("null segments");
    if (index < 0 || static_cast<size_t>(index) >= segs->segments.size())
      throw std::invalid_argument("segment index out of range");
    const auto& s = segs->segments[static_cast<size_t>(index)];
    if (start) *start = static_cast<int64_t>(s.start);
    if (length) *length = static_cast<int64_t>(s.samples.samples.size());
    if (accepted) *accepted = s.accepted ? 1 : 0;
    if (reason) copy_str(reason, reason_size, s.reason);
    return CODIS_OK;
  });
}

void codis_segments_free(codis_segments* segs) { delete segs; }

codis_status codis_model_load(const char* path, codis_model** out) {
  return guarded([&]() -> codis_status {
    if (!path || !out) throw std::invalid_argument("null argument");
    auto m = new codis_model;
    try {
      m->model = codis::fcn::load_model(path);
    } catch (...) {
      delete m;
      throw;
    }
    *out = m;
    return CODIS_OK;
  });
}

codis_status codis_model_save(const codis_model* model, const char* path) {
  return guarded([&]() -> codis_status {
    if (!model || !path) throw std::invalid_argument("null argument");
    codis::fcn::save_model(path, model->model);
    return CODIS_OK;
  });
}

codis_status codis_model_predict(const codis_model* model, const double* x, int64_t n,
                                 double sample_rate, int refine_with_peaks, int* count) {
  return guarded([&]() -> codis_status {
    if (!model || !count) throw std::invalid_argument("null argument");
    const auto w = make_waveform(x, n, sample_rate);
    int c = codis::fcn::predict_count(model->model, w);
    if (refine_with_peaks) {
      const double noise = std::max(codis::pipeline::estimate_signal_noise(w), 1e-12);
      c = codis::fcn::refine(c, codis::detect::count_peaks(w.samples, noise, 3.0));
    }
    *count = c;
    return CODIS_OK;
  });
}

codis_status codis_model_forward(const codis_model* model, const double* x, int64_t n,
                                 double sample_rate, double probs[4]) {
  return guarded([&]() -> codis_status {
    if (!model || !probs) throw std::invalid_argument("null argument");
    const auto w = make_waveform(x, n, sample_rate);
    const Eigen::Vector4d p = codis::fcn::forward(model->model, w);
    for (int i = 0; i < 4; ++i) probs[i] = p(i);
    return CODIS_OK;
  });
}

codis_status codis_model_cam(const codis_model* model, const double* x, int64_t n,
                             double sample_rate, int class_label, double* cam) {
  return guarded([&]() -> codis_status {
    if (!model || !cam) throw std::invalid_argument("null argument");
    const auto w = make_waveform(x, n, sample_rate);
    const auto m = codis::fcn::class_activation_map(model->model, w, class_label);
    for (size_t i = 0; i < m.size(); ++i) cam[i] = m[i];
    return CODIS_OK;
  });
}

void codis_model_free(codis_model* model) { delete model; }

codis_status codis_disentangle(const double* x, int64_t n, double sample_rate, int count,
                               const char* profile, codis_components** out) {
  return guarded([&]() -> codis_status {
    if (!out) throw std::invalid_argument("null output");
    const auto w = make_waveform(x, n, sample_rate);
    codis::cs::CsConfig cfg;
    if (profile && profile[0] != '\0')
      cfg = codis::cs::cs_config_for(codis::sim::profile_by_name(profile), sample_rate);
    cfg.adam_epochs = 300;  // library default favors interactive latency
    auto comps = new codis_components;
    try {
      comps->d = codis::cs::disentangle(w, count, cfg);
      comps->sample_rate = sample_rate;
    } catch (...) {
      delete comps;
      throw;
    }
    *out = comps;
    return CODIS_OK;
  });
}

int codis_components_count(const codis_components* comps) {
  return comps ? static_cast<int>(comps->d.components.size()) : -1;
}

codis_status codis_components_params(const codis_components* comps, int index,
                                     double params[16]) {
  return guarded([&]() -> codis_status {
    if (!comps || !params) throw std::invalid_argument("null argument");
    if (index < 0 || static_cast<size_t>(index) >= comps->d.components.size())
      throw std::invalid_argument("component index out of range");
    const auto& c = comps->d.components[static_cast<size_t>(index)];
    for (int i = 0; i < 4; ++i) {
      params[i] = c.amplitude[static_cast<size_t>(i)];
      params[4 + i] = c.shape[static_cast<size_t>(i)];
      params[8 + i] = c.center[static_cast<size_t>(i)];
      params[12 + i] = c.width[static_cast<size_t>(i)];
    }
    return CODIS_OK;
  });
}

codis_status codis_components_waveform(const codis_components* comps, int index,
                                       const double** samples, int64_t* n) {
  return guarded([&]() -> codis_status {
    if (!comps) throw std::invalid_argument("null components");
    if (index < 0 || static_cast<size_t>(index) >= comps->d.rendered.size())
      throw std::invalid_argument("component index out of range");
    if (samples) *samples = comps->d.rendered[static_cast<size_t>(index)].data();
    if (n) *n = static_cast<int64_t>(comps->d.rendered[static_cast<size_t>(index)].size());
    return CODIS_OK;
  });
}

codis_status codis_components_fidelity(const codis_components* comps, const double* raw,
                                       int64_t n, double* cross_correlation,
                                       double* integral_deviation,
                                       double* amplitude_deviation) {
  return guarded([&]() -> codis_status {
    if (!comps) throw std::invalid_argument("null components");
    const auto w = make_waveform(raw, n, comps->sample_rate);
    const auto f = codis::cs::fidelity(w, comps->d);
    if (cross_correlation) *cross_correlation = f.cross_correlation;
    if (integral_deviation) *integral_deviation = f.integral_deviation;
    if (amplitude_deviation) *amplitude_deviation = f.amplitude_deviation;
    return CODIS_OK;
  });
}

int codis_components_converged(const codis_components* comps) {
  return comps && comps->d.converged ? 1 : 0;
}

void codis_components_free(codis_components* comps) { delete comps; }

codis_status codis_calibration_fit(const double* integrals, const double* diameters, int64_t n,
                                   codis_calibration** out) {
  return guarded([&]() -> codis_status {
    if (!integrals || !diameters || !out) throw std::invalid_argument("null argument");
    std::vector<std::pair<double, double>> pts;
    pts.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) pts.emplace_back(integrals[i], diameters[i]);
    auto cal = new codis_calibration;
    try {
      cal->cal = codis::props::fit_calibration(pts);
    } catch (...) {
      delete cal;
      throw;
    }
    *out = cal;
    return CODIS_OK;
  });
}

codis_status codis_calibration_eval(const codis_calibration* cal, double integral,
                                    double* diameter_um, int* in_range) {
  return guarded([&]() -> codis_status {
    if (!cal || !diameter_um) throw std::invalid_argument("null argument");
    bool inside = false;
    *diameter_um = codis::props::diameter(integral, cal->cal, &inside);
    if (in_range) *in_range = inside ? 1 : 0;
    return CODIS_OK;
  });
}

void codis_calibration_free(codis_calibration* cal) { delete cal; }

codis_status codis_event_velocity(const double times[4], double gmr_distance_m,
                                  double* velocity_mm_s) {
  return guarded([&]() -> codis_status {
    if (!times || !velocity_mm_s) throw std::invalid_argument("null argument");
    std::array<codis::props::PeakFeature, 4> peaks;
    for (int i = 0; i < 4; ++i) peaks[static_cast<size_t>(i)] = {times[i], 1.0};
    *velocity_mm_s = codis::props::velocity(peaks, gmr_distance_m);
    return CODIS_OK;
  });
}

codis_status codis_concentration(double total_events, double flow_rate_ul_min,
                                 double duration_s, double* events_per_ul) {
  return guarded([&]() -> codis_status {
    if (!events_per_ul) throw std::invalid_argument("null output");
    *events_per_ul = codis::props::concentration(total_events, flow_rate_ul_min, duration_s);
    return CODIS_OK;
  });
}

codis_status codis_run(const char* subcommand, const codis_run_options* options) {
  if (!subcommand || !options || !options->output_dir)
    return fail(CODIS_ERROR_INVALID_ARGUMENT, "subcommand and output_dir are required");
  codis::pipeline::RunOptions opts;
  opts.config_path = options->config_path ? options->config_path : "";
  opts.out_dir = options->output_dir;
  opts.has_seed = options->has_seed != 0;
  opts.seed = options->seed;
  opts.workers = options->workers;
  return guarded([&]() -> codis_status {
    codis::pipeline::run_command(subcommand, opts);
    return CODIS_OK;
  });
}

}  // extern "C"
