#include "codis/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "codis/baseline.hpp"
#include "codis/cs.hpp"
#include "codis/detect.hpp"
#include "codis/dsp.hpp"
#include "codis/io.hpp"
#include "codis/parallel.hpp"
#include "codis/report.hpp"
#include "codis/rng.hpp"
#include "codis/sim.hpp"
#include "codis/svg.hpp"

namespace codis::pipeline {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory: " + dir);
}

void dump_effective_config(const Config& cfg, const std::string& out_dir) {
  std::ofstream os(out_dir + "/effective_config.ini", std::ios::trunc);
  if (!os) throw DataError("cannot write effective config");
  os << cfg.dump();
}

std::pair<io::DatasetMeta, std::vector<LabeledSignal>> load_dataset_checked(
    const std::string& dir) {
  try {
    return io::load_dataset(dir);
  } catch (const std::exception& e) {
    throw DataError("cannot load dataset '" + dir + "': " + e.what());
  }
}

std::string stem_of(const std::string& path) {
  fs::path p(path);
  if (p.has_filename() && p.filename() != ".") return p.stem().string();
  return p.parent_path().filename().string();
}

void smooth_in_place(std::vector<LabeledSignal>& signals, double sigma, int workers) {
  parallel_for(signals.size(), workers, [&](std::size_t i) {
    signals[i].waveform.samples = gaussian_filter(signals[i].waveform.samples, sigma);
  });
}

std::array<double, 4> parse_mix(const Config& cfg, const std::string& section) {
  std::array<double, 4> mix{0.6, 0.25, 0.1, 0.05};
  if (cfg.has(section, "class_mix")) {
    const auto v = cfg.get_list(section, "class_mix");
    if (v.size() != 4) throw ConfigError("class_mix needs 4 entries (counts 1..4)");
    std::copy(v.begin(), v.end(), mix.begin());
  }
  return mix;
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(Config& cfg, const RunOptions& opts) {
  cfg.require_known("simulate",
                    {"profile", "mode", "n_signals", "class_mix", "fs", "seed", "noise",
                     "offset_min_frac", "offset_max_frac", "margin_samples", "rate", "duration"});
  const std::string profile_name = cfg.get("simulate", "profile");
  SignalProfile profile;
  try {
    profile = sim::profile_by_name(profile_name);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const double fs = cfg.get_double("simulate", "fs", 10000.0);
  const std::uint64_t seed = cfg.get_seed("simulate", 1);
  const std::string mode = cfg.get("simulate", "mode", "dataset");
  const bool noise = cfg.get_bool("simulate", "noise", true);

  io::DatasetMeta meta;
  meta.profile = profile_name;
  meta.fs = fs;
  meta.seed = seed;
  meta.sensing_distance = profile.sensing_distance;
  meta.noise = noise;

  if (mode == "dataset") {
    const auto n = static_cast<std::size_t>(cfg.get_int("simulate", "n_signals", 1000));
    const auto mix = parse_mix(cfg, "simulate");
    sim::DatasetOptions options;
    options.add_noise = noise;
    options.offset_min_frac = cfg.get_double("simulate", "offset_min_frac", 0.05);
    options.offset_max_frac = cfg.get_double("simulate", "offset_max_frac", 0.95);
    options.margin_samples =
        static_cast<std::size_t>(cfg.get_int("simulate", "margin_samples", 100));
    const auto signals = sim::make_dataset(profile, n, mix, fs, seed, options);
    for (const auto& s : signals) ++meta.class_hist[static_cast<std::size_t>(s.count - 1)];
    io::save_dataset(opts.out_dir + "/dataset", meta, signals);
  } else if (mode == "stream") {
    const double rate = cfg.get_double("simulate", "rate");
    const double duration = cfg.get_double("simulate", "duration");
    sim::StreamOptions options;
    options.add_noise = noise;
    const auto res = sim::sample_stream(profile, rate, duration, fs, seed, options);
    io::save_stream(opts.out_dir + "/stream.bin", res.stream);
    for (const auto& s : res.signals) {
      if (s.count >= 1 && s.count <= 4) ++meta.class_hist[static_cast<std::size_t>(s.count - 1)];
    }
    io::save_dataset(opts.out_dir + "/labels", meta, res.signals);
  } else {
    throw ConfigError("simulate mode must be 'dataset' or 'stream'");
  }
  dump_effective_config(cfg, opts.out_dir);
}

// ------------------------------------------------------------------ detect

detect::DetectionParams detect_params_from_config(const Config& cfg,
                                                  const std::string& section,
                                                  const std::string& profile_name) {
  detect::DetectionParams p;
  if (!profile_name.empty()) {
    try {
      p = detect::detection_params_for(profile_name);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  p.scaling = cfg.get_double(section, "scaling", p.scaling);
  p.std_interval =
      static_cast<std::size_t>(cfg.get_int(section, "std_intervall", static_cast<long>(p.std_interval)));
  p.std_thrcalc_interval = static_cast<std::size_t>(
      cfg.get_int(section, "std_thrcalc_intervall", static_cast<long>(p.std_thrcalc_interval)));
  p.std_thrcalc_step = static_cast<std::size_t>(
      cfg.get_int(section, "std_thrcalc_step", static_cast<long>(p.std_thrcalc_step)));
  p.std_thr_mult = cfg.get_double(section, "std_thr_mult", p.std_thr_mult);
  p.buffer = static_cast<std::size_t>(cfg.get_int(section, "buffer", static_cast<long>(p.buffer)));
  p.min_length =
      static_cast<std::size_t>(cfg.get_int(section, "min_length", static_cast<long>(p.min_length)));
  p.max_length =
      static_cast<std::size_t>(cfg.get_int(section, "max_length", static_cast<long>(p.max_length)));
  p.min_amp = cfg.get_double(section, "min_amp", p.min_amp);
  p.max_amp = cfg.get_double(section, "max_amp", p.max_amp);
  p.jump_goodwill = cfg.get_double(section, "jump_goodwill", p.jump_goodwill);
  p.min_zero_cross = static_cast<std::size_t>(
      cfg.get_int(section, "min_zero_cross", static_cast<long>(p.min_zero_cross)));
  p.min_peaks =
      static_cast<std::size_t>(cfg.get_int(section, "min_peaks", static_cast<long>(p.min_peaks)));
  p.peak_prominence_mult = cfg.get_double(section, "peak_prominence_mult", p.peak_prominence_mult);
  return p;
}

void cmd_detect(Config& cfg, const RunOptions& opts) {
  cfg.require_known("detect", {"stream", "profile", "scaling", "std_intervall",
                               "std_thrcalc_intervall", "std_thrcalc_step", "std_thr_mult",
                               "buffer", "min_length", "max_length", "min_amp", "max_amp",
                               "jump_goodwill", "min_zero_cross", "min_peaks",
                               "peak_prominence_mult"});
  const std::string stream_path = cfg.get("detect", "stream");
  Waveform stream;
  try {
    stream = io::load_stream(stream_path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const std::string profile_name = cfg.get("detect", "profile", "");
  const auto params = detect_params_from_config(cfg, "detect", profile_name);
  const auto segments = detect::detect_events(stream, params);

  std::ofstream os(opts.out_dir + "/segments.tsv", std::ios::trunc);
  if (!os) throw DataError("cannot write segments.tsv");
  os << "index\tstart\tlength\taccepted\treason\n";
  std::vector<LabeledSignal> accepted;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    os << i << "\t" << s.start << "\t" << s.samples.samples.size() << "\t"
       << (s.accepted ? 1 : 0) << "\t" << (s.accepted ? "-" : s.reason) << "\n";
    if (s.accepted) {
      LabeledSignal sig;
      sig.waveform = s.samples;
      sig.count = 0;  // unlabeled
      sig.profile_name = profile_name;
      sig.window_start = static_cast<double>(s.start) / stream.sample_rate;
      accepted.push_back(std::move(sig));
    }
  }
  io::DatasetMeta meta;
  meta.profile = profile_name.empty() ? "unknown" : profile_name;
  meta.fs = stream.sample_rate;
  meta.seed = 0;
  meta.sensing_distance = 0.0;
  meta.noise = true;
  io::save_dataset(opts.out_dir + "/accepted", meta, accepted);
  dump_effective_config(cfg, opts.out_dir);
}

// ------------------------------------------------------------------- train

fcn::TrainConfig train_config_from(const Config& cfg, const RunOptions& opts) {
  fcn::TrainConfig tc;
  tc.learning_rate = cfg.get_double("train", "LEARNING_RATE", 0.0001);
  tc.batch_size = static_cast<int>(cfg.get_int("train", "BATCH_SIZE", 64));
  tc.train_ratio = cfg.get_double("train", "TRAIN_DATA_RATIO", 0.8);
  tc.shuffle_train = cfg.get_bool("train", "shuffle", true);
  tc.num_trainings = static_cast<int>(cfg.get_int("train", "num_trainings", 5));
  tc.max_epochs = static_cast<int>(cfg.get_int("train", "max_epochs", 500));
  tc.normalize = cfg.get_bool("train", "norm", false);
  tc.seed = cfg.get_seed("train", 1);
  tc.workers = resolve_workers(opts.workers);
  if (cfg.has("train", "filters")) {
    const auto f = cfg.get_list("train", "filters");
    if (f.size() != 3) throw ConfigError("filters needs 3 entries");
    for (int b = 0; b < 3; ++b)
      tc.filters[static_cast<std::size_t>(b)] = static_cast<int>(f[static_cast<std::size_t>(b)]);
  }
  return tc;
}

void write_train_log(const std::string& path, const std::vector<fcn::EpochLog>& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << "epoch\ttrain_loss\ttest_accuracy\n";
  for (const auto& e : log)
    os << e.epoch << "\t" << format_num(e.train_loss, 12) << "\t"
       << format_num(e.test_accuracy, 12) << "\n";
}

void cmd_train(Config& cfg, const RunOptions& opts) {
  cfg.require_known("train", {"dataset", "seed", "LEARNING_RATE", "BATCH_SIZE",
                              "TRAIN_DATA_RATIO", "shuffle", "num_trainings", "max_epochs",
                              "filters", "norm", "filter", "gaussian_filter"});
  auto [meta, signals] = load_dataset_checked(cfg.get("train", "dataset"));
  if (cfg.get_bool("train", "filter", false))
    smooth_in_place(signals, cfg.get_double("train", "gaussian_filter", 35.0),
                    resolve_workers(opts.workers));
  const auto tc = train_config_from(cfg, opts);

  std::vector<double> accs;
  std::vector<int> best_epochs;
  for (int r = 0; r < tc.num_trainings; ++r) {
    fcn::TrainConfig run_cfg = tc;
    run_cfg.seed = mix_seed(tc.seed, static_cast<std::uint64_t>(r));
    fcn::TrainResult res;
    try {
      res = fcn::train(signals, run_cfg);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    fcn::save_model(opts.out_dir + "/model_r" + std::to_string(r) + ".bin", res.model);
    write_train_log(opts.out_dir + "/training_log_r" + std::to_string(r) + ".tsv", res.log);
    accs.push_back(res.best_accuracy);
    best_epochs.push_back(res.best_epoch);
  }

  // median-accuracy replicate becomes the published model
  std::vector<std::size_t> order(accs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return accs[a] != accs[b] ? accs[a] < accs[b] : a < b;
  });
  const std::size_t median = order[(order.size() - 1) / 2];
  fs::copy_file(opts.out_dir + "/model_r" + std::to_string(median) + ".bin",
                opts.out_dir + "/model.bin", fs::copy_options::overwrite_existing);

  std::ofstream os(opts.out_dir + "/replicates.tsv", std::ios::trunc);
  os << "replicate\tbest_epoch\tbest_accuracy\tselected\n";
  for (std::size_t r = 0; r < accs.size(); ++r)
    os << r << "\t" << best_epochs[r] << "\t" << format_num(accs[r], 12) << "\t"
       << (r == median ? 1 : 0) << "\n";
  dump_effective_config(cfg, opts.out_dir);
}

// --------------------------------------------------------- transfer-matrix

void write_matrix_csv(const std::string& path, const std::vector<std::string>& rows,
                      const std::vector<std::string>& cols,
                      const std::vector<std::vector<double>>& values) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << "model";
  for (const auto& c : cols) os << "," << c;
  os << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << rows[r];
    for (std::size_t c = 0; c < cols.size(); ++c) os << "," << format_num(values[r][c], 12);
    os << "\n";
  }
}

void cmd_transfer_matrix(Config& cfg, const RunOptions& opts) {
  cfg.require_known("transfer-matrix",
                    {"models", "datasets", "filter", "gaussian_filter", "norm"});
  const auto model_paths = cfg.get_str_list("transfer-matrix", "models");
  const auto dataset_paths = cfg.get_str_list("transfer-matrix", "datasets");
  if (model_paths.empty() || dataset_paths.empty())
    throw ConfigError("transfer-matrix needs at least one model and one dataset");
  const int workers = resolve_workers(opts.workers);

  std::vector<fcn::FcnModel> models;
  for (const auto& p : model_paths) {
    try {
      models.push_back(fcn::load_model(p));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  }
  for (const auto& m : models) {
    if (m.arch.classes != std::array<int, 4>{1, 2, 3, 4})
      throw DataError("transfer-matrix: model class set mismatch");
  }

  std::vector<std::string> model_names, dataset_names;
  for (const auto& p : model_paths) model_names.push_back(stem_of(p));
  for (const auto& p : dataset_paths) dataset_names.push_back(stem_of(p));

  const std::size_t nm = models.size(), nd = dataset_paths.size();
  auto matrix = [&]() {
    return std::vector<std::vector<double>>(nm, std::vector<double>(nd, 0.0));
  };
  auto acc = matrix(), acc_ref = matrix(), conc = matrix(), conc_ref = matrix();

  for (std::size_t d = 0; d < nd; ++d) {
    auto [meta, signals] = load_dataset_checked(dataset_paths[d]);
    for (const auto& s : signals) {
      if (s.count < 1 || s.count > 4)
        throw DataError("transfer-matrix: dataset has labels outside the model class set");
    }
    if (cfg.get_bool("transfer-matrix", "filter", false))
      smooth_in_place(signals, cfg.get_double("transfer-matrix", "gaussian_filter", 35.0),
                      workers);
    for (std::size_t m = 0; m < nm; ++m) {
      const auto ev = evaluate_model(models[m], signals, workers);
      acc[m][d] = ev.accuracy;
      acc_ref[m][d] = ev.accuracy_refined;
      conc[m][d] = ev.total_true > 0
                       ? static_cast<double>(ev.total_pred - ev.total_true) /
                             static_cast<double>(ev.total_true)
                       : 0.0;
      conc_ref[m][d] = ev.total_true > 0
                           ? static_cast<double>(ev.total_pred_refined - ev.total_true) /
                                 static_cast<double>(ev.total_true)
                           : 0.0;
      std::ofstream os(opts.out_dir + "/confusion_" + model_names[m] + "_" + dataset_names[d] +
                           ".csv",
                       std::ios::trunc);
      os << "true\\pred,1,2,3,4,1r,2r,3r,4r\n";
      for (int t = 0; t < 4; ++t) {
        os << (t + 1);
        for (int p = 0; p < 4; ++p) os << "," << ev.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        for (int p = 0; p < 4; ++p)
          os << "," << ev.confusion_refined[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        os << "\n";
      }
    }
  }

  write_matrix_csv(opts.out_dir + "/accuracy.csv", model_names, dataset_names, acc);
  write_matrix_csv(opts.out_dir + "/accuracy_refined.csv", model_names, dataset_names, acc_ref);
  write_matrix_csv(opts.out_dir + "/concentration_error.csv", model_names, dataset_names, conc);
  write_matrix_csv(opts.out_dir + "/concentration_error_refined.csv", model_names, dataset_names,
                   conc_ref);
  report::transfer_heatmap(model_names, dataset_names, acc, "classification accuracy",
                           opts.out_dir + "/transfer_heatmap.svg");
  report::transfer_heatmap(model_names, dataset_names, acc_ref,
                           "classification accuracy (refined)",
                           opts.out_dir + "/transfer_heatmap_refined.svg");
  dump_effective_config(cfg, opts.out_dir);
}

// ------------------------------------------------------------- disentangle

struct SignalOutcome {
  int used_count = 0;
  int predicted = 0;
  int refined = 0;
  bool converged = false;
  cs::FidelityMetrics fid;
  double cost = 0.0;
  std::vector<EventTemplateParams> components;
  std::vector<report::PropertyRow> rows;
  int property_failures = 0;
  bool sm_accepted = false;
  report::PropertyRow sm_row;
};

void cmd_disentangle(Config& cfg, const RunOptions& opts) {
  cfg.require_known("disentangle",
                    {"model", "dataset", "calibration_dataset", "DISTANCE_GMR", "ftols",
                     "timeout", "epochs", "adam_lr", "lm_max_iters", "savgol_filter", "filter",
                     "norm", "add_noise_pad", "use_true_count", "refine", "baseline",
                     "max_unconverged_fraction"});
  auto [meta, signals] = load_dataset_checked(cfg.get("disentangle", "dataset"));
  const int workers = resolve_workers(opts.workers);

  const std::vector<std::pair<std::string, std::string>> table_meta = {
      {"kind", "properties"},
      {"profile", meta.profile},
      {"fs", format_num(meta.fs, 17)},
      {"gmr_distance", format_num(cfg.get_double("disentangle", "DISTANCE_GMR",
                                                 meta.sensing_distance),
                                  17)}};

  if (signals.empty()) {
    report::write_property_table(opts.out_dir + "/properties.csv", table_meta, {});
    std::ofstream(opts.out_dir + "/fidelity.csv", std::ios::trunc)
        << "signal,true_count,used_count,predicted,refined,converged,cross_correlation,"
           "integral_deviation,amplitude_deviation,cost\n";
    std::ofstream(opts.out_dir + "/components.csv", std::ios::trunc)
        << "signal,event,A1,A2,A3,A4,alpha1,alpha2,alpha3,alpha4,mu1,mu2,mu3,mu4,sigma1,"
           "sigma2,sigma3,sigma4\n";
    std::ofstream(opts.out_dir + "/summary.txt", std::ios::trunc)
        << "signals = 0\nclassified = 0\ndisentangled = 0\n";
    dump_effective_config(cfg, opts.out_dir);
    return;
  }

  fcn::FcnModel model;
  try {
    model = fcn::load_model(cfg.get("disentangle", "model"));
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }

  props::Calibration cal;
  try {
    auto [cal_meta, cal_signals] = load_dataset_checked(cfg.get("disentangle", "calibration_dataset"));
    cal = calibration_from_dataset(cal_signals);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("calibration failed: ") + e.what());
  }

  SignalProfile profile;
  bool have_profile = true;
  try {
    profile = sim::profile_by_name(meta.profile);
  } catch (const std::exception&) {
    have_profile = false;
  }

  cs::CsConfig cs_cfg = have_profile ? cs::cs_config_for(profile, meta.fs) : cs::CsConfig{};
  cs_cfg.timeout_s = cfg.get_double("disentangle", "timeout", 45.0);
  cs_cfg.adam_epochs = static_cast<int>(cfg.get_int("disentangle", "epochs", 2000));
  cs_cfg.adam_lr = cfg.get_double("disentangle", "adam_lr", cs_cfg.adam_lr);
  cs_cfg.lm_max_iters =
      static_cast<int>(cfg.get_int("disentangle", "lm_max_iters", cs_cfg.lm_max_iters));
  cs_cfg.smooth = cfg.get_bool("disentangle", "filter", true);
  if (cfg.has("disentangle", "savgol_filter")) {
    const auto t = cfg.get_list("disentangle", "savgol_filter");
    if (t.size() != 2) throw ConfigError("savgol_filter needs (window, polyorder)");
    cs_cfg.savgol_window = static_cast<std::size_t>(t[0]);
    cs_cfg.savgol_polyorder = static_cast<int>(t[1]);
  }
  if (cfg.has("disentangle", "ftols")) {
    const auto t = cfg.get_list("disentangle", "ftols");
    if (t.size() != 4) throw ConfigError("ftols needs 4 entries");
    std::copy(t.begin(), t.end(), cs_cfg.ftols.begin());
  }
  cs_cfg.add_noise_pad = cfg.get_bool("disentangle", "add_noise_pad", true);

  const double gmr = cfg.get_double("disentangle", "DISTANCE_GMR",
                                    meta.sensing_distance > 0 ? meta.sensing_distance : 14e-6);
  const bool use_true = cfg.get_bool("disentangle", "use_true_count", false);
  const bool use_refine = cfg.get_bool("disentangle", "refine", true);
  const bool run_baseline = cfg.get_bool("disentangle", "baseline", false);
  const bool normalize_in = cfg.get_bool("disentangle", "norm", false);

  baseline::StateMachineParams sm_params{};
  if (run_baseline) {
    if (!have_profile)
      throw ConfigError("baseline comparison needs a builtin profile in the dataset manifest");
    sm_params = baseline::sm_params_for(profile, meta.fs);
  }

  std::vector<SignalOutcome> outcomes(signals.size());
  parallel_for(signals.size(), workers, [&](std::size_t i) {
    const auto& sig = signals[i];
    auto& out = outcomes[i];
    Waveform w = sig.waveform;
    if (normalize_in) {
      double a = 0.0;
      for (double v : w.samples) a = std::max(a, std::abs(v));
      if (a > 0.0)
        for (double& v : w.samples) v /= a;
    }

    const double noise = estimate_signal_noise(w);
    out.predicted = fcn::predict_count(model, w);
    const std::size_t peaks = detect::count_peaks(w.samples, std::max(noise, 1e-12), 3.0);
    out.refined = fcn::refine(out.predicted, peaks);
    const int classified = use_refine ? out.refined : out.predicted;
    out.used_count = use_true && sig.count >= 1 && sig.count <= 4 ? sig.count : classified;

    cs::Disentanglement d = cs::disentangle(w, out.used_count, cs_cfg);
    out.converged = d.converged;
    out.cost = d.cost;
    out.components = d.components;
    try {
      out.fid = cs::fidelity(w, d);
    } catch (const std::exception&) {
      out.fid = d.fidelity;
    }

    for (std::size_t e = 0; e < d.components.size(); ++e) {
      try {
        const auto peaks4 = props::peak_features(d.components[e]);
        report::PropertyRow row;
        row.signal = static_cast<long>(i);
        row.event = static_cast<int>(e);
        row.origin = props::origin_name(out.used_count == 1 ? props::Origin::kIsolated
                                                            : props::Origin::kDisentangled);
        row.level = out.used_count;
        row.velocity = props::velocity(peaks4, gmr);
        Waveform comp;
        comp.sample_rate = meta.fs;
        comp.samples = d.rendered[e];
        row.diameter = props::diameter(props::normalized_integral(comp, peaks4), cal);
        row.amplitude = props::mean_amplitude(peaks4);
        out.rows.push_back(std::move(row));
      } catch (const std::exception&) {
        ++out.property_failures;
      }
    }

    if (run_baseline) {
      const auto ev = baseline::sm_detect(w, sm_params);
      if (ev) {
        out.sm_accepted = true;
        try {
          const auto rec = baseline::sm_properties(w, *ev, gmr, cal);
          out.sm_row = {static_cast<long>(i), 0, props::origin_name(rec.origin), 1,
                        rec.velocity, rec.diameter, rec.mean_amplitude};
        } catch (const std::exception&) {
          out.sm_accepted = false;
        }
      }
    }
  });

  // tables, strictly in signal order
  std::vector<report::PropertyRow> rows;
  std::ofstream fid_os(opts.out_dir + "/fidelity.csv", std::ios::trunc);
  fid_os << "signal,true_count,used_count,predicted,refined,converged,cross_correlation,"
            "integral_deviation,amplitude_deviation,cost\n";
  std::ofstream comp_os(opts.out_dir + "/components.csv", std::ios::trunc);
  comp_os << "signal,event,A1,A2,A3,A4,alpha1,alpha2,alpha3,alpha4,mu1,mu2,mu3,mu4,sigma1,"
             "sigma2,sigma3,sigma4\n";
  std::size_t unconverged = 0, property_failures = 0;
  long truth_total = 0, pipeline_total = 0, baseline_total = 0;
  std::vector<report::PropertyRow> sm_rows;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& out = outcomes[i];
    for (const auto& r : out.rows) rows.push_back(r);
    property_failures += static_cast<std::size_t>(out.property_failures);
    if (!out.converged) ++unconverged;
    fid_os << i << "," << signals[i].count << "," << out.used_count << "," << out.predicted
           << "," << out.refined << "," << (out.converged ? 1 : 0) << ","
           << format_num(out.fid.cross_correlation, 12) << ","
           << format_num(out.fid.integral_deviation, 12) << ","
           << format_num(out.fid.amplitude_deviation, 12) << "," << format_num(out.cost, 12)
           << "\n";
    for (std::size_t e = 0; e < out.components.size(); ++e) {
      const auto& c = out.components[e];
      comp_os << i << "," << e;
      for (double v : c.amplitude) comp_os << "," << format_num(v, 12);
      for (double v : c.shape) comp_os << "," << format_num(v, 12);
      for (double v : c.center) comp_os << "," << format_num(v, 12);
      for (double v : c.width) comp_os << "," << format_num(v, 12);
      comp_os << "\n";
    }
    truth_total += signals[i].count;
    pipeline_total += use_refine ? out.refined : out.predicted;
    if (out.sm_accepted) {
      ++baseline_total;
      sm_rows.push_back(out.sm_row);
    }
  }
  report::write_property_table(opts.out_dir + "/properties.csv", table_meta, rows);
  if (run_baseline) {
    report::write_property_table(opts.out_dir + "/baseline_properties.csv", table_meta, sm_rows);
    if (truth_total > 0) {
      report::write_recovery(
          opts.out_dir + "/recovery.csv",
          {{"truth", static_cast<double>(truth_total), 1.0},
           {"pipeline", static_cast<double>(pipeline_total),
            static_cast<double>(pipeline_total) / static_cast<double>(truth_total)},
           {"state-machine", static_cast<double>(baseline_total),
            static_cast<double>(baseline_total) / static_cast<double>(truth_total)}});
    }
  }

  std::ofstream sum_os(opts.out_dir + "/summary.txt", std::ios::trunc);
  sum_os << "signals = " << signals.size() << "\n"
         << "classified = " << signals.size() << "\n"
         << "disentangled = " << signals.size() << "\n"
         << "property_rows = " << rows.size() << "\n"
         << "property_failures = " << property_failures << "\n"
         << "unconverged = " << unconverged << "\n";
  if (truth_total > 0) {
    sum_os << "truth_events = " << truth_total << "\n"
           << "pipeline_events = " << pipeline_total << "\n";
    if (run_baseline) sum_os << "baseline_events = " << baseline_total << "\n";
  }

  const double max_unconverged = cfg.get_double("disentangle", "max_unconverged_fraction", 1.0);
  if (static_cast<double>(unconverged) >
      max_unconverged * static_cast<double>(signals.size())) {
    throw BudgetError("unconverged fraction " +
                      format_num(static_cast<double>(unconverged) /
                                     static_cast<double>(signals.size()),
                                 6) +
                      " exceeds budget");
  }
  dump_effective_config(cfg, opts.out_dir);
}

// ------------------------------------------------------------------ report

void cmd_report(Config& cfg, const RunOptions& opts) {
  cfg.require_known("report", {"properties", "fidelity", "transfer_accuracy", "recovery",
                               "model", "dataset", "cam_samples_per_class"});
  std::ofstream sum(opts.out_dir + "/summary.txt", std::ios::trunc);
  if (!sum) throw DataError("cannot write summary");

  if (cfg.has("report", "properties")) {
    const auto rows = report::read_property_table(cfg.get("report", "properties"));
    report::scatter_with_marginals(rows, opts.out_dir + "/report_scatter.svg");
    report::level_summaries(rows, opts.out_dir + "/report_levels.svg");
    std::map<int, std::vector<double>> dia;
    for (const auto& r : rows) dia[r.level].push_back(r.diameter);
    sum << "property_rows = " << rows.size() << "\n";
    for (auto& [lvl, v] : dia) {
      std::sort(v.begin(), v.end());
      sum << "median_diameter_level_" << lvl << " = "
          << format_num(v[v.size() / 2], 6) << "\n";
    }
  }
  if (cfg.has("report", "recovery")) {
    const auto rows = report::read_recovery(cfg.get("report", "recovery"));
    report::recovery_bars(rows, opts.out_dir + "/report_recovery.svg");
    for (const auto& r : rows)
      sum << "recovery_" << r.method << " = " << format_num(r.fraction, 6) << "\n";
  }
  if (cfg.has("report", "model") && cfg.has("report", "dataset")) {
    fcn::FcnModel model;
    try {
      model = fcn::load_model(cfg.get("report", "model"));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    auto [meta, signals] = load_dataset_checked(cfg.get("report", "dataset"));
    const int per_class =
        static_cast<int>(cfg.get_int("report", "cam_samples_per_class", 2));
    std::vector<LabeledSignal> samples;
    for (int c = 1; c <= 4; ++c) {
      int got = 0;
      for (const auto& s : signals) {
        if (s.count == c && got < per_class) {
          samples.push_back(s);
          ++got;
        }
      }
    }
    report::cam_strips(model, samples, opts.out_dir + "/report_cam.svg");
    sum << "cam_samples = " << samples.size() << "\n";
  }
  dump_effective_config(cfg, opts.out_dir);
}

}  // namespace

double estimate_signal_noise(const Waveform& x) {
  const std::size_t m = std::min<std::size_t>(50, x.samples.size());
  if (m == 0) return 0.0;
  std::vector<double> head(x.samples.begin(), x.samples.begin() + static_cast<long>(m));
  return population_std(head);
}

EvalCounts evaluate_model(const fcn::FcnModel& model, const std::vector<LabeledSignal>& signals,
                          int workers) {
  struct PerSignal {
    int pred = 0, refined = 0;
  };
  std::vector<PerSignal> per(signals.size());
  parallel_for(signals.size(), workers, [&](std::size_t i) {
    const auto& sig = signals[i];
    per[i].pred = fcn::predict_count(model, sig.waveform);
    const double noise = std::max(estimate_signal_noise(sig.waveform), 1e-12);
    const std::size_t peaks = detect::count_peaks(sig.waveform.samples, noise, 3.0);
    per[i].refined = fcn::refine(per[i].pred, peaks);
  });

  EvalCounts out;
  long correct = 0, correct_ref = 0;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const int t = signals[i].count;
    if (t < 1 || t > 4) continue;
    ++out.confusion[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(per[i].pred - 1)];
    ++out.confusion_refined[static_cast<std::size_t>(t - 1)]
                           [static_cast<std::size_t>(per[i].refined - 1)];
    out.total_true += t;
    out.total_pred += per[i].pred;
    out.total_pred_refined += per[i].refined;
    if (per[i].pred == t) ++correct;
    if (per[i].refined == t) ++correct_ref;
  }
  const long n = std::accumulate(out.confusion.begin(), out.confusion.end(), 0L,
                                 [](long acc, const auto& row) {
                                   return acc + std::accumulate(row.begin(), row.end(), 0L);
                                 });
  out.accuracy = n > 0 ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  out.accuracy_refined = n > 0 ? static_cast<double>(correct_ref) / static_cast<double>(n) : 0.0;
  return out;
}

props::Calibration calibration_from_dataset(const std::vector<LabeledSignal>& signals) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : signals) {
    if (s.count != 1 || s.events.size() != 1) continue;
    const double noise = std::max(estimate_signal_noise(s.waveform), 1e-12);
    try {
      const auto peaks = props::peak_features(s.waveform, noise);
      pts.emplace_back(props::normalized_integral(s.waveform, peaks), s.events[0].diameter);
    } catch (const std::exception&) {
      // unresolvable single event; skip
    }
  }
  if (pts.size() < 20)
    throw DataError("calibration needs at least 20 resolvable single-event signals");
  return props::fit_calibration(pts);
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  return default_workers();
}

void run_command(const std::string& subcommand, const RunOptions& opts) {
  if (opts.out_dir.empty()) throw ConfigError("output directory required (--out)");
  ensure_dir(opts.out_dir);
  Config cfg = opts.config_path.empty() ? Config{} : Config::parse_file(opts.config_path);
  if (opts.has_seed) cfg.set(subcommand, "seed", std::to_string(opts.seed));

  if (subcommand == "simulate") {
    cmd_simulate(cfg, opts);
  } else if (subcommand == "detect") {
    cmd_detect(cfg, opts);
  } else if (subcommand == "train") {
    cmd_train(cfg, opts);
  } else if (subcommand == "transfer-matrix") {
    cmd_transfer_matrix(cfg, opts);
  } else if (subcommand == "disentangle") {
    cmd_disentangle(cfg, opts);
  } else if (subcommand == "report") {
    cmd_report(cfg, opts);
  } else {
    throw ConfigError("unknown subcommand: " + subcommand);
  }
}

int run_command_exit_code(const std::string& subcommand, const RunOptions& opts) {
  try {
    run_command(subcommand, opts);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BudgetError& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return kExitBudget;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace codis::pipeline
