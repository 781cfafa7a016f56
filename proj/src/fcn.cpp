#include "codis/fcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "codis/io.hpp"
#include "codis/parallel.hpp"
#include "codis/rng.hpp"

namespace codis::fcn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;  // running = 0.9*running + 0.1*batch

struct Layout {
  std::array<long, 3> w_off{}, b_off{}, g_off{}, be_off{};
  long dw_off = 0, db_off = 0, total = 0;
  std::array<long, 3> mean_off{}, var_off{};
  long stats_total = 0;
};

Layout layout_of(const Architecture& a) {
  Layout l;
  long off = 0;
  for (int b = 0; b < 3; ++b) {
    const long ck = static_cast<long>(a.channels(b)) * a.kernels[static_cast<std::size_t>(b)];
    const long f = a.filters[static_cast<std::size_t>(b)];
    l.w_off[static_cast<std::size_t>(b)] = off;
    off += ck * f;
    l.b_off[static_cast<std::size_t>(b)] = off;
    off += f;
    l.g_off[static_cast<std::size_t>(b)] = off;
    off += f;
    l.be_off[static_cast<std::size_t>(b)] = off;
    off += f;
  }
  l.dw_off = off;
  off += static_cast<long>(a.filters[2]) * 4;
  l.db_off = off;
  off += 4;
  l.total = off;
  long soff = 0;
  for (int b = 0; b < 3; ++b) {
    const long f = a.filters[static_cast<std::size_t>(b)];
    l.mean_off[static_cast<std::size_t>(b)] = soff;
    soff += f;
    l.var_off[static_cast<std::size_t>(b)] = soff;
    soff += f;
  }
  l.stats_total = soff;
  return l;
}

// columns of the im2col matrix are shifted copies of the input channels
void im2col(const Eigen::MatrixXd& x, int kernel, Eigen::MatrixXd& m) {
  const long t_out = x.rows() - kernel + 1;
  const long c = x.cols();
  m.resize(t_out, c * kernel);
  for (long ch = 0; ch < c; ++ch)
    for (long dk = 0; dk < kernel; ++dk)
      m.col(ch * kernel + dk) = x.col(ch).segment(dk, t_out);
}

void col2im_add(const Eigen::MatrixXd& dm, int kernel, Eigen::MatrixXd& dx) {
  const long t_out = dm.rows();
  const long c = dx.cols();
  for (long ch = 0; ch < c; ++ch)
    for (long dk = 0; dk < kernel; ++dk)
      dx.col(ch).segment(dk, t_out) += dm.col(ch * kernel + dk);
}

struct BlockCache {
  std::vector<Eigen::MatrixXd> conv;  // pre-BN, per sample (T x F)
  std::vector<Eigen::MatrixXd> xhat;
  std::vector<Eigen::MatrixXd> act;   // post-ReLU
  Eigen::VectorXd mean, var;          // batch statistics per filter
};

struct BatchCache {
  std::array<BlockCache, 3> blocks;
  Eigen::MatrixXd gap;     // B x F3
  Eigen::MatrixXd logits;  // B x 4
  Eigen::MatrixXd probs;   // B x 4
};

// Training-mode forward over a batch; fills the cache, returns mean NLL.
// Does not touch the running statistics.
double forward_train(const FcnModel& m, const std::vector<Eigen::VectorXd>& xs,
                     const std::vector<int>& labels, BatchCache& cache, int workers) {
  const auto& a = m.arch;
  const std::size_t bsz = xs.size();

  for (int b = 0; b < 3; ++b) {
    auto& blk = cache.blocks[static_cast<std::size_t>(b)];
    blk.conv.resize(bsz);
    blk.xhat.resize(bsz);
    blk.act.resize(bsz);
    const auto w = m.conv_w(b);
    const auto bias = m.conv_b(b);
    const int kernel = a.kernels[static_cast<std::size_t>(b)];

    parallel_for(bsz, workers, [&](std::size_t s) {
      Eigen::MatrixXd mcol;
      if (b == 0) {
        const Eigen::Map<const Eigen::MatrixXd> x0(xs[s].data(), xs[s].size(), 1);
        im2col(x0, kernel, mcol);
      } else {
        im2col(cache.blocks[static_cast<std::size_t>(b - 1)].act[s], kernel, mcol);
      }
      blk.conv[s].noalias() = mcol * w;
      blk.conv[s].rowwise() += bias.transpose();
    });

    // batch statistics, accumulated in sample order
    const long f = a.filters[static_cast<std::size_t>(b)];
    const long t_out = blk.conv[0].rows();
    const double n = static_cast<double>(bsz) * static_cast<double>(t_out);
    blk.mean.setZero(f);
    blk.var.setZero(f);
    for (std::size_t s = 0; s < bsz; ++s) blk.mean += blk.conv[s].colwise().sum().transpose();
    blk.mean /= n;
    for (std::size_t s = 0; s < bsz; ++s)
      for (long j = 0; j < f; ++j)
        blk.var(j) += (blk.conv[s].col(j).array() - blk.mean(j)).square().sum();
    blk.var /= n;

    const Eigen::ArrayXd inv_std = (blk.var.array() + kBnEps).sqrt().inverse();
    const auto gamma = m.bn_gamma(b);
    const auto beta = m.bn_beta(b);
    parallel_for(bsz, workers, [&](std::size_t s) {
      blk.xhat[s].resize(t_out, f);
      blk.act[s].resize(t_out, f);
      for (long j = 0; j < f; ++j) {
        blk.xhat[s].col(j) =
            ((blk.conv[s].col(j).array() - blk.mean(j)) * inv_std(j)).matrix();
        blk.act[s].col(j) =
            (blk.xhat[s].col(j).array() * gamma(j) + beta(j)).max(0.0).matrix();
      }
    });
  }

  const long f3 = a.filters[2];
  cache.gap.resize(static_cast<long>(bsz), f3);
  for (std::size_t s = 0; s < bsz; ++s)
    cache.gap.row(static_cast<long>(s)) = cache.blocks[2].act[s].colwise().mean();

  cache.logits.noalias() = cache.gap * m.dense_w();
  cache.logits.rowwise() += m.dense_b().transpose();

  cache.probs.resize(static_cast<long>(bsz), 4);
  double loss = 0.0;
  for (std::size_t s = 0; s < bsz; ++s) {
    const long r = static_cast<long>(s);
    const double mx = cache.logits.row(r).maxCoeff();
    Eigen::Vector4d e = (cache.logits.row(r).transpose().array() - mx).exp();
    const double z = e.sum();
    cache.probs.row(r) = (e / z).transpose();
    loss -= std::log(std::max(cache.probs(r, labels[s]), 1e-300));
  }
  return loss / static_cast<double>(bsz);
}

// Gradient of the batch NLL w.r.t. every trainable parameter.
void backward(const FcnModel& m, const std::vector<Eigen::VectorXd>& xs,
              const std::vector<int>& labels, const BatchCache& cache, Eigen::VectorXd& grad,
              int workers) {
  const auto& a = m.arch;
  const Layout l = layout_of(a);
  const std::size_t bsz = xs.size();
  grad.setZero(l.total);

  Eigen::MatrixXd dlogits = cache.probs;
  for (std::size_t s = 0; s < bsz; ++s) dlogits(static_cast<long>(s), labels[s]) -= 1.0;
  dlogits /= static_cast<double>(bsz);

  Eigen::Map<Eigen::MatrixXd>(grad.data() + l.dw_off, a.filters[2], 4).noalias() =
      cache.gap.transpose() * dlogits;
  Eigen::Map<Eigen::VectorXd>(grad.data() + l.db_off, 4) = dlogits.colwise().sum().transpose();

  const Eigen::MatrixXd dgap = dlogits * m.dense_w().transpose();  // B x F3

  // upstream gradient entering each block's activations
  std::vector<Eigen::MatrixXd> dact(bsz);
  const long t3 = cache.blocks[2].act[0].rows();
  for (std::size_t s = 0; s < bsz; ++s)
    dact[s] = Eigen::MatrixXd::Ones(t3, 1) * dgap.row(static_cast<long>(s)) /
              static_cast<double>(t3);

  std::vector<Eigen::MatrixXd> dpre(bsz), dconv(bsz), dw_part(bsz);
  for (int b = 2; b >= 0; --b) {
    const auto& blk = cache.blocks[static_cast<std::size_t>(b)];
    const int kernel = a.kernels[static_cast<std::size_t>(b)];
    const long f = a.filters[static_cast<std::size_t>(b)];
    const long t_out = blk.conv[0].rows();
    const double n = static_cast<double>(bsz) * static_cast<double>(t_out);
    const auto gamma = m.bn_gamma(b);
    const Eigen::ArrayXd inv_std = (blk.var.array() + kBnEps).sqrt().inverse();

    parallel_for(bsz, workers, [&](std::size_t s) {
      dpre[s] = (blk.act[s].array() > 0.0).select(dact[s], 0.0);
    });

    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(f);  // sum dpre
    Eigen::VectorXd s2 = Eigen::VectorXd::Zero(f);  // sum dpre*xhat
    for (std::size_t s = 0; s < bsz; ++s) {
      s1 += dpre[s].colwise().sum().transpose();
      s2 += (dpre[s].array() * blk.xhat[s].array()).colwise().sum().matrix().transpose();
    }
    Eigen::Map<Eigen::VectorXd>(grad.data() + l.g_off[static_cast<std::size_t>(b)], f) = s2;
    Eigen::Map<Eigen::VectorXd>(grad.data() + l.be_off[static_cast<std::size_t>(b)], f) = s1;

    const Eigen::ArrayXd coef = gamma.array() * inv_std;
    parallel_for(bsz, workers, [&](std::size_t s) {
      // dconv = coef .* (dpre - (s1 + xhat .* s2)/N)
      dconv[s].resize(t_out, f);
      for (long j = 0; j < f; ++j) {
        dconv[s].col(j) = (coef(j) * (dpre[s].col(j).array() - s1(j) / n -
                                      blk.xhat[s].col(j).array() * (s2(j) / n)))
                              .matrix();
      }
    });

    const auto w = m.conv_w(b);
    const bool need_dprev = b > 0;
    std::vector<Eigen::MatrixXd> dprev(need_dprev ? bsz : 0);
    parallel_for(bsz, workers, [&](std::size_t s) {
      Eigen::MatrixXd mcol;
      if (b == 0) {
        const Eigen::Map<const Eigen::MatrixXd> x0(xs[s].data(), xs[s].size(), 1);
        im2col(x0, kernel, mcol);
      } else {
        im2col(cache.blocks[static_cast<std::size_t>(b - 1)].act[s], kernel, mcol);
      }
      dw_part[s].noalias() = mcol.transpose() * dconv[s];
      if (need_dprev) {
        const auto& prev = cache.blocks[static_cast<std::size_t>(b - 1)].act[s];
        Eigen::MatrixXd dm = dconv[s] * w.transpose();
        dprev[s].setZero(prev.rows(), prev.cols());
        col2im_add(dm, kernel, dprev[s]);
      }
    });

    auto dw = Eigen::Map<Eigen::MatrixXd>(grad.data() + l.w_off[static_cast<std::size_t>(b)],
                                          static_cast<long>(a.channels(b)) * kernel, f);
    for (std::size_t s = 0; s < bsz; ++s) dw += dw_part[s];
    auto db = Eigen::Map<Eigen::VectorXd>(grad.data() + l.b_off[static_cast<std::size_t>(b)], f);
    for (std::size_t s = 0; s < bsz; ++s) db += dconv[s].colwise().sum().transpose();

    if (need_dprev) dact = std::move(dprev);
  }
}

Eigen::MatrixXd forward_features(const FcnModel& m, const Eigen::VectorXd& x) {
  const auto& a = m.arch;
  if (x.size() != a.input_len) throw std::invalid_argument("fcn: input length mismatch");
  Eigen::MatrixXd act = Eigen::Map<const Eigen::MatrixXd>(x.data(), x.size(), 1);
  for (int b = 0; b < 3; ++b) {
    const int kernel = a.kernels[static_cast<std::size_t>(b)];
    Eigen::MatrixXd mcol;
    im2col(act, kernel, mcol);
    Eigen::MatrixXd conv = mcol * m.conv_w(b);
    conv.rowwise() += m.conv_b(b).transpose();
    const Eigen::ArrayXd inv_std = (m.bn_var(b).array() + kBnEps).sqrt().inverse();
    const auto mean = m.bn_mean(b);
    const auto gamma = m.bn_gamma(b);
    const auto beta = m.bn_beta(b);
    act.resize(conv.rows(), conv.cols());
    for (long j = 0; j < conv.cols(); ++j) {
      act.col(j) = (((conv.col(j).array() - mean(j)) * inv_std(j)) * gamma(j) + beta(j))
                       .max(0.0)
                       .matrix();
    }
  }
  return act;  // T3 x F3
}

std::size_t percentile_len(std::vector<std::size_t> lens, double q) {
  std::sort(lens.begin(), lens.end());
  const std::size_t idx = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(lens.size()))) - 1;
  return lens[std::min(idx, lens.size() - 1)];
}

}  // namespace

void Architecture::validate() const {
  if (kernels != std::array<int, 3>{16, 10, 6})
    throw std::invalid_argument("fcn: kernel lengths are fixed at (16, 10, 6)");
  for (int f : filters)
    if (f < 1) throw std::invalid_argument("fcn: filter counts must be >= 1");
  if (input_len <= kernels[0] + kernels[1] + kernels[2] - 3 + 4)
    throw std::invalid_argument("fcn: input length too small for the receptive field");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("fcn: learning_rate must be > 0");
  if (!(train_ratio > 0.0 && train_ratio < 1.0))
    throw std::invalid_argument("fcn: train_ratio must be in (0, 1)");
  if (batch_size < 1) throw std::invalid_argument("fcn: batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("fcn: max_epochs must be >= 1");
}

#define CODIS_FCN_MAPS(constness)                                                            \
  Eigen::Map<constness Eigen::MatrixXd> FcnModel::conv_w(int b) constness {                  \
    const Layout l = layout_of(arch);                                                        \
    return {params.data() + l.w_off[static_cast<std::size_t>(b)],                            \
            static_cast<long>(arch.channels(b)) * arch.kernels[static_cast<std::size_t>(b)], \
            static_cast<long>(arch.filters[static_cast<std::size_t>(b)])};                   \
  }                                                                                          \
  Eigen::Map<constness Eigen::VectorXd> FcnModel::conv_b(int b) constness {                  \
    const Layout l = layout_of(arch);                                                        \
    return {params.data() + l.b_off[static_cast<std::size_t>(b)],                            \
            static_cast<long>(arch.filters[static_cast<std::size_t>(b)])};                   \
  }                                                                                          \
  Eigen::Map<constness Eigen::VectorXd> FcnModel::bn_gamma(int b) constness {                \
    const Layout l = layout_of(arch);                                                        \
    return {params.data() + l.g_off[static_cast<std::size_t>(b)],                            \
            static_cast<long>(arch.filters[static_cast<std::size_t>(b)])};                   \
  }                                                                                          \
  Eigen::Map<constness Eigen::VectorXd> FcnModel::bn_beta(int b) constness {                 \
    const Layout l = layout_of(arch);                                                        \
    return {params.data() + l.be_off[static_cast<std::size_t>(b)],                           \
            static_cast<long>(arch.filters[static_cast<std::size_t>(b)])};                   \
  }                                                                                          \
  Eigen::Map<constness Eigen::MatrixXd> FcnModel::dense_w() constness {                      \
    const Layout l = layout_of(arch);                                                        \
    return {params.data() + l.dw_off, static_cast<long>(arch.filters[2]), 4};                \
  }                                                                                          \
  Eigen::Map<constness Eigen::VectorXd> FcnModel::dense_b() constness {                      \
    const Layout l = layout_of(arch);                                                        \
    return {params.data() + l.db_off, 4};                                                    \
  }                                                                                          \
  Eigen::Map<constness Eigen::VectorXd> FcnModel::bn_mean(int b) constness {                 \
    const Layout l = layout_of(arch);                                                        \
    return {stats.data() + l.mean_off[static_cast<std::size_t>(b)],                          \
            static_cast<long>(arch.filters[static_cast<std::size_t>(b)])};                   \
  }                                                                                          \
  Eigen::Map<constness Eigen::VectorXd> FcnModel::bn_var(int b) constness {                  \
    const Layout l = layout_of(arch);                                                        \
    return {stats.data() + l.var_off[static_cast<std::size_t>(b)],                           \
            static_cast<long>(arch.filters[static_cast<std::size_t>(b)])};                   \
  }

CODIS_FCN_MAPS()
CODIS_FCN_MAPS(const)
#undef CODIS_FCN_MAPS

FcnModel make_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  const Layout l = layout_of(arch);
  FcnModel m;
  m.arch = arch;
  m.params.setZero(l.total);
  m.stats.setZero(l.stats_total);
  Rng rng(seed);
  for (int b = 0; b < 3; ++b) {
    auto w = m.conv_w(b);
    const double std =
        std::sqrt(2.0 / static_cast<double>(arch.channels(b) * arch.kernels[static_cast<std::size_t>(b)]));
    for (long j = 0; j < w.cols(); ++j)
      for (long i = 0; i < w.rows(); ++i) w(i, j) = rng.normal(0.0, std);
    m.bn_gamma(b).setOnes();
    m.bn_var(b).setOnes();
  }
  auto dw = m.dense_w();
  const double std = std::sqrt(1.0 / static_cast<double>(arch.filters[2]));
  for (long j = 0; j < dw.cols(); ++j)
    for (long i = 0; i < dw.rows(); ++i) dw(i, j) = rng.normal(0.0, std);
  return m;
}

Waveform pad_with_noise(const Waveform& x, std::size_t target_len, std::uint64_t seed) {
  if (target_len < x.samples.size())
    throw std::invalid_argument("pad_with_noise: target shorter than signal");
  Waveform out = x;
  if (target_len == x.samples.size()) return out;
  const std::size_t head = std::min<std::size_t>(50, x.samples.size());
  if (head == 0) throw std::invalid_argument("pad_with_noise: empty signal");
  double m = 0.0;
  for (std::size_t i = 0; i < head; ++i) m += x.samples[i];
  m /= static_cast<double>(head);
  double v = 0.0;
  for (std::size_t i = 0; i < head; ++i) v += (x.samples[i] - m) * (x.samples[i] - m);
  const double s = std::sqrt(v / static_cast<double>(head));
  Rng rng(seed);
  out.samples.reserve(target_len);
  while (out.samples.size() < target_len) out.samples.push_back(rng.normal(m, s));
  return out;
}

Eigen::VectorXd prepare_input(const FcnModel& m, const Waveform& x) {
  Waveform w = x;
  if (m.arch.normalize) {
    double a = 0.0;
    for (double v : w.samples) a = std::max(a, std::abs(v));
    if (a > 0.0)
      for (double& v : w.samples) v /= a;
  }
  const std::size_t target = static_cast<std::size_t>(m.arch.input_len);
  if (w.samples.size() > target) {
    w.samples.resize(target);  // over-length segments are tail-truncated
  } else if (w.samples.size() < target) {
    w = pad_with_noise(w, target, mix_seed(0x9AD5EEDULL, w.samples.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(w.samples.data(), static_cast<long>(w.samples.size()));
}

Eigen::Vector4d forward(const FcnModel& m, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd act = forward_features(m, x);
  const Eigen::VectorXd gap = act.colwise().mean().transpose();
  Eigen::Vector4d logits = m.dense_w().transpose() * gap + m.dense_b();
  const double mx = logits.maxCoeff();
  Eigen::Vector4d e = (logits.array() - mx).exp();
  return e / e.sum();
}

Eigen::Vector4d forward(const FcnModel& m, const Waveform& x) {
  return forward(m, prepare_input(m, x));
}

int predict_count(const FcnModel& m, const Waveform& x) {
  const Eigen::Vector4d p = forward(m, x);
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (p(i) > p(best)) best = i;  // strict: ties stay with the smaller count
  return m.arch.classes[static_cast<std::size_t>(best)];
}

int refine(int count, std::size_t peaks) {
  if (count < 1 || count > 4) throw std::invalid_argument("refine: count must be in 1..4");
  if (peaks > 4 * static_cast<std::size_t>(count) && count < 4) return count + 1;
  return count;
}

std::vector<double> class_activation_map(const FcnModel& m, const Waveform& x, int class_label) {
  int cls = -1;
  for (int i = 0; i < 4; ++i)
    if (m.arch.classes[static_cast<std::size_t>(i)] == class_label) cls = i;
  if (cls < 0) throw std::invalid_argument("class_activation_map: unknown class label");

  const Eigen::VectorXd input = prepare_input(m, x);
  const Eigen::MatrixXd act = forward_features(m, input);  // T3 x F3
  const Eigen::VectorXd cam = act * m.dense_w().col(cls);
  const long t3 = cam.size();

  // valid convs shift the feature grid by half the total receptive field
  const double offset =
      0.5 * static_cast<double>(m.arch.kernels[0] + m.arch.kernels[1] + m.arch.kernels[2] - 3);
  std::vector<double> up(static_cast<std::size_t>(m.arch.input_len), 0.0);
  for (long i = 0; i < m.arch.input_len; ++i) {
    double pos = static_cast<double>(i) - offset;
    pos = std::clamp(pos, 0.0, static_cast<double>(t3 - 1));
    const long lo = static_cast<long>(std::floor(pos));
    const long hi = std::min(lo + 1, t3 - 1);
    const double frac = pos - static_cast<double>(lo);
    up[static_cast<std::size_t>(i)] = (1.0 - frac) * cam(lo) + frac * cam(hi);
  }

  // report on the caller's grid
  std::vector<double> out(x.samples.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = i < up.size() ? up[i] : up.back();
  return out;
}

TrainResult train(const std::vector<LabeledSignal>& data, const TrainConfig& cfg) {
  cfg.validate();
  std::array<std::vector<std::size_t>, 4> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int c = data[i].count;
    if (c < 1 || c > 4)
      throw std::invalid_argument("fcn train: label outside class set {1..4}");
    by_class[static_cast<std::size_t>(c - 1)].push_back(i);
  }
  for (const auto& v : by_class)
    if (v.size() < 2)
      throw std::invalid_argument("fcn train: every class needs at least 2 examples");

  TrainResult res;
  for (int c = 0; c < 4; ++c) {
    const auto& v = by_class[static_cast<std::size_t>(c)];
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(cfg.train_ratio * static_cast<double>(v.size())));
    for (std::size_t i = 0; i < v.size(); ++i)
      (i < n_train ? res.train_indices : res.test_indices).push_back(v[i]);
  }
  std::sort(res.train_indices.begin(), res.train_indices.end());
  std::sort(res.test_indices.begin(), res.test_indices.end());

  // model input length: 99th percentile of training lengths, multiple of 8
  std::vector<std::size_t> lens;
  lens.reserve(res.train_indices.size());
  for (auto i : res.train_indices) lens.push_back(data[i].waveform.samples.size());
  std::size_t input_len = percentile_len(lens, 0.99);
  input_len = (input_len + 7) / 8 * 8;
  input_len = std::max<std::size_t>(input_len, 40);

  Architecture arch;
  arch.filters = cfg.filters;
  arch.input_len = static_cast<int>(input_len);
  arch.normalize = cfg.normalize;
  FcnModel model = make_model(arch, mix_seed(cfg.seed, 0x111ULL));

  // pad every signal once, up front
  std::vector<Eigen::VectorXd> padded(data.size());
  std::vector<int> label(data.size());
  parallel_for(data.size(), cfg.workers, [&](std::size_t i) {
    Waveform w = data[i].waveform;
    if (arch.normalize) {
      double a = 0.0;
      for (double v : w.samples) a = std::max(a, std::abs(v));
      if (a > 0.0)
        for (double& v : w.samples) v /= a;
    }
    if (w.samples.size() > input_len) w.samples.resize(input_len);
    if (w.samples.size() < input_len)
      w = pad_with_noise(w, input_len, mix_seed(cfg.seed, 0x9AD000ULL + i));
    padded[i] = Eigen::Map<const Eigen::VectorXd>(w.samples.data(),
                                                  static_cast<long>(w.samples.size()));
    label[i] = data[i].count - 1;
  });

  const Layout l = layout_of(arch);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(l.total);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(l.total);
  long adam_t = 0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  Eigen::VectorXd best_params = model.params;
  Eigen::VectorXd best_stats = model.stats;
  double best_acc = -1.0;
  int best_epoch = 0;

  Rng shuffle_rng(mix_seed(cfg.seed, 0x5113ULL));
  std::vector<std::size_t> order = res.train_indices;
  BatchCache cache;
  Eigen::VectorXd grad;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle_train) {
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = shuffle_rng.index(i);
        std::swap(order[i - 1], order[j]);
      }
    }

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t bsz =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - at);
      std::vector<Eigen::VectorXd> xs(bsz);
      std::vector<int> ys(bsz);
      for (std::size_t s = 0; s < bsz; ++s) {
        xs[s] = padded[order[at + s]];
        ys[s] = label[order[at + s]];
      }
      const double loss = forward_train(model, xs, ys, cache, cfg.workers);
      loss_sum += loss * static_cast<double>(bsz);
      seen += bsz;

      // running statistics track the batch statistics
      for (int b = 0; b < 3; ++b) {
        model.bn_mean(b) = kBnMomentum * model.bn_mean(b) +
                           (1.0 - kBnMomentum) * cache.blocks[static_cast<std::size_t>(b)].mean;
        model.bn_var(b) = kBnMomentum * model.bn_var(b) +
                          (1.0 - kBnMomentum) * cache.blocks[static_cast<std::size_t>(b)].var;
      }

      backward(model, xs, ys, cache, grad, cfg.workers);
      ++adam_t;
      const double corr =
          std::sqrt(1.0 - std::pow(b2, static_cast<double>(adam_t))) /
          (1.0 - std::pow(b1, static_cast<double>(adam_t)));
      adam_m = b1 * adam_m + (1.0 - b1) * grad;
      adam_v = b2 * adam_v + (1.0 - b2) * grad.cwiseProduct(grad);
      model.params -= (cfg.learning_rate * corr) *
                      adam_m.cwiseQuotient(adam_v.cwiseSqrt() +
                                           Eigen::VectorXd::Constant(l.total, eps));
    }

    // held-out accuracy with the running statistics
    std::vector<int> correct(res.test_indices.size(), 0);
    parallel_for(res.test_indices.size(), cfg.workers, [&](std::size_t i) {
      const auto idx = res.test_indices[i];
      const Eigen::Vector4d p = forward(model, padded[idx]);
      int bestc = 0;
      for (int k = 1; k < 4; ++k)
        if (p(k) > p(bestc)) bestc = k;
      correct[i] = bestc == label[idx] ? 1 : 0;
    });
    double acc = 0.0;
    for (int c : correct) acc += c;
    acc = res.test_indices.empty() ? 0.0 : acc / static_cast<double>(res.test_indices.size());

    res.log.push_back({epoch, loss_sum / static_cast<double>(seen), acc});
    if (acc > best_acc) {
      best_acc = acc;
      best_epoch = epoch;
      best_params = model.params;
      best_stats = model.stats;
    }
  }

  model.params = best_params;
  model.stats = best_stats;
  res.model = std::move(model);
  res.best_accuracy = best_acc;
  res.best_epoch = best_epoch;
  return res;
}

double gradient_check(const FcnModel& m, const std::vector<Eigen::VectorXd>& batch,
                      const std::vector<int>& labels) {
  BatchCache cache;
  forward_train(m, batch, labels, cache, 1);
  Eigen::VectorXd grad;
  backward(m, batch, labels, cache, grad, 1);

  FcnModel probe = m;
  const double h = 1e-5;
  double gmax = 0.0;
  for (long p = 0; p < grad.size(); ++p) gmax = std::max(gmax, std::abs(grad(p)));
  double worst = 0.0;
  for (long p = 0; p < probe.params.size(); ++p) {
    const double keep = probe.params(p);
    probe.params(p) = keep + h;
    const double fp = forward_train(probe, batch, labels, cache, 1);
    probe.params(p) = keep - h;
    const double fm = forward_train(probe, batch, labels, cache, 1);
    probe.params(p) = keep;
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(grad(p)), std::abs(fd), 1e-6 * gmax, 1e-300});
    worst = std::max(worst, std::abs(grad(p) - fd) / denom);
  }
  return worst;
}

Eigen::MatrixXd conv1d_valid(const Eigen::MatrixXd& input, const Eigen::MatrixXd& w,
                             const Eigen::VectorXd& bias, int kernel) {
  Eigen::MatrixXd mcol;
  im2col(input, kernel, mcol);
  Eigen::MatrixXd out = mcol * w;
  out.rowwise() += bias.transpose();
  return out;
}

namespace {
constexpr char kModelMagic[8] = {'C', 'O', 'D', 'I', 'S', 'F', 'C', 'N'};
}

void save_model(const std::string& path, const FcnModel& m) {
  auto os = io::open_out(path);
  io::write_magic(os, kModelMagic);
  io::write_u32(os, 1);
  io::write_u32(os, 3);
  for (int k : m.arch.kernels) io::write_u32(os, static_cast<std::uint32_t>(k));
  for (int f : m.arch.filters) io::write_u32(os, static_cast<std::uint32_t>(f));
  io::write_u32(os, static_cast<std::uint32_t>(m.arch.input_len));
  io::write_u32(os, 4);
  for (int c : m.arch.classes) io::write_i32(os, c);
  io::write_u32(os, m.arch.normalize ? 1 : 0);
  io::write_u64(os, static_cast<std::uint64_t>(m.params.size()));
  io::write_f64_array(os, m.params.data(), static_cast<std::size_t>(m.params.size()));
  io::write_u64(os, static_cast<std::uint64_t>(m.stats.size()));
  io::write_f64_array(os, m.stats.data(), static_cast<std::size_t>(m.stats.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

FcnModel load_model(const std::string& path) {
  auto is = io::open_in(path);
  io::expect_magic(is, kModelMagic, "codis model");
  const std::uint32_t version = io::read_u32(is);
  if (version != 1) throw std::runtime_error("unsupported model version");
  if (io::read_u32(is) != 3) throw std::runtime_error("unsupported block count");
  Architecture arch;
  for (int b = 0; b < 3; ++b) arch.kernels[static_cast<std::size_t>(b)] = static_cast<int>(io::read_u32(is));
  for (int b = 0; b < 3; ++b) arch.filters[static_cast<std::size_t>(b)] = static_cast<int>(io::read_u32(is));
  arch.input_len = static_cast<int>(io::read_u32(is));
  if (io::read_u32(is) != 4) throw std::runtime_error("unsupported class count");
  for (int c = 0; c < 4; ++c) arch.classes[static_cast<std::size_t>(c)] = io::read_i32(is);
  arch.normalize = io::read_u32(is) != 0;
  arch.validate();

  FcnModel m;
  m.arch = arch;
  const Layout l = layout_of(arch);
  const std::uint64_t np = io::read_u64(is);
  if (np != static_cast<std::uint64_t>(l.total))
    throw std::runtime_error("model parameter count mismatch");
  m.params.resize(l.total);
  io::read_f64_array(is, m.params.data(), np);
  const std::uint64_t ns = io::read_u64(is);
  if (ns != static_cast<std::uint64_t>(l.stats_total))
    throw std::runtime_error("model statistics count mismatch");
  m.stats.resize(l.stats_total);
  io::read_f64_array(is, m.stats.data(), ns);
  return m;
}

}  // namespace codis::fcn
