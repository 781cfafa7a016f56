#include "codis/dsp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace codis {

double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double population_std(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> moving_std(const std::vector<double>& x, std::size_t window) {
  if (window < 2) throw std::invalid_argument("moving_std: window must be >= 2");
  if (x.size() < window) throw std::invalid_argument("moving_std: window larger than signal");
  const std::size_t n = x.size();
  // center the data once so the prefix-of-squares stays well conditioned
  const double m = mean(x);
  std::vector<double> s(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i] - m;
    s[i + 1] = s[i] + v;
    s2[i + 1] = s2[i] + v * v;
  }
  const double w = static_cast<double>(window);
  std::vector<double> out(n - window + 1);
  for (std::size_t i = 0; i + window <= n; ++i) {
    const double sum = s[i + window] - s[i];
    const double sumsq = s2[i + window] - s2[i];
    double var = (sumsq - sum * sum / w) / w;
    if (var < 0.0) var = 0.0;
    out[i] = std::sqrt(var);
  }
  return out;
}

std::size_t count_zero_crossings(const std::vector<double>& x) {
  std::size_t n = 0;
  int last_sign = 0;
  for (double v : x) {
    const int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign) ++n;
    last_sign = s;
  }
  return n;
}

std::vector<PeakInfo> find_lobes(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<PeakInfo> peaks;
  if (n < 3) return peaks;
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = std::abs(x[i]);

  std::size_t i = 1;
  while (i + 1 < n) {
    if (a[i] > a[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && a[j + 1] == a[i]) ++j;  // plateau
      if (j + 1 < n && a[j + 1] < a[i]) {
        const std::size_t apex = (i + j) / 2;
        PeakInfo p;
        p.index = apex;
        p.value = x[apex];
        peaks.push_back(p);
        i = j + 1;
        continue;
      }
      i = j + 1;
      continue;
    }
    ++i;
  }

  // topographic prominence on |x|
  for (auto& p : peaks) {
    const double h = a[p.index];
    double left_min = h;
    for (std::size_t k = p.index; k-- > 0;) {
      if (a[k] > h) break;
      left_min = std::min(left_min, a[k]);
    }
    double right_min = h;
    for (std::size_t k = p.index + 1; k < n; ++k) {
      if (a[k] > h) break;
      right_min = std::min(right_min, a[k]);
    }
    p.prominence = h - std::max(left_min, right_min);
  }
  return peaks;
}

std::vector<PeakInfo> prominent_lobes(const std::vector<double>& x, double min_prominence) {
  auto peaks = find_lobes(x);
  std::vector<PeakInfo> out;
  for (const auto& p : peaks) {
    if (p.prominence > min_prominence) out.push_back(p);
  }
  return out;
}

std::vector<double> savgol_filter(const std::vector<double>& x, std::size_t window,
                                  int polyorder) {
  if (window % 2 == 0 || window < 3) throw std::invalid_argument("savgol: window must be odd >= 3");
  if (polyorder < 0 || static_cast<std::size_t>(polyorder) >= window)
    throw std::invalid_argument("savgol: polyorder must be < window");
  if (x.size() < window) return x;  // too short to smooth

  const int w = static_cast<int>(window);
  const int half = w / 2;
  const int terms = polyorder + 1;

  Eigen::MatrixXd v(w, terms);
  for (int j = 0; j < w; ++j) {
    double p = 1.0;
    for (int k = 0; k < terms; ++k) {
      v(j, k) = p;
      p *= static_cast<double>(j - half);
    }
  }
  // projection of the window onto the fitted polynomial, evaluated at every
  // in-window offset; row `half` is the usual interior convolution kernel
  const Eigen::MatrixXd proj = v * (v.transpose() * v).ldlt().solve(v.transpose());

  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = half; i + half < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < w; ++j) acc += proj(half, j) * x[i - half + j];
    out[i] = acc;
  }
  for (int r = 0; r < half; ++r) {
    double head = 0.0, tail = 0.0;
    for (int j = 0; j < w; ++j) {
      head += proj(r, j) * x[j];
      tail += proj(w - 1 - r, j) * x[n - w + j];
    }
    out[r] = head;
    out[n - 1 - r] = tail;
  }
  return out;
}

std::vector<double> gaussian_filter(const std::vector<double>& x, double sigma) {
  if (!(sigma > 0.0)) return x;
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * (k / sigma) * (k / sigma));
    kernel[k + radius] = v;
    norm += v;
  }
  for (auto& v : kernel) v /= norm;

  const long n = static_cast<long>(x.size());
  std::vector<double> out(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      long j = i + k;
      if (j < 0) j = -j - 1;            // reflect
      if (j >= n) j = 2 * n - 1 - j;
      j = std::clamp(j, 0L, n - 1);
      acc += kernel[k + radius] * x[j];
    }
    out[i] = acc;
  }
  return out;
}

}  // namespace codis
