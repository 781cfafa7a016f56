#include "codis/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "codis/svg.hpp"

namespace codis::report {

namespace {

const char* level_color(int level) {
  switch (level) {
    case 1: return "#2a6fdb";
    case 2: return "#2aa876";
    case 3: return "#e08a00";
    case 4: return "#c0392b";
    default: return "#777777";
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(tok);
  return out;
}

struct Quartiles {
  double q1 = 0.0, med = 0.0, q3 = 0.0, lo = 0.0, hi = 0.0;
};

Quartiles quartiles(std::vector<double> v) {
  Quartiles q;
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double f) {
    const double pos = f * static_cast<double>(v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - frac) + v[i + 1] * frac : v[i];
  };
  q.q1 = at(0.25);
  q.med = at(0.5);
  q.q3 = at(0.75);
  q.lo = v.front();
  q.hi = v.back();
  return q;
}

}  // namespace

void write_property_table(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& meta,
                          const std::vector<PropertyRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const auto& [k, v] : meta) os << "# " << k << " = " << v << "\n";
  os << "signal,event,origin,level,velocity_mm_s,diameter_um,mean_amplitude_v\n";
  for (const auto& r : rows) {
    os << r.signal << "," << r.event << "," << r.origin << "," << r.level << ","
       << format_num(r.velocity, 12) << "," << format_num(r.diameter, 12) << ","
       << format_num(r.amplitude, 12) << "\n";
  }
}

std::vector<PropertyRow> read_property_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<PropertyRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() < 7) continue;
    PropertyRow r;
    r.signal = std::stol(f[0]);
    r.event = std::stoi(f[1]);
    r.origin = f[2];
    r.level = std::stoi(f[3]);
    r.velocity = std::stod(f[4]);
    r.diameter = std::stod(f[5]);
    r.amplitude = std::stod(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void scatter_with_marginals(const std::vector<PropertyRow>& rows, const std::string& path) {
  const double W = 760, H = 600;
  SvgCanvas svg(W, H);
  if (rows.empty()) {
    svg.text(W / 2, H / 2, "no property records", 14, "middle");
    svg.save(path);
    return;
  }
  double dlo = 1e300, dhi = -1e300, vlo = 1e300, vhi = -1e300;
  for (const auto& r : rows) {
    dlo = std::min(dlo, r.diameter);
    dhi = std::max(dhi, r.diameter);
    vlo = std::min(vlo, r.velocity);
    vhi = std::max(vhi, r.velocity);
  }
  const double dpad = 0.05 * std::max(dhi - dlo, 1e-12);
  const double vpad = 0.05 * std::max(vhi - vlo, 1e-12);
  dlo -= dpad; dhi += dpad; vlo -= vpad; vhi += vpad;

  // main panel + top (diameter) and right (velocity) marginal histograms
  const AxisScale xs{dlo, dhi, 70, 560};
  const AxisScale ys{vlo, vhi, 460, 130};
  svg.rect(70, 130, 490, 330, "none", 1.0, "#999999");
  for (const auto& r : rows)
    svg.circle(xs(r.diameter), ys(r.velocity), 2.2, level_color(r.level), 0.55);

  const int nbins = 36;
  std::map<int, std::vector<double>> dcounts, vcounts;  // per level
  for (const auto& r : rows) {
    auto& dc = dcounts[r.level];
    auto& vc = vcounts[r.level];
    dc.resize(nbins, 0.0);
    vc.resize(nbins, 0.0);
    int bd = static_cast<int>((r.diameter - dlo) / (dhi - dlo) * nbins);
    int bv = static_cast<int>((r.velocity - vlo) / (vhi - vlo) * nbins);
    bd = std::clamp(bd, 0, nbins - 1);
    bv = std::clamp(bv, 0, nbins - 1);
    dc[static_cast<std::size_t>(bd)] += 1.0;
    vc[static_cast<std::size_t>(bv)] += 1.0;
  }
  double dmax = 1.0, vmax = 1.0;
  for (const auto& [lvl, c] : dcounts)
    for (double v : c) dmax = std::max(dmax, v);
  for (const auto& [lvl, c] : vcounts)
    for (double v : c) vmax = std::max(vmax, v);
  for (const auto& [lvl, c] : dcounts) {
    std::vector<std::pair<double, double>> pts;
    for (int b = 0; b < nbins; ++b) {
      const double x = 70 + (static_cast<double>(b) + 0.5) / nbins * 490;
      pts.emplace_back(x, 120 - c[static_cast<std::size_t>(b)] / dmax * 80);
    }
    svg.polyline(pts, level_color(lvl), 1.5);
  }
  for (const auto& [lvl, c] : vcounts) {
    std::vector<std::pair<double, double>> pts;
    for (int b = 0; b < nbins; ++b) {
      const double y = 460 - (static_cast<double>(b) + 0.5) / nbins * 330;
      pts.emplace_back(570 + c[static_cast<std::size_t>(b)] / vmax * 150, y);
    }
    svg.polyline(pts, level_color(lvl), 1.5);
  }

  svg.text(315, 495, "hydrodynamic diameter (um)", 12, "middle");
  svg.text(20, 300, "velocity (mm/s)", 12, "middle");
  svg.text(70, 508, format_num(dlo + dpad, 4), 10);
  svg.text(560, 508, format_num(dhi - dpad, 4), 10, "end");
  svg.text(64, 464, format_num(vlo + vpad, 4), 10, "end");
  svg.text(64, 140, format_num(vhi - vpad, 4), 10, "end");
  double ly = 140;
  for (int lvl = 1; lvl <= 4; ++lvl) {
    svg.circle(600, ly, 4, level_color(lvl));
    svg.text(610, ly + 4, "level " + std::to_string(lvl), 11);
    ly += 18;
  }
  svg.save(path);
}

void level_summaries(const std::vector<PropertyRow>& rows, const std::string& path) {
  const double W = 760, H = 300;
  SvgCanvas svg(W, H);
  const char* names[3] = {"velocity (mm/s)", "diameter (um)", "amplitude (V)"};
  for (int panel = 0; panel < 3; ++panel) {
    const double x0 = 40 + panel * 240;
    std::map<int, std::vector<double>> per_level;
    for (const auto& r : rows)
      per_level[r.level].push_back(panel == 0 ? r.velocity
                                              : (panel == 1 ? r.diameter : r.amplitude));
    double lo = 1e300, hi = -1e300;
    for (auto& [lvl, v] : per_level)
      for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    if (per_level.empty()) {
      lo = 0;
      hi = 1;
    }
    const double pad = 0.08 * std::max(hi - lo, 1e-12);
    const AxisScale ys{lo - pad, hi + pad, 250, 40};
    svg.rect(x0, 40, 200, 210, "none", 1.0, "#999999");
    for (int lvl = 1; lvl <= 4; ++lvl) {
      const auto it = per_level.find(lvl);
      if (it == per_level.end() || it->second.empty()) continue;
      const auto q = quartiles(it->second);
      const double cx = x0 + 25 + (lvl - 1) * 50;
      svg.line(cx, ys(q.lo), cx, ys(q.hi), level_color(lvl), 1.0);
      svg.rect(cx - 12, ys(q.q3), 24, std::max(1.0, ys(q.q1) - ys(q.q3)), level_color(lvl), 0.35,
               level_color(lvl));
      svg.line(cx - 12, ys(q.med), cx + 12, ys(q.med), "#000000", 1.5);
      svg.text(cx, 268, std::to_string(lvl), 10, "middle");
    }
    svg.text(x0 + 100, 28, names[panel], 12, "middle");
    svg.text(x0 - 4, ys(lo), format_num(lo, 3), 9, "end");
    svg.text(x0 - 4, ys(hi), format_num(hi, 3), 9, "end");
  }
  svg.save(path);
}

void write_recovery(const std::string& path, const std::vector<RecoveryRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "method,events,recovery_fraction\n";
  for (const auto& r : rows)
    os << r.method << "," << format_num(r.events, 12) << "," << format_num(r.fraction, 12)
       << "\n";
}

std::vector<RecoveryRow> read_recovery(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<RecoveryRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 3) continue;
    rows.push_back({f[0], std::stod(f[1]), std::stod(f[2])});
  }
  return rows;
}

void recovery_bars(const std::vector<RecoveryRow>& rows, const std::string& path) {
  const double W = 480, H = 320;
  SvgCanvas svg(W, H);
  const double x0 = 70, panel_w = 360;
  svg.rect(x0, 40, panel_w, 220, "none", 1.0, "#999999");
  const double bw = panel_w / std::max<std::size_t>(rows.size(), 1) * 0.6;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double cx =
        x0 + (static_cast<double>(i) + 0.5) * panel_w / static_cast<double>(rows.size());
    const double h = std::clamp(rows[i].fraction, 0.0, 1.2) / 1.2 * 220;
    const char* color = rows[i].method == "state-machine" ? "#c0392b"
                        : rows[i].method == "truth"       ? "#777777"
                                                          : "#2a6fdb";
    svg.rect(cx - bw / 2, 260 - h, bw, h, color, 0.8);
    svg.text(cx, 278, rows[i].method, 11, "middle");
    svg.text(cx, 252 - h, format_num(100.0 * rows[i].fraction, 3) + "%", 11, "middle");
  }
  svg.text(W / 2, 20, "event recovery vs ground truth", 13, "middle");
  svg.save(path);
}

void transfer_heatmap(const std::vector<std::string>& row_names,
                      const std::vector<std::string>& col_names,
                      const std::vector<std::vector<double>>& values, const std::string& title,
                      const std::string& path) {
  const double cell = 70;
  const double W = 160 + cell * static_cast<double>(col_names.size());
  const double H = 110 + cell * static_cast<double>(row_names.size());
  SvgCanvas svg(W, H);
  svg.text(W / 2, 24, title, 13, "middle");
  double vmin = 1e300, vmax = -1e300;
  for (const auto& row : values)
    for (double v : row) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  if (!(vmax > vmin)) vmax = vmin + 1.0;
  for (std::size_t r = 0; r < row_names.size(); ++r) {
    for (std::size_t c = 0; c < col_names.size(); ++c) {
      const double v = values[r][c];
      const double t = (v - vmin) / (vmax - vmin);
      const int red = static_cast<int>(40 + 180 * (1.0 - t));
      const int green = static_cast<int>(60 + 150 * t);
      char color[16];
      std::snprintf(color, sizeof(color), "#%02x%02x6e", red, green);
      const double x = 140 + cell * static_cast<double>(c);
      const double y = 50 + cell * static_cast<double>(r);
      svg.rect(x, y, cell - 4, cell - 4, color);
      svg.text(x + (cell - 4) / 2, y + cell / 2, format_num(v, 4), 11, "middle", "#ffffff");
    }
    svg.text(132, 50 + cell * (static_cast<double>(r) + 0.5), row_names[r], 11, "end");
  }
  for (std::size_t c = 0; c < col_names.size(); ++c)
    svg.text(140 + cell * (static_cast<double>(c) + 0.5), H - 30, col_names[c], 11, "middle");
  svg.save(path);
}

void cam_strips(const fcn::FcnModel& model, const std::vector<LabeledSignal>& samples,
                const std::string& path) {
  const double W = 760;
  const double row_h = 90;
  const double H = 40 + row_h * static_cast<double>(samples.size());
  SvgCanvas svg(W, H);
  svg.text(W / 2, 22, "class activation maps", 13, "middle");
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& sig = samples[s];
    const double y0 = 40 + row_h * static_cast<double>(s);
    const auto cam = fcn::class_activation_map(model, sig.waveform, sig.count);
    double cmax = 1e-300;
    for (double v : cam) cmax = std::max(cmax, std::abs(v));
    double amax = 1e-300;
    for (double v : sig.waveform.samples) amax = std::max(amax, std::abs(v));

    const std::size_t n = sig.waveform.samples.size();
    std::vector<std::pair<double, double>> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = 70 + static_cast<double>(i) / static_cast<double>(n) * 620;
      pts.emplace_back(x, y0 + 28 - sig.waveform.samples[i] / amax * 26);
    }
    svg.polyline(pts, "#333333", 0.8);

    const int strips = 160;
    for (int b = 0; b < strips; ++b) {
      const std::size_t i = static_cast<std::size_t>(
          static_cast<double>(b) / strips * static_cast<double>(n));
      const double t = 0.5 + 0.5 * cam[std::min(i, n - 1)] / cmax;
      const int red = static_cast<int>(255 * std::clamp(t, 0.0, 1.0));
      const int blue = static_cast<int>(255 * std::clamp(1.0 - t, 0.0, 1.0));
      char color[16];
      std::snprintf(color, sizeof(color), "#%02x40%02x", red, blue);
      svg.rect(70 + static_cast<double>(b) / strips * 620, y0 + 58, 620.0 / strips + 0.5, 14,
               color);
    }
    svg.text(64, y0 + 34, "count " + std::to_string(sig.count), 11, "end");
  }
  svg.save(path);
}

}  // namespace codis::report
