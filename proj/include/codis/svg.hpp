#ifndef CODIS_SVG_HPP
#define CODIS_SVG_HPP

#include <sstream>
#include <string>
#include <vector>

namespace codis {

// Minimal deterministic SVG emitter for the report plots.
class SvgCanvas {
 public:
  SvgCanvas(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            double opacity = 1.0, const std::string& stroke = "none");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.0);
  void circle(double cx, double cy, double r, const std::string& fill, double opacity = 1.0);
  void text(double x, double y, const std::string& s, double size = 11.0,
            const std::string& anchor = "start", const std::string& fill = "#333333");
  void save(const std::string& path) const;
  std::string str() const;

 private:
  double width_, height_;
  std::ostringstream body_;
};

// linear data->pixel mapping for one axis
struct AxisScale {
  double lo = 0.0, hi = 1.0;
  double px0 = 0.0, px1 = 1.0;
  double operator()(double v) const {
    return hi > lo ? px0 + (v - lo) / (hi - lo) * (px1 - px0) : 0.5 * (px0 + px1);
  }
};

std::string format_num(double v, int sig = 6);

}  // namespace codis

#endif
