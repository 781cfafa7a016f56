#include "codis/svg.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace codis {

std::string format_num(double v, int sig) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig, v);
  return buf;
}

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill,
                     double opacity, const std::string& stroke) {
  body_ << "<rect x=\"" << format_num(x) << "\" y=\"" << format_num(y) << "\" width=\""
        << format_num(w) << "\" height=\"" << format_num(h) << "\" fill=\"" << fill
        << "\" stroke=\"" << stroke << "\"";
  if (opacity < 1.0) body_ << " fill-opacity=\"" << format_num(opacity) << "\"";
  body_ << "/>\n";
}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     double width) {
  body_ << "<line x1=\"" << format_num(x1) << "\" y1=\"" << format_num(y1) << "\" x2=\""
        << format_num(x2) << "\" y2=\"" << format_num(y2) << "\" stroke=\"" << stroke
        << "\" stroke-width=\"" << format_num(width) << "\"/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& pts,
                         const std::string& stroke, double width) {
  body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
        << format_num(width) << "\" points=\"";
  for (const auto& [x, y] : pts) body_ << format_num(x) << "," << format_num(y) << " ";
  body_ << "\"/>\n";
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill, double opacity) {
  body_ << "<circle cx=\"" << format_num(cx) << "\" cy=\"" << format_num(cy) << "\" r=\""
        << format_num(r) << "\" fill=\"" << fill << "\"";
  if (opacity < 1.0) body_ << " fill-opacity=\"" << format_num(opacity) << "\"";
  body_ << "/>\n";
}

void SvgCanvas::text(double x, double y, const std::string& s, double size,
                     const std::string& anchor, const std::string& fill) {
  body_ << "<text x=\"" << format_num(x) << "\" y=\"" << format_num(y) << "\" font-size=\""
        << format_num(size) << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor
        << "\" fill=\"" << fill << "\">" << s << "</text>\n";
}

std::string SvgCanvas::str() const {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_num(width_)
     << "\" height=\"" << format_num(height_) << "\" viewBox=\"0 0 " << format_num(width_)
     << " " << format_num(height_) << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
     << body_.str() << "</svg>\n";
  return os.str();
}

void SvgCanvas::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << str();
}

}  // namespace codis
