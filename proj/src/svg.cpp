#include "polytransfer/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "polytransfer/error.hpp"

namespace polytransfer::svg {

namespace {

constexpr int kPlot = 400;    // plot area side in px
constexpr int kMargin = 50;
constexpr int kBarWidth = 16;

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

void Heatmap::validate() const {
  require(nx >= 2 && ny >= 2, "Heatmap: resolution must be at least 2 per axis");
  require(x_hi > x_lo && y_hi > y_lo, "Heatmap: empty extent");
  require(range > 0.0 && std::isfinite(range), "Heatmap: color range must be positive and finite");
  require_dim(values.size(), nx * ny, "Heatmap values");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("Heatmap: non-finite value in grid");
}

Heatmap sample_grid(const std::function<double(double, double)>& f, double x_lo, double x_hi, double y_lo,
                    double y_hi, std::size_t nx, std::size_t ny, double range, std::string title) {
  Heatmap h{x_lo, x_hi, y_lo, y_hi, nx, ny, std::vector<double>(nx * ny), range, std::move(title)};
  const double dx = (x_hi - x_lo) / static_cast<double>(nx);
  const double dy = (y_hi - y_lo) / static_cast<double>(ny);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(ny); ++j)
    for (std::size_t i = 0; i < nx; ++i)
      h.values[static_cast<std::size_t>(j) * nx + i] =
          f(x_lo + (static_cast<double>(i) + 0.5) * dx, y_lo + (static_cast<double>(j) + 0.5) * dy);
  return h;
}

Rgb diverging_color(double value, double range) {
  const double t = std::clamp(value / range, -1.0, 1.0);
  const auto mix = [](int from, int to, double s) { return static_cast<int>(std::lround(from + (to - from) * s)); };
  // Endpoints: blue (33, 102, 172), white, red (178, 24, 43).
  if (t < 0.0) return {mix(255, 33, -t), mix(255, 102, -t), mix(255, 172, -t)};
  return {mix(255, 178, t), mix(255, 24, t), mix(255, 43, t)};
}

void write_heatmap(std::ostream& out, const Heatmap& h) {
  h.validate();
  const int width = kMargin + kPlot + 20 + kBarWidth + kMargin + 10;
  const int height = kMargin + kPlot + kMargin;
  const double cw = static_cast<double>(kPlot) / static_cast<double>(h.nx);
  const double ch = static_cast<double>(kPlot) / static_cast<double>(h.ny);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!h.title.empty())
    out << "<text x=\"" << kMargin + kPlot / 2 << "\" y=\"" << kMargin / 2 << "\" text-anchor=\"middle\" font-size=\"13\">"
        << h.title << "</text>\n";

  // Cells; overlap by a hair to avoid seams in viewers that anti-alias edges.
  out << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t j = 0; j < h.ny; ++j) {
    const double y = kMargin + kPlot - static_cast<double>(j + 1) * ch;
    for (std::size_t i = 0; i < h.nx; ++i) {
      const double x = kMargin + static_cast<double>(i) * cw;
      out << "<rect x=\"" << px(x) << "\" y=\"" << px(y) << "\" width=\"" << px(cw + 0.05) << "\" height=\""
          << px(ch + 0.05) << "\" fill=\"" << hex(diverging_color(h.values[j * h.nx + i], h.range)) << "\"/>\n";
    }
  }
  out << "</g>\n";
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlot << "\" height=\"" << kPlot
      << "\" fill=\"none\" stroke=\"#000000\"/>\n";

  // Five ticks per axis.
  for (int k = 0; k <= 4; ++k) {
    const double s = k / 4.0;
    const double xv = h.x_lo + s * (h.x_hi - h.x_lo);
    const double yv = h.y_lo + s * (h.y_hi - h.y_lo);
    const double xp = kMargin + s * kPlot;
    const double yp = kMargin + kPlot - s * kPlot;
    out << "<line x1=\"" << px(xp) << "\" y1=\"" << kMargin + kPlot << "\" x2=\"" << px(xp) << "\" y2=\""
        << kMargin + kPlot + 5 << "\" stroke=\"#000000\"/>\n";
    out << "<text x=\"" << px(xp) << "\" y=\"" << kMargin + kPlot + 18 << "\" text-anchor=\"middle\">" << num(xv)
        << "</text>\n";
    out << "<line x1=\"" << kMargin - 5 << "\" y1=\"" << px(yp) << "\" x2=\"" << kMargin << "\" y2=\"" << px(yp)
        << "\" stroke=\"#000000\"/>\n";
    out << "<text x=\"" << kMargin - 8 << "\" y=\"" << px(yp + 4) << "\" text-anchor=\"end\">" << num(yv)
        << "</text>\n";
  }

  // Color bar, top = +range.
  const int bar_x = kMargin + kPlot + 20;
  constexpr int kSteps = 64;
  const double step_h = static_cast<double>(kPlot) / kSteps;
  for (int s = 0; s < kSteps; ++s) {
    const double v = h.range * (1.0 - 2.0 * (s + 0.5) / kSteps);
    out << "<rect x=\"" << bar_x << "\" y=\"" << px(kMargin + s * step_h) << "\" width=\"" << kBarWidth
        << "\" height=\"" << px(step_h + 0.05) << "\" fill=\"" << hex(diverging_color(v, h.range)) << "\"/>\n";
  }
  out << "<rect x=\"" << bar_x << "\" y=\"" << kMargin << "\" width=\"" << kBarWidth << "\" height=\"" << kPlot
      << "\" fill=\"none\" stroke=\"#000000\"/>\n";
  const double labels[3] = {h.range, 0.0, -h.range};
  for (int k = 0; k < 3; ++k)
    out << "<text x=\"" << bar_x + kBarWidth + 4 << "\" y=\"" << px(kMargin + k * kPlot / 2.0 + 4) << "\">"
        << num(labels[k]) << "</text>\n";
  out << "</svg>\n";
}

void emit_svg_heatmap(const Heatmap& h, const std::filesystem::path& path) {
  h.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  write_heatmap(out, h);
  if (!out) throw InvalidArgument("write failed for '" + path.string() + "'");
}

}  // namespace polytransfer::svg
