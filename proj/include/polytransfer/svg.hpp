#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace polytransfer::svg {

// Values on a regular grid over [x_lo, x_hi] x [y_lo, y_hi]; cell (i, j)
// covers the i-th column from the left and the j-th row from the bottom and
// is stored at values[j * nx + i].
struct Heatmap {
  double x_lo = 0.0, x_hi = 1.0;
  double y_lo = 0.0, y_hi = 1.0;
  std::size_t nx = 2, ny = 2;
  std::vector<double> values;
  double range = 1.0;  // color scale runs over [-range, range], clipped
  std::string title;

  void validate() const;
};

// Grid of f at cell centres.
Heatmap sample_grid(const std::function<double(double, double)>& f, double x_lo, double x_hi, double y_lo,
                    double y_hi, std::size_t nx, std::size_t ny, double range, std::string title = {});

struct Rgb {
  int r, g, b;
  bool operator==(const Rgb&) const = default;
};

// Blue at -range, white at 0, red at +range.
Rgb diverging_color(double value, double range);

void write_heatmap(std::ostream& out, const Heatmap& h);
void emit_svg_heatmap(const Heatmap& h, const std::filesystem::path& path);

}  // namespace polytransfer::svg
