#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace vistrack {

// Axis-aligned box in continuous coordinates, (x,y) top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
  double area() const { return w * h; }
  Box scaled(double s) const { return {x * s, y * s, w * s, h * s}; }
};

inline double box_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// Binary mask on a pixel grid, row-major.
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int height, int width) : h(height), w(width), data(static_cast<std::size_t>(height) * width, 0) {}

  bool at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x] != 0; }
  void set(int y, int x, bool v) { data[static_cast<std::size_t>(y) * w + x] = v ? 1 : 0; }
  int area() const {
    int n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }
  bool empty_mask() const { return area() == 0; }
};

// Tight bounding box of the set pixels; returns false if the mask is empty.
bool tight_box(const Mask& m, Box& out);

// Uncompressed row-major run-length counts, starting with the run of zeros.
std::vector<int> rle_encode(const Mask& m);
Mask rle_decode(const std::vector<int>& counts, int h, int w);

}  // namespace vistrack
