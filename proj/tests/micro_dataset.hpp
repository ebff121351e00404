#pragma once

// Hand-built three-video evaluation fixture with one deliberate false
// positive and one missed ground truth, small enough that the 101-point
// AP/AR values can be derived by hand:
//   category a: G1 covered exactly (score .9), G2 covered on one of its two
//               frames (st-iou 0.5, score .8)
//   category b: G3 and G4 present, the only prediction (score .7) overlaps
//               neither, so it is a false positive and both gts are missed.
// AP(a, t<=0.50) = 1, AP(a, t>0.50) = 51/101, AP(b, *) = 0.

#include <vector>

#include "vistrack/eval.hpp"

namespace microdataset {

inline vistrack::Mask rect_mask(int h, int w, int y0, int x0, int hh, int ww) {
  vistrack::Mask m(h, w);
  for (int y = y0; y < y0 + hh; ++y)
    for (int x = x0; x < x0 + ww; ++x) m.set(y, x, true);
  return m;
}

inline vistrack::InstanceEntry rect_entry(int frame, int y0, int x0, int hh, int ww) {
  vistrack::InstanceEntry e;
  e.frame = frame;
  e.mask = rect_mask(4, 4, y0, x0, hh, ww);
  e.box = vistrack::Box{static_cast<double>(x0), static_cast<double>(y0),
                        static_cast<double>(ww), static_cast<double>(hh)};
  return e;
}

struct Micro {
  std::vector<vistrack::Instance> gts;
  std::vector<vistrack::Instance> preds;
};

inline Micro build() {
  using vistrack::Instance;
  Micro m;

  Instance g1{0, 1, "a", 1.0, {rect_entry(0, 0, 0, 2, 2), rect_entry(1, 0, 0, 2, 2)}};
  Instance g2{1, 1, "a", 1.0, {rect_entry(0, 0, 0, 2, 2), rect_entry(1, 0, 0, 2, 2)}};
  Instance g3{2, 1, "b", 1.0, {rect_entry(0, 0, 0, 2, 2)}};
  Instance g4{2, 2, "b", 1.0, {rect_entry(0, 2, 2, 2, 2)}};
  m.gts = {g1, g2, g3, g4};

  Instance p1{0, 1, "a", 0.9, {rect_entry(0, 0, 0, 2, 2), rect_entry(1, 0, 0, 2, 2)}};
  Instance p2{1, 1, "a", 0.8, {rect_entry(0, 0, 0, 2, 2)}};   // st-iou 0.5 with g2
  Instance p3{2, 1, "b", 0.7, {rect_entry(0, 0, 2, 2, 2)}};   // overlaps neither b gt
  m.preds = {p1, p2, p3};
  return m;
}

inline double expected_category_a_high_threshold_ap() { return 51.0 / 101.0; }

inline double expected_mean_ap() {
  const double cat_a = (1.0 + 9.0 * expected_category_a_high_threshold_ap()) / 10.0;
  return (cat_a + 0.0) / 2.0;
}

inline double expected_ap50() { return (1.0 + 0.0) / 2.0; }
inline double expected_ap75() { return (expected_category_a_high_threshold_ap() + 0.0) / 2.0; }

inline double expected_ar() {
  const double cat_a = (1.0 + 9.0 * 0.5) / 10.0;  // both matched at .50, one above
  return (cat_a + 0.0) / 2.0;
}

}  // namespace microdataset
