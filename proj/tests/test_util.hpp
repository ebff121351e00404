#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vistrack/rng.hpp"
#include "vistrack/tensor.hpp"

namespace testutil {

inline vistrack::Tensor random_tensor(std::vector<int> shape, vistrack::Rng& rng,
                                      double lo = -1.0, double hi = 1.0) {
  vistrack::Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const vistrack::Tensor& a, const vistrack::Tensor& b) {
  if (a.shape() != b.shape()) return 1e300;
  double m = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

}  // namespace testutil
