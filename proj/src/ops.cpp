#include "vistrack/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "vistrack/kernels.hpp"

namespace vistrack {

namespace detail {
bool corrupt_conv1x1_backward = false;
}

namespace {

bool want_grad(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void mark_output(Tensor& out) { out.set_requires_grad(true); }

std::int64_t spatial_size(const Tensor& t, int channel_axis = 0) {
  std::int64_t n = 1;
  for (int a = channel_axis + 1; a < t.rank(); ++a) n *= t.extent(a);
  return n;
}

}  // namespace

OpParams OpParams::init(int out_ch, int in_ch, Rng& rng) {
  OpParams p;
  p.weights = Tensor({out_ch, in_ch});
  p.bias = Tensor({out_ch});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch));
  for (double& v : p.weights.data()) v = rng.uniform(-bound, bound);
  p.weights.set_requires_grad(true);
  p.bias.set_requires_grad(true);
  return p;
}

OpParams OpParams::zeros(int out_ch, int in_ch) {
  OpParams p;
  p.weights = Tensor({out_ch, in_ch});
  p.bias = Tensor({out_ch});
  p.weights.set_requires_grad(true);
  p.bias.set_requires_grad(true);
  return p;
}

Tensor add(const Tensor& a, const Tensor& b) {
  VT_CHECK(a.shape() == b.shape(), "add: shape mismatch " + shape_string(a.shape()) +
                                       " vs " + shape_string(b.shape()));
  Tensor out(a.shape());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
  if (want_grad({&a, &b})) {
    mark_output(out);
    Tape::active()->record([a = a, b = b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  VT_CHECK(a.shape() == b.shape(), "sub: shape mismatch " + shape_string(a.shape()) +
                                       " vs " + shape_string(b.shape()));
  Tensor out(a.shape());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
  if (want_grad({&a, &b})) {
    mark_output(out);
    Tape::active()->record([a = a, b = b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  VT_CHECK(a.shape() == b.shape(), "mul: shape mismatch " + shape_string(a.shape()) +
                                       " vs " + shape_string(b.shape()));
  Tensor out(a.shape());
  auto ad = a.data();
  auto bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
  if (want_grad({&a, &b})) {
    mark_output(out);
    Tape::active()->record([a = a, b = b, out]() mutable {
      auto g = out.grad();
      auto ad2 = a.data();
      auto bd2 = b.data();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd2[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad2[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  auto ad = a.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * s;
  if (want_grad({&a})) {
    mark_output(out);
    Tape::active()->record([a = a, out, s]() mutable {
      auto g = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out]() mutable {
      auto g = out.grad();
      auto xd2 = x.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xd2[i] > 0.0) gx[i] += g[i];
    });
  }
  return out;
}

Tensor sigmoid_op(const Tensor& x) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    const double v = xd[i];
    od[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out]() mutable {
      auto g = out.grad();
      auto od2 = out.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * od2[i] * (1.0 - od2[i]);
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out]() mutable {
      const double g = out.grad()[0];
      auto gx = x.grad();
      for (double& v : gx) v += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  VT_CHECK(x.size() > 0, "mean_all: empty tensor");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double n = static_cast<double>(x.size());
  Tensor out = Tensor::scalar(acc / n);
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out, n]() mutable {
      const double g = out.grad()[0] / n;
      auto gx = x.grad();
      for (double& v : gx) v += g;
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  std::int64_t n = 1;
  for (int e : new_shape) n *= e;
  VT_CHECK(n == x.size(), "reshape: " + shape_string(x.shape()) + " has " +
                              std::to_string(x.size()) + " elements, target " +
                              shape_string(new_shape));
  Tensor out = Tensor::from(std::move(new_shape),
                            std::vector<double>(x.data().begin(), x.data().end()));
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

namespace {

// Maps each output flat index to the source flat index for a permutation.
std::vector<std::int64_t> permute_index_map(const std::vector<int>& in_shape,
                                            const std::vector<int>& axes) {
  const int r = static_cast<int>(in_shape.size());
  std::vector<std::int64_t> in_strides(r, 1);
  for (int a = r - 2; a >= 0; --a) in_strides[a] = in_strides[a + 1] * in_shape[a + 1];
  std::vector<int> out_shape(r);
  for (int a = 0; a < r; ++a) out_shape[a] = in_shape[axes[a]];
  std::int64_t total = 1;
  for (int e : out_shape) total *= e;
  std::vector<std::int64_t> map(static_cast<std::size_t>(total));
  std::vector<int> idx(r, 0);
  for (std::int64_t o = 0; o < total; ++o) {
    std::int64_t src = 0;
    for (int a = 0; a < r; ++a) src += static_cast<std::int64_t>(idx[a]) * in_strides[axes[a]];
    map[static_cast<std::size_t>(o)] = src;
    for (int a = r - 1; a >= 0; --a) {
      if (++idx[a] < out_shape[a]) break;
      idx[a] = 0;
    }
  }
  return map;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  VT_CHECK(static_cast<int>(axes.size()) == x.rank(), "permute: axes rank mismatch");
  std::vector<int> seen(axes.size(), 0);
  for (int a : axes) {
    VT_CHECK(a >= 0 && a < x.rank() && !seen[a], "permute: invalid axes");
    seen[a] = 1;
  }
  std::vector<int> out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) out_shape[i] = x.extent(axes[i]);
  auto map = permute_index_map(x.shape(), axes);
  Tensor out(out_shape);
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t o = 0; o < map.size(); ++o) od[o] = xd[static_cast<std::size_t>(map[o])];
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out, map]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t o = 0; o < map.size(); ++o) gx[static_cast<std::size_t>(map[o])] += g[o];
    });
  }
  return out;
}

Tensor stack0(const std::vector<Tensor>& parts) {
  VT_CHECK(!parts.empty(), "stack0: empty input list");
  const auto& base = parts[0].shape();
  for (const auto& p : parts)
    VT_CHECK(p.shape() == base, "stack0: mismatched part shape " + shape_string(p.shape()));
  std::vector<int> out_shape;
  out_shape.push_back(static_cast<int>(parts.size()));
  out_shape.insert(out_shape.end(), base.begin(), base.end());
  Tensor out(out_shape);
  const std::int64_t stride = parts[0].size();
  auto od = out.data();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto pd = parts[i].data();
    std::copy(pd.begin(), pd.end(), od.begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  bool need = false;
  if (Tape::active() != nullptr)
    for (const auto& p : parts) need = need || p.requires_grad();
  if (need) {
    mark_output(out);
    Tape::active()->record([parts = parts, out, stride]() mutable {
      auto g = out.grad();
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i].requires_grad()) continue;
        auto gp = parts[i].grad();
        const auto* src = g.data() + static_cast<std::ptrdiff_t>(i * stride);
        for (std::int64_t j = 0; j < stride; ++j) gp[static_cast<std::size_t>(j)] += src[j];
      }
    });
  }
  return out;
}

Tensor slice0(const Tensor& x, int index) {
  VT_CHECK(x.rank() >= 1, "slice0: rank must be >= 1");
  VT_CHECK(index >= 0 && index < x.extent(0),
           "slice0: index " + std::to_string(index) + " out of range " +
               std::to_string(x.extent(0)));
  std::vector<int> out_shape(x.shape().begin() + 1, x.shape().end());
  const std::int64_t stride = spatial_size(x, 0);
  Tensor out(out_shape);
  auto xd = x.data();
  auto od = out.data();
  std::copy(xd.begin() + static_cast<std::ptrdiff_t>(index * stride),
            xd.begin() + static_cast<std::ptrdiff_t>((index + 1) * stride), od.begin());
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out, index, stride]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      double* dst = gx.data() + static_cast<std::ptrdiff_t>(index * stride);
      for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
    });
  }
  return out;
}

Tensor space_to_depth(const Tensor& x, int block) {
  VT_CHECK(x.rank() == 3, "space_to_depth: expected [C,H,W], got " + shape_string(x.shape()));
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  VT_CHECK(block > 0 && h % block == 0 && w % block == 0,
           "space_to_depth: extents " + std::to_string(h) + "x" + std::to_string(w) +
               " not divisible by block " + std::to_string(block));
  const int oh = h / block, ow = w / block;
  Tensor out({c * block * block, oh, ow});
  auto xd = x.data();
  auto od = out.data();
  for (int ci = 0; ci < c; ++ci)
    for (int dy = 0; dy < block; ++dy)
      for (int dx = 0; dx < block; ++dx) {
        const int oc = (ci * block + dy) * block + dx;
        for (int y = 0; y < oh; ++y)
          for (int xq = 0; xq < ow; ++xq)
            od[(static_cast<std::int64_t>(oc) * oh + y) * ow + xq] =
                xd[(static_cast<std::int64_t>(ci) * h + y * block + dy) * w + xq * block + dx];
      }
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out, c, h, w, block, oh, ow]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (int ci = 0; ci < c; ++ci)
        for (int dy = 0; dy < block; ++dy)
          for (int dx = 0; dx < block; ++dx) {
            const int oc = (ci * block + dy) * block + dx;
            for (int y = 0; y < oh; ++y)
              for (int xq = 0; xq < ow; ++xq)
                gx[(static_cast<std::int64_t>(ci) * h + y * block + dy) * w + xq * block + dx] +=
                    g[(static_cast<std::int64_t>(oc) * oh + y) * ow + xq];
          }
    });
  }
  return out;
}

Tensor upsample2x(const Tensor& x) {
  VT_CHECK(x.rank() == 3, "upsample2x: expected [C,H,W], got " + shape_string(x.shape()));
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  Tensor out({c, 2 * h, 2 * w});
  auto xd = x.data();
  auto od = out.data();
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < 2 * h; ++y)
      for (int xq = 0; xq < 2 * w; ++xq)
        od[(static_cast<std::int64_t>(ci) * 2 * h + y) * 2 * w + xq] =
            xd[(static_cast<std::int64_t>(ci) * h + y / 2) * w + xq / 2];
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out, c, h, w]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < 2 * h; ++y)
          for (int xq = 0; xq < 2 * w; ++xq)
            gx[(static_cast<std::int64_t>(ci) * h + y / 2) * w + xq / 2] +=
                g[(static_cast<std::int64_t>(ci) * 2 * h + y) * 2 * w + xq];
    });
  }
  return out;
}

Tensor spatial_mean(const Tensor& x) {
  VT_CHECK(x.rank() == 3, "spatial_mean: expected [C,H,W], got " + shape_string(x.shape()));
  const int c = x.extent(0);
  const std::int64_t npix = spatial_size(x);
  VT_CHECK(npix > 0, "spatial_mean: empty spatial extents");
  Tensor out({c});
  auto xd = x.data();
  auto od = out.data();
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    for (std::int64_t p = 0; p < npix; ++p) acc += xd[static_cast<std::size_t>(ci * npix + p)];
    od[static_cast<std::size_t>(ci)] = acc / static_cast<double>(npix);
  }
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out, c, npix]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (int ci = 0; ci < c; ++ci) {
        const double gv = g[static_cast<std::size_t>(ci)] / static_cast<double>(npix);
        for (std::int64_t p = 0; p < npix; ++p) gx[static_cast<std::size_t>(ci * npix + p)] += gv;
      }
    });
  }
  return out;
}

Tensor broadcast_spatial(const Tensor& v, int h, int w) {
  VT_CHECK(v.rank() == 1 || (v.rank() == 3 && v.extent(1) == 1 && v.extent(2) == 1),
           "broadcast_spatial: expected [C] or [C,1,1], got " + shape_string(v.shape()));
  const int c = v.extent(0);
  Tensor out({c, h, w});
  auto vd = v.data();
  auto od = out.data();
  const std::int64_t npix = static_cast<std::int64_t>(h) * w;
  for (int ci = 0; ci < c; ++ci)
    for (std::int64_t p = 0; p < npix; ++p)
      od[static_cast<std::size_t>(ci * npix + p)] = vd[static_cast<std::size_t>(ci)];
  if (want_grad({&v})) {
    mark_output(out);
    Tape::active()->record([v = v, out, c, npix]() mutable {
      auto g = out.grad();
      auto gv = v.grad();
      for (int ci = 0; ci < c; ++ci) {
        double acc = 0.0;
        for (std::int64_t p = 0; p < npix; ++p) acc += g[static_cast<std::size_t>(ci * npix + p)];
        gv[static_cast<std::size_t>(ci)] += acc;
      }
    });
  }
  return out;
}

Tensor tile_scalar(const Tensor& s, int n) {
  VT_CHECK(s.size() == 1, "tile_scalar: expected a scalar, shape is " + shape_string(s.shape()));
  Tensor out = Tensor::full({n}, s.data()[0]);
  if (want_grad({&s})) {
    mark_output(out);
    Tape::active()->record([s = s, out]() mutable {
      auto g = out.grad();
      double acc = 0.0;
      for (double v : g) acc += v;
      s.grad()[0] += acc;
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  VT_CHECK(a.rank() == 2 && b.rank() == 2, "matmul: expected rank-2 inputs");
  VT_CHECK(a.extent(1) == b.extent(0),
           "matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
               shape_string(b.shape()));
  const int m = a.extent(0), k = a.extent(1), n = b.extent(1);
  Tensor out({m, n});
  kernels::matmul(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (want_grad({&a, &b})) {
    mark_output(out);
    Tape::active()->record([a = a, b = b, out, m, k, n]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        Tensor ga({m, k});
        kernels::matmul_nt(g.data(), b.data().data(), ga.data().data(), m, n, k);
        auto gad = a.grad();
        auto gat = ga.data();
        for (std::size_t i = 0; i < gad.size(); ++i) gad[i] += gat[i];
      }
      if (b.requires_grad()) {
        Tensor gb({k, n});
        kernels::matmul_tn(a.data().data(), g.data(), gb.data().data(), k, m, n);
        auto gbd = b.grad();
        auto gbt = gb.data();
        for (std::size_t i = 0; i < gbd.size(); ++i) gbd[i] += gbt[i];
      }
    });
  }
  return out;
}

Tensor conv1x1(const Tensor& x, const OpParams& p) {
  VT_CHECK(x.rank() >= 1, "conv1x1: input must have a channel axis");
  VT_CHECK(p.weights.rank() == 2, "conv1x1: weights must be [out,in]");
  VT_CHECK(p.bias.rank() == 1 && p.bias.extent(0) == p.weights.extent(0),
           "conv1x1: bias extent " + std::to_string(p.bias.extent(0)) +
               " must equal out channels " + std::to_string(p.weights.extent(0)));
  const int cin = x.extent(0);
  VT_CHECK(p.weights.extent(1) == cin,
           "conv1x1: weights expect in channels " + std::to_string(p.weights.extent(1)) +
               ", input has " + std::to_string(cin));
  const int cout = p.weights.extent(0);
  const std::int64_t npix = spatial_size(x);
  std::vector<int> out_shape = x.shape();
  out_shape[0] = cout;
  Tensor out(out_shape);
  kernels::conv1x1_forward(x.data().data(), p.weights.data().data(), p.bias.data().data(),
                           out.data().data(), cin, cout, static_cast<int>(npix));
  Tensor w = p.weights, bias = p.bias;
  if (want_grad({&x, &w, &bias})) {
    mark_output(out);
    Tape::active()->record([x = x, w, bias, out, cin, cout, npix]() mutable {
      auto g = out.grad();
      if (x.requires_grad())
        kernels::conv1x1_backward_input(g.data(), w.data().data(), x.grad().data(), cin, cout,
                                        static_cast<int>(npix));
      if (w.requires_grad()) {
        kernels::conv1x1_backward_weights(g.data(), x.data().data(), w.grad().data(), cin, cout,
                                          static_cast<int>(npix));
        if (detail::corrupt_conv1x1_backward) w.grad()[0] += 1e-2;
      }
      if (bias.requires_grad())
        kernels::conv1x1_backward_bias(g.data(), bias.grad().data(), cout,
                                       static_cast<int>(npix));
    });
  }
  return out;
}

Tensor softmax_axis(const Tensor& x, int axis) {
  VT_CHECK(axis >= 0 && axis < x.rank(),
           "softmax_axis: axis " + std::to_string(axis) + " out of range for rank " +
               std::to_string(x.rank()));
  const int extent = x.extent(axis);
  VT_CHECK(extent > 0, "softmax_axis: empty axis " + std::to_string(axis));
  std::int64_t inner = 1, outer = 1;
  for (int a = axis + 1; a < x.rank(); ++a) inner *= x.extent(a);
  for (int a = 0; a < axis; ++a) outer *= x.extent(a);

  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      const std::int64_t base = o * extent * inner + i;
      double mx = xd[static_cast<std::size_t>(base)];
      for (int e = 1; e < extent; ++e)
        mx = std::max(mx, xd[static_cast<std::size_t>(base + e * inner)]);
      double denom = 0.0;
      for (int e = 0; e < extent; ++e) {
        const double v = std::exp(xd[static_cast<std::size_t>(base + e * inner)] - mx);
        od[static_cast<std::size_t>(base + e * inner)] = v;
        denom += v;
      }
      for (int e = 0; e < extent; ++e) od[static_cast<std::size_t>(base + e * inner)] /= denom;
    }
  }
  if (want_grad({&x})) {
    mark_output(out);
    Tape::active()->record([x = x, out, extent, inner, outer]() mutable {
      auto g = out.grad();
      auto od2 = out.data();
      auto gx = x.grad();
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t i = 0; i < inner; ++i) {
          const std::int64_t base = o * extent * inner + i;
          double dot = 0.0;
          for (int e = 0; e < extent; ++e) {
            const auto k = static_cast<std::size_t>(base + e * inner);
            dot += g[k] * od2[k];
          }
          for (int e = 0; e < extent; ++e) {
            const auto k = static_cast<std::size_t>(base + e * inner);
            gx[k] += od2[k] * (g[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor depthwise_xcorr(const Tensor& tmpl, const Tensor& search, bool pad) {
  VT_CHECK(tmpl.rank() == 3 && search.rank() == 3,
           "depthwise_xcorr: expected [C,h,w] template and [C,H,W] search");
  VT_CHECK(tmpl.extent(0) == search.extent(0),
           "depthwise_xcorr: channel counts disagree, template " +
               std::to_string(tmpl.extent(0)) + " vs search " + std::to_string(search.extent(0)));
  const int c = tmpl.extent(0);
  const int th = tmpl.extent(1), tw = tmpl.extent(2);
  const int sh = search.extent(1), sw = search.extent(2);
  // Asymmetric padding keeps output extents equal to the search extents and
  // centers the template at the output location (center index h/2, w/2).
  const int pad_top = pad ? th / 2 : 0;
  const int pad_left = pad ? tw / 2 : 0;
  const int pad_bottom = pad ? th - 1 - pad_top : 0;
  const int pad_right = pad ? tw - 1 - pad_left : 0;
  const int oh = sh + pad_top + pad_bottom - th + 1;
  const int ow = sw + pad_left + pad_right - tw + 1;
  VT_CHECK(oh >= 1, "depthwise_xcorr: template height " + std::to_string(th) +
                        " exceeds padded search height " + std::to_string(sh + pad_top + pad_bottom));
  VT_CHECK(ow >= 1, "depthwise_xcorr: template width " + std::to_string(tw) +
                        " exceeds padded search width " + std::to_string(sw + pad_left + pad_right));

  Tensor out({c, oh, ow});
  kernels::xcorr_forward(tmpl.data().data(), search.data().data(), out.data().data(), c, th, tw,
                         sh, sw, pad_top, pad_left, oh, ow);
  if (want_grad({&tmpl, &search})) {
    mark_output(out);
    Tape::active()->record([tmpl = tmpl, search = search, out, c, th, tw, sh, sw, pad_top,
                            pad_left, oh, ow]() mutable {
      auto g = out.grad();
      if (tmpl.requires_grad())
        kernels::xcorr_backward_template(g.data(), search.data().data(), tmpl.grad().data(), c,
                                         th, tw, sh, sw, pad_top, pad_left, oh, ow);
      if (search.requires_grad())
        kernels::xcorr_backward_search(g.data(), tmpl.data().data(), search.grad().data(), c, th,
                                       tw, sh, sw, pad_top, pad_left, oh, ow);
    });
  }
  return out;
}

Tensor roi_align(const Tensor& features, const Box& box, int out_h, int out_w,
                 int samples_per_bin) {
  VT_CHECK(features.rank() == 3, "roi_align: expected [C,H,W] features");
  VT_CHECK(out_h > 0 && out_w > 0, "roi_align: output extents must be positive, got " +
                                       std::to_string(out_h) + "x" + std::to_string(out_w));
  VT_CHECK(box.w > 0.0 && box.h > 0.0, "roi_align: degenerate box with w=" +
                                           std::to_string(box.w) + " h=" + std::to_string(box.h));
  VT_CHECK(samples_per_bin > 0, "roi_align: samples_per_bin must be positive");
  const int c = features.extent(0), h = features.extent(1), w = features.extent(2);
  Tensor out({c, out_h, out_w});
  kernels::roi_align_forward(features.data().data(), out.data().data(), c, h, w, box.x, box.y,
                             box.w, box.h, out_h, out_w, samples_per_bin);
  if (want_grad({&features})) {
    mark_output(out);
    Tape::active()->record([features = features, out, box, c, h, w, out_h, out_w, samples_per_bin]() mutable {
      kernels::roi_align_backward(out.grad().data(), features.grad().data(), c, h, w, box.x,
                                  box.y, box.w, box.h, out_h, out_w, samples_per_bin);
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, int target) {
  VT_CHECK(logits.rank() == 1, "softmax_cross_entropy: logits must be a vector");
  const int k = logits.extent(0);
  VT_CHECK(target >= 0 && target < k,
           "softmax_cross_entropy: target " + std::to_string(target) + " out of range " +
               std::to_string(k));
  auto ld = logits.data();
  double mx = ld[0];
  for (int i = 1; i < k; ++i) mx = std::max(mx, ld[static_cast<std::size_t>(i)]);
  double denom = 0.0;
  for (int i = 0; i < k; ++i) denom += std::exp(ld[static_cast<std::size_t>(i)] - mx);
  const double loss = std::log(denom) + mx - ld[static_cast<std::size_t>(target)];
  Tensor out = Tensor::scalar(loss);
  if (want_grad({&logits})) {
    mark_output(out);
    Tape::active()->record([logits = logits, out, target, mx, denom, k]() mutable {
      const double g = out.grad()[0];
      auto ld2 = logits.data();
      auto gl = logits.grad();
      for (int i = 0; i < k; ++i) {
        const double p = std::exp(ld2[static_cast<std::size_t>(i)] - mx) / denom;
        gl[static_cast<std::size_t>(i)] += g * (p - (i == target ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& fn,
                  std::vector<Tensor> inputs, double eps) {
  VT_CHECK(eps >= 1e-6 && eps <= 1e-3, "grad_check: eps must lie in [1e-6, 1e-3]");
  for (auto& t : inputs) {
    VT_CHECK(t.all_finite(), "grad_check: non-finite input");
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor loss = fn(inputs);
    VT_CHECK(loss.size() == 1, "grad_check: fn must return a scalar, shape is " +
                                   shape_string(loss.shape()));
    tape.backward(loss);
    for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());
  }
  double max_err = 0.0;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto d = inputs[ti].data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double saved = d[i];
      d[i] = saved + eps;
      const double f_plus = fn(inputs).item();
      d[i] = saved - eps;
      const double f_minus = fn(inputs).item();
      d[i] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[ti][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace vistrack
