#pragma once

#include <functional>
#include <vector>

#include "vistrack/geometry.hpp"
#include "vistrack/rng.hpp"
#include "vistrack/tensor.hpp"

namespace vistrack {

// Learned weights of one affine layer: weights [out,in], bias [out].
struct OpParams {
  Tensor weights;
  Tensor bias;

  int out_channels() const { return weights.extent(0); }
  int in_channels() const { return weights.extent(1); }

  // Uniform fan-in init (+-1/sqrt(in)); parameters require grad.
  static OpParams init(int out_ch, int in_ch, Rng& rng);
  // Zero init, used for output transforms so attention starts as identity.
  static OpParams zeros(int out_ch, int in_ch);

  std::vector<Tensor> tensors() const { return {weights, bias}; }
};

// Elementwise and shape ops. All ops are pure in their inputs; when a Tape
// is active and an input requires grad, a backward node is recorded.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor sigmoid_op(const Tensor& x);
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]

Tensor reshape(const Tensor& x, std::vector<int> new_shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor stack0(const std::vector<Tensor>& parts);  // adds a leading axis
Tensor slice0(const Tensor& x, int index);        // removes the leading axis
Tensor space_to_depth(const Tensor& x, int block);
Tensor upsample2x(const Tensor& x);                       // nearest, [C,H,W]
Tensor spatial_mean(const Tensor& x);                     // [C,H,W] -> [C]
Tensor broadcast_spatial(const Tensor& v, int h, int w);  // [C]/[C,1,1] -> [C,H,W]
Tensor tile_scalar(const Tensor& s, int n);               // [1] -> [n]

// Linear algebra / model ops.
Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K]x[K,N]
Tensor conv1x1(const Tensor& x, const OpParams& p);
Tensor softmax_axis(const Tensor& x, int axis);
Tensor depthwise_xcorr(const Tensor& tmpl, const Tensor& search, bool pad);
Tensor roi_align(const Tensor& features, const Box& box, int out_h, int out_w,
                 int samples_per_bin = 2);

// loss = logsumexp(logits) - logits[target]; logits is a length-K vector.
Tensor softmax_cross_entropy(const Tensor& logits, int target);

// Central-difference check of the analytic gradients of fn w.r.t. every
// element of every input. fn must return a scalar tensor and be pure.
// Returns max over elements of |a-n| / max(1,|a|,|n|).
double grad_check(const std::function<Tensor(std::vector<Tensor>&)>& fn,
                  std::vector<Tensor> inputs, double eps);

// Plain SGD over a fixed parameter list.
struct Sgd {
  double lr = 1e-2;
  std::vector<Tensor> params;

  void zero_grad() {
    for (auto& p : params) p.zero_grad();
  }
  void step() {
    for (auto& p : params) {
      auto d = p.data();
      auto g = p.grad();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= lr * g[i];
    }
  }
};

namespace detail {
// Test hook: when set, conv1x1's weight gradient is perturbed. Used by the
// selftest negative control to prove corrupted backwards are detected.
extern bool corrupt_conv1x1_backward;
}  // namespace detail

}  // namespace vistrack
