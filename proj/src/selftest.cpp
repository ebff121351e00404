#include "vistrack/selftest.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <vector>

#include "vistrack/attention.hpp"
#include "vistrack/detector.hpp"
#include "vistrack/tracker.hpp"

namespace vistrack {

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

struct Runner {
  const SelftestOptions& options;
  std::ostream& out;
  bool all_ok = true;

  bool wants(const std::string& module) const {
    return options.module.empty() || options.module == module;
  }

  void report(const std::string& module, const std::string& name, double err, double limit) {
    const bool ok = err < limit;
    all_ok = all_ok && ok;
    out << (ok ? "ok   " : "FAIL ") << module << "/" << name << "  err=" << std::scientific
        << std::setprecision(2) << err << "  limit=" << limit << "\n";
  }
};

}  // namespace

bool run_selftest(const SelftestOptions& options, std::ostream& out) {
  Runner r{options, out};
  const double eps = options.eps;
  const double kGradLimit = 1e-5;
  detail::corrupt_conv1x1_backward = options.corrupt_backward;

  if (r.wants("tensor")) {
    Rng rng(2024);
    {
      OpParams p;
      p.weights = random_tensor({3, 4}, rng);
      p.bias = random_tensor({3}, rng);
      double err = grad_check(
          [&](std::vector<Tensor>& in) {
            OpParams q{in[1], in[2]};
            Tensor y = conv1x1(in[0], q);
            return mean_all(mul(y, y));
          },
          {random_tensor({4, 3, 3}, rng), p.weights.clone(), p.bias.clone()}, eps);
      r.report("tensor", "conv1x1_grad", err, kGradLimit);
    }
    {
      double err = grad_check(
          [](std::vector<Tensor>& in) {
            Tensor y = softmax_axis(in[0], 0);
            return sum_all(mul(y, y));
          },
          {random_tensor({6}, rng)}, eps);
      r.report("tensor", "softmax_grad", err, kGradLimit);
    }
    {
      double err = grad_check(
          [](std::vector<Tensor>& in) {
            Tensor y = depthwise_xcorr(in[0], in[1], true);
            return mean_all(mul(y, y));
          },
          {random_tensor({2, 3, 3}, rng), random_tensor({2, 5, 5}, rng)}, eps);
      r.report("tensor", "depthwise_xcorr_grad", err, kGradLimit);
    }
    {
      double err = grad_check(
          [](std::vector<Tensor>& in) {
            Tensor y = roi_align(in[0], Box{0.7, 1.1, 2.6, 2.2}, 3, 3, 2);
            return mean_all(mul(y, y));
          },
          {random_tensor({2, 6, 6}, rng)}, eps);
      r.report("tensor", "roi_align_grad", err, kGradLimit);
    }
    {
      double err = grad_check(
          [](std::vector<Tensor>& in) { return mean_all(mul(matmul(in[0], in[1]), matmul(in[0], in[1]))); },
          {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}, eps);
      r.report("tensor", "matmul_grad", err, kGradLimit);
    }
    {
      // Per-pixel matvec oracle for conv1x1.
      Tensor x = random_tensor({3, 2, 2}, rng);
      OpParams p;
      p.weights = random_tensor({2, 3}, rng);
      p.bias = random_tensor({2}, rng);
      Tensor got = conv1x1(x, p);
      double err = 0.0;
      for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 2; ++y)
          for (int xx = 0; xx < 2; ++xx) {
            double want = p.bias.at({c});
            for (int k = 0; k < 3; ++k) want += p.weights.at({c, k}) * x.at({k, y, xx});
            err = std::max(err, std::abs(got.at({c, y, xx}) - want));
          }
      r.report("tensor", "conv1x1_oracle", err, 1e-12);
    }
    {
      // Direct exp/sum oracle for softmax.
      Tensor x = random_tensor({5}, rng, -2.0, 2.0);
      Tensor got = softmax_axis(x, 0);
      double denom = 0.0;
      for (int i = 0; i < 5; ++i) denom += std::exp(x.at({i}));
      double err = 0.0;
      for (int i = 0; i < 5; ++i) err = std::max(err, std::abs(got.at({i}) - std::exp(x.at({i})) / denom));
      r.report("tensor", "softmax_oracle", err, 1e-13);
    }
    {
      // Brute-force sliding window for the correlation.
      Tensor tmpl = random_tensor({2, 2, 2}, rng);
      Tensor search = random_tensor({2, 4, 4}, rng);
      Tensor got = depthwise_xcorr(tmpl, search, false);
      double err = 0.0;
      for (int c = 0; c < 2; ++c)
        for (int oy = 0; oy < 3; ++oy)
          for (int ox = 0; ox < 3; ++ox) {
            double want = 0.0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx)
                want += tmpl.at({c, dy, dx}) * search.at({c, oy + dy, ox + dx});
            err = std::max(err, std::abs(got.at({c, oy, ox}) - want));
          }
      r.report("tensor", "depthwise_xcorr_oracle", err, 1e-12);
    }
  }

  if (r.wants("attention")) {
    Rng rng(4096);
    AttentionParams p = AttentionParams::init(4, 4, rng);
    for (double& v : p.output_transform.weights.data()) v = rng.uniform(-0.5, 0.5);
    for (double& v : p.channel_transform_2.weights.data()) v = rng.uniform(-0.5, 0.5);
    {
      double err = grad_check(
          [&](std::vector<Tensor>& in) {
            Tensor y = temporal_attention(in[0], embed_support({in[1]}, p), p);
            return mean_all(mul(y, y));
          },
          {random_tensor({4, 2, 2}, rng), random_tensor({4, 2, 2}, rng)}, eps);
      r.report("attention", "temporal_attention_grad", err, kGradLimit);
    }
    {
      double err = grad_check(
          [&](std::vector<Tensor>& in) {
            Tensor y = channel_attention(in[0], p);
            return mean_all(mul(y, y));
          },
          {random_tensor({4, 3, 3}, rng)}, eps);
      r.report("attention", "channel_attention_grad", err, kGradLimit);
    }
    {
      AttentionParams zero = AttentionParams::init(4, 4, rng);
      Tensor x = random_tensor({4, 3, 3}, rng);
      Tensor y = dual_attention(x, {random_tensor({4, 3, 3}, rng)}, zero);
      r.report("attention", "zero_init_identity", max_abs_diff(x, y), 1e-15);
    }
    {
      Tensor x = random_tensor({4, 3, 3}, rng);
      std::vector<Tensor> sup = {random_tensor({4, 3, 3}, rng), random_tensor({4, 3, 3}, rng)};
      Tensor a = temporal_attention(x, embed_support({sup[0], sup[1]}, p), p);
      Tensor b = temporal_attention(x, embed_support({sup[1], sup[0]}, p), p);
      r.report("attention", "support_permutation", max_abs_diff(a, b), 1e-12);
    }
  }

  if (r.wants("detector")) {
    Rng rng(8192);
    DetectorParams det = DetectorParams::init(8, 2, 3, rng);
    double err = grad_check(
        [&](std::vector<Tensor>& in) {
          HeadOutputs heads = predict_heads(in[0], det);
          Tensor s = mean_all(mul(heads.box_deltas, heads.box_deltas));
          return add(s, softmax_cross_entropy(slice0(heads.class_logits, 0), 1));
        },
        {random_tensor({2, 8, 3, 3}, rng)}, eps);
    r.report("detector", "predict_heads_grad", err, kGradLimit);
  }

  if (r.wants("tracker")) {
    Rng rng(16384);
    TrackerParams p = TrackerParams::init(4, rng);
    {
      double err = grad_check(
          [&](std::vector<Tensor>& in) {
            Tensor s = match_score(in[0], in[1], p);
            return mul(s, s);
          },
          {random_tensor({256}, rng, -0.2, 0.2), random_tensor({256}, rng, -0.2, 0.2)}, eps);
      r.report("tracker", "match_score_grad", err, kGradLimit);
    }
    {
      double err = grad_check(
          [](std::vector<Tensor>& in) {
            Tensor target = Tensor::full({1, 3, 3}, 0.25);
            return correlation_loss(in[0], target, true);
          },
          {random_tensor({1, 3, 3}, rng)}, eps);
      r.report("tracker", "correlation_loss_grad", err, kGradLimit);
    }
    {
      // Zero-offset valid correlation is a dot product, hence symmetric.
      Tensor a = random_tensor({3, 4, 4}, rng);
      Tensor b = random_tensor({3, 4, 4}, rng);
      Tensor ab = depthwise_xcorr(a, b, false);
      Tensor ba = depthwise_xcorr(b, a, false);
      r.report("tracker", "pairwise_symmetry", max_abs_diff(ab, ba), 1e-12);
    }
    {
      Tensor g = gaussian_target(Box{2.0, 1.0, 3.0, 3.0}, 8, 8, 0.25);
      // Center cell (3.5,2.5) -> index (3,2); peak must be exactly 1.
      const double err = std::abs(g.at({0, 2, 3}) - 1.0);
      r.report("tracker", "gaussian_peak", err, 1e-15);
    }
  }

  detail::corrupt_conv1x1_backward = false;
  out << (r.all_ok ? "selftest passed" : "selftest FAILED") << "\n";
  return r.all_ok;
}

}  // namespace vistrack
