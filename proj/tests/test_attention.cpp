#include <algorithm>
#include <vector>

#include "doctest.h"
#include "ref_kernels.hpp"
#include "test_util.hpp"
#include "vistrack/attention.hpp"

using namespace vistrack;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

AttentionParams random_params(int channels, Rng& rng) {
  AttentionParams p = AttentionParams::init(channels, 4, rng);
  // Tests need non-identity behavior; randomize the zero-initialized
  // output transforms too.
  for (double& v : p.output_transform.weights.data()) v = rng.uniform(-0.5, 0.5);
  for (double& v : p.output_transform.bias.data()) v = rng.uniform(-0.5, 0.5);
  for (double& v : p.channel_transform_2.weights.data()) v = rng.uniform(-0.5, 0.5);
  for (double& v : p.channel_transform_2.bias.data()) v = rng.uniform(-0.5, 0.5);
  return p;
}

Tensor ref_temporal(const Tensor& current, const std::vector<Tensor>& supports,
                    const AttentionParams& p) {
  return refk::temporal_attention_loops(
      current, supports, p.key_proj_current.weights, p.key_proj_current.bias,
      p.key_proj_support.weights, p.key_proj_support.bias, p.value_proj_support.weights,
      p.value_proj_support.bias, p.output_transform.weights, p.output_transform.bias);
}

}  // namespace

TEST_CASE("embed_current shape and zero cases") {
  Rng rng(101);
  AttentionParams p = random_params(8, rng);
  Tensor x = random_tensor({8, 4, 4}, rng);
  Tensor key = embed_current(x, p);
  CHECK(key.shape() == std::vector<int>{2, 4, 4});

  AttentionParams zero = AttentionParams::init(8, 4, rng);
  for (double& v : zero.key_proj_current.weights.data()) v = 0.0;
  for (double& v : zero.key_proj_current.bias.data()) v = 0.0;
  Tensor zkey = embed_current(x, zero);
  for (double v : zkey.data()) CHECK(v == 0.0);
}

TEST_CASE("embed_current matches relu-conv composition") {
  Rng rng(103);
  AttentionParams p = random_params(8, rng);
  Tensor x = random_tensor({8, 3, 5}, rng);
  Tensor got = embed_current(x, p);
  Tensor want = refk::conv1x1(x, p.key_proj_current.weights, p.key_proj_current.bias);
  for (double& v : want.data()) v = std::max(v, 0.0);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("embed_support stacks per-frame projections") {
  Rng rng(107);
  AttentionParams p = random_params(8, rng);
  Tensor f = random_tensor({8, 3, 3}, rng);

  SUBCASE("single frame") {
    SupportEmbedding e = embed_support({f}, p);
    CHECK(e.keys.shape() == std::vector<int>{1, 2, 3, 3});
    CHECK(e.values.shape() == std::vector<int>{1, 2, 3, 3});
  }
  SUBCASE("identical frames produce identical slices") {
    SupportEmbedding e = embed_support({f, f}, p);
    for (int c = 0; c < 2; ++c)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) CHECK(e.keys.at({0, c, y, x}) == e.keys.at({1, c, y, x}));
  }
  SUBCASE("each slice matches the per-frame oracle") {
    Tensor g = random_tensor({8, 3, 3}, rng);
    SupportEmbedding e = embed_support({f, g}, p);
    Tensor want_f = refk::conv1x1(f, p.key_proj_support.weights, p.key_proj_support.bias);
    for (double& v : want_f.data()) v = std::max(v, 0.0);
    Tensor want_g = refk::conv1x1(g, p.value_proj_support.weights, p.value_proj_support.bias);
    for (double& v : want_g.data()) v = std::max(v, 0.0);
    double err = 0.0;
    for (int c = 0; c < 2; ++c)
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
          err = std::max(err, std::abs(e.keys.at({0, c, y, x}) - want_f.at({c, y, x})));
          err = std::max(err, std::abs(e.values.at({1, c, y, x}) - want_g.at({c, y, x})));
        }
    CHECK(err < 1e-12);
  }
  SUBCASE("empty list rejected") {
    CHECK_THROWS_AS(embed_support({}, p), std::invalid_argument);
  }
}

TEST_CASE("temporal attention zero value stream gives zero output") {
  Rng rng(109);
  AttentionParams p = random_params(8, rng);
  for (double& v : p.value_proj_support.weights.data()) v = 0.0;
  for (double& v : p.value_proj_support.bias.data()) v = 0.0;
  for (double& v : p.output_transform.bias.data()) v = 0.0;
  Tensor x = random_tensor({8, 3, 3}, rng);
  Tensor s = random_tensor({8, 3, 3}, rng);
  Tensor out = temporal_attention(x, embed_support({s}, p), p);
  for (double v : out.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("temporal attention with constant keys averages support values") {
  Rng rng(113);
  AttentionParams p = random_params(8, rng);
  // Zero the key projections: every similarity is 0 so attention is uniform.
  for (double& v : p.key_proj_current.weights.data()) v = 0.0;
  for (double& v : p.key_proj_current.bias.data()) v = 0.0;
  for (double& v : p.key_proj_support.weights.data()) v = 0.0;
  for (double& v : p.key_proj_support.bias.data()) v = 0.0;
  Tensor x = random_tensor({8, 2, 2}, rng);
  std::vector<Tensor> sup = {random_tensor({8, 2, 2}, rng), random_tensor({8, 2, 2}, rng)};
  SupportEmbedding e = embed_support(sup, p);
  Tensor out = temporal_attention(x, e, p);

  // Mean support value vector, then the output transform.
  const int key_ch = 2, t = 2, h = 2, w = 2;
  std::vector<double> mean_val(key_ch, 0.0);
  for (int ti = 0; ti < t; ++ti)
    for (int c = 0; c < key_ch; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) mean_val[c] += e.values.at({ti, c, y, xx});
  for (double& v : mean_val) v /= t * h * w;
  for (int c = 0; c < 8; ++c) {
    double want = p.output_transform.bias.at({c});
    for (int k = 0; k < key_ch; ++k)
      want += p.output_transform.weights.at({c, k}) * std::max(mean_val[k], 0.0);
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) CHECK(std::abs(out.at({c, y, xx}) - want) < 1e-12);
  }
}

TEST_CASE("temporal attention matches the literal loop transcription") {
  Rng rng(127);
  AttentionParams p = random_params(4, rng);
  Tensor x = random_tensor({4, 3, 3}, rng);
  std::vector<Tensor> sup = {random_tensor({4, 3, 3}, rng), random_tensor({4, 3, 3}, rng)};
  Tensor got = temporal_attention(x, embed_support(sup, p), p);
  Tensor want = ref_temporal(x, sup, p);
  CHECK(max_abs_diff(got, want) < 1e-10);
}

TEST_CASE("temporal attention is invariant to support frame order") {
  Rng rng(131);
  AttentionParams p = random_params(8, rng);
  Tensor x = random_tensor({8, 3, 3}, rng);
  std::vector<Tensor> sup = {random_tensor({8, 3, 3}, rng), random_tensor({8, 3, 3}, rng),
                             random_tensor({8, 3, 3}, rng)};
  Tensor base = temporal_attention(x, embed_support(sup, p), p);
  std::vector<Tensor> perm = {sup[2], sup[0], sup[1]};
  Tensor swapped = temporal_attention(x, embed_support(perm, p), p);
  CHECK(max_abs_diff(base, swapped) < 1e-12);
}

TEST_CASE("temporal attention self-support matches the loop oracle") {
  Rng rng(137);
  AttentionParams p = random_params(8, rng);
  Tensor x = random_tensor({8, 3, 3}, rng);
  Tensor got = temporal_attention(x, embed_support({x}, p), p);
  Tensor want = ref_temporal(x, {x}, p);
  CHECK(max_abs_diff(got, want) < 1e-10);
}

TEST_CASE("channel attention pools constant input to the constant") {
  Rng rng(139);
  AttentionParams p = random_params(8, rng);
  // With per-channel constant input the pooled context equals the constant
  // whatever the attention logits are; verify through the full transform by
  // making both transforms identity-ish is overkill, so check directly on
  // the oracle path with matched transforms.
  Tensor x({8, 4, 4});
  std::vector<double> consts;
  for (int c = 0; c < 8; ++c) consts.push_back(rng.uniform(-2.0, 2.0));
  for (int c = 0; c < 8; ++c)
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 4; ++xx) x.at({c, y, xx}) = consts[static_cast<std::size_t>(c)];
  Tensor got = channel_attention(x, p);
  Tensor want = refk::channel_attention_loops(
      x, p.channel_attn_proj.weights, p.channel_attn_proj.bias, p.channel_transform_1.weights,
      p.channel_transform_1.bias, p.channel_transform_2.weights, p.channel_transform_2.bias);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("channel attention zeroed second transform gives zero map") {
  Rng rng(149);
  AttentionParams p = random_params(8, rng);
  for (double& v : p.channel_transform_2.weights.data()) v = 0.0;
  for (double& v : p.channel_transform_2.bias.data()) v = 0.0;
  Tensor x = random_tensor({8, 3, 3}, rng);
  Tensor out = channel_attention(x, p);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("channel attention matches the explicit loop oracle") {
  Rng rng(151);
  AttentionParams p = random_params(4, rng);
  Tensor x = random_tensor({4, 3, 3}, rng);
  Tensor got = channel_attention(x, p);
  Tensor want = refk::channel_attention_loops(
      x, p.channel_attn_proj.weights, p.channel_attn_proj.bias, p.channel_transform_1.weights,
      p.channel_transform_1.bias, p.channel_transform_2.weights, p.channel_transform_2.bias);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("dual attention with zeroed transforms is the exact identity") {
  Rng rng(157);
  AttentionParams p = AttentionParams::init(8, 4, rng);  // transforms zero-initialized
  Tensor x = random_tensor({8, 4, 4}, rng);
  std::vector<Tensor> sup = {random_tensor({8, 4, 4}, rng)};
  Tensor out = dual_attention(x, sup, p);
  CHECK(max_abs_diff(out, x) == 0.0);
}

TEST_CASE("dual attention decomposes into branch sum") {
  Rng rng(163);
  AttentionParams p = random_params(8, rng);
  Tensor x = random_tensor({8, 3, 3}, rng);
  std::vector<Tensor> sup = {random_tensor({8, 3, 3}, rng), random_tensor({8, 3, 3}, rng)};

  SUBCASE("temporal branch zeroed leaves channel branch plus residual") {
    AttentionParams q = p;
    q.output_transform = OpParams::zeros(8, 2);
    Tensor out = dual_attention(x, sup, q);
    Tensor want = channel_attention(x, q);
    auto wd = want.data();
    auto xd = x.data();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] += xd[i];
    CHECK(max_abs_diff(out, want) < 1e-15);
  }
  SUBCASE("random case equals independently computed branches") {
    Tensor out = dual_attention(x, sup, p);
    Tensor tb = temporal_attention(x, embed_support(sup, p), p);
    Tensor cb = channel_attention(x, p);
    Tensor want = add(add(tb, cb), x);
    CHECK(max_abs_diff(out, want) < 1e-12);
  }
}

TEST_CASE("object dual attention preserves shape and matches per-proposal calls") {
  Rng rng(167);
  AttentionParams p = random_params(8, rng);
  std::vector<Tensor> sup = {random_tensor({8, 5, 5}, rng), random_tensor({8, 5, 5}, rng)};
  std::vector<Tensor> vols = {random_tensor({8, 3, 3}, rng), random_tensor({8, 3, 3}, rng),
                              random_tensor({8, 3, 3}, rng)};
  Tensor proposals = stack0(vols);
  Tensor refined = object_dual_attention(proposals, sup, p);
  REQUIRE(refined.shape() == std::vector<int>{3, 8, 3, 3});
  for (int i = 0; i < 3; ++i) {
    Tensor one = dual_attention(vols[static_cast<std::size_t>(i)], sup, p);
    Tensor got = slice0(refined, i);
    CHECK(max_abs_diff(got, one) < 1e-12);
  }
}

TEST_CASE("object dual attention identity with zeroed transforms") {
  Rng rng(173);
  AttentionParams p = AttentionParams::init(8, 4, rng);
  Tensor proposals = random_tensor({2, 8, 3, 3}, rng);
  std::vector<Tensor> sup = {random_tensor({8, 5, 5}, rng)};
  Tensor refined = object_dual_attention(proposals, sup, p);
  CHECK(max_abs_diff(refined, proposals) == 0.0);
}

TEST_CASE("object dual attention handles zero proposals and rejects channel mismatch") {
  Rng rng(179);
  AttentionParams p = random_params(8, rng);
  Tensor empty({0, 8, 3, 3});
  std::vector<Tensor> sup = {random_tensor({8, 5, 5}, rng)};
  Tensor out = object_dual_attention(empty, sup, p);
  CHECK(out.extent(0) == 0);
  Tensor wrong = random_tensor({2, 4, 3, 3}, rng);
  CHECK_THROWS_AS(object_dual_attention(wrong, sup, p), std::invalid_argument);
}

TEST_CASE("attention ops pass grad_check") {
  Rng rng(181);
  AttentionParams p = random_params(4, rng);

  SUBCASE("temporal attention wrt inputs and parameters") {
    std::vector<Tensor> inputs = {random_tensor({4, 2, 2}, rng), random_tensor({4, 2, 2}, rng),
                                  p.key_proj_current.weights, p.key_proj_support.weights,
                                  p.value_proj_support.weights, p.output_transform.weights,
                                  p.output_transform.bias};
    double err = grad_check(
        [&](std::vector<Tensor>& in) {
          Tensor out = temporal_attention(in[0], embed_support({in[1]}, p), p);
          return mean_all(mul(out, out));
        },
        inputs, 1e-5);
    CHECK(err < 1e-6);
  }
  SUBCASE("channel attention wrt input and parameters") {
    std::vector<Tensor> inputs = {random_tensor({4, 3, 3}, rng), p.channel_attn_proj.weights,
                                  p.channel_transform_1.weights, p.channel_transform_2.weights,
                                  p.channel_transform_2.bias};
    double err = grad_check(
        [&](std::vector<Tensor>& in) {
          Tensor out = channel_attention(in[0], p);
          return mean_all(mul(out, out));
        },
        inputs, 1e-5);
    CHECK(err < 1e-6);
  }
}
