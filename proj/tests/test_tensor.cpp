#include <cmath>
#include <vector>

#include "doctest.h"
#include "ref_kernels.hpp"
#include "test_util.hpp"
#include "vistrack/ops.hpp"

using namespace vistrack;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

OpParams params_from(std::vector<int> wshape, std::vector<double> w, std::vector<double> b) {
  OpParams p;
  p.weights = Tensor::from(std::move(wshape), std::move(w));
  p.bias = Tensor::from({p.weights.extent(0)}, std::move(b));
  return p;
}

}  // namespace

TEST_CASE("conv1x1 scalar affine") {
  Tensor x = Tensor::from({1, 1, 1}, {2.0});
  OpParams p = params_from({1, 1}, {3.0}, {1.0});
  Tensor y = conv1x1(x, p);
  CHECK(y.at({0, 0, 0}) == doctest::Approx(7.0).epsilon(0.0));
}

TEST_CASE("conv1x1 identity weights pass input through") {
  Rng rng(7);
  Tensor x = random_tensor({2, 3, 4}, rng);
  OpParams p = params_from({2, 2}, {1.0, 0.0, 0.0, 1.0}, {0.0, 0.0});
  Tensor y = conv1x1(x, p);
  CHECK(max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv1x1 matches per-pixel matvec oracle") {
  Rng rng(11);
  Tensor x = random_tensor({3, 2, 2}, rng);
  Tensor w = random_tensor({2, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  OpParams p;
  p.weights = w;
  p.bias = b;
  Tensor got = conv1x1(x, p);
  Tensor want = refk::conv1x1(x, w, b);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("conv1x1 is linear with zero bias") {
  Rng rng(13);
  Tensor x = random_tensor({3, 4, 4}, rng);
  Tensor y = random_tensor({3, 4, 4}, rng);
  OpParams p;
  p.weights = random_tensor({5, 3}, rng);
  p.bias = Tensor::zeros({5});
  const double a = 1.7, b = -0.4;
  Tensor lhs = conv1x1(add(scale(x, a), scale(y, b)), p);
  Tensor rhs = add(scale(conv1x1(x, p), a), scale(conv1x1(y, p), b));
  CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("conv1x1 rejects mismatched channel counts") {
  Tensor x = Tensor::zeros({3, 2, 2});
  OpParams p = params_from({2, 2}, {1, 0, 0, 1}, {0, 0});
  CHECK_THROWS_AS(conv1x1(x, p), std::invalid_argument);
}

TEST_CASE("matmul matches naive oracle") {
  Rng rng(17);
  Tensor a = random_tensor({4, 6}, rng);
  Tensor b = random_tensor({6, 5}, rng);
  Tensor got = matmul(a, b);
  Tensor want({4, 5});
  refk::matmul(a.data().data(), b.data().data(), want.data().data(), 4, 6, 5);
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("softmax of equal logits is uniform") {
  Tensor x = Tensor::from({2}, {0.0, 0.0});
  Tensor y = softmax_axis(x, 0);
  CHECK(y.at({0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(y.at({1}) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("softmax analytic two-point case") {
  Tensor x = Tensor::from({2}, {0.0, std::log(3.0)});
  Tensor y = softmax_axis(x, 0);
  CHECK(std::abs(y.at({0}) - 0.25) < 1e-14);
  CHECK(std::abs(y.at({1}) - 0.75) < 1e-14);
}

TEST_CASE("softmax matches direct exp/sum oracle") {
  Rng rng(19);
  std::vector<double> vals;
  for (int i = 0; i < 5; ++i) vals.push_back(rng.uniform(-2.0, 2.0));
  Tensor x = Tensor::from({5}, vals);
  Tensor y = softmax_axis(x, 0);
  std::vector<double> want = refk::softmax_direct(vals);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(y.at({i}) - want[static_cast<std::size_t>(i)]) < 1e-14);
}

TEST_CASE("softmax sums to one and is shift invariant along the axis") {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = random_tensor({4, 3}, rng, -30.0, 30.0);
    const int axis = rep % 2;
    Tensor y = softmax_axis(x, axis);
    CHECK(y.all_finite());
    // sums along the axis
    const int other = 1 - axis;
    for (int o = 0; o < x.extent(other); ++o) {
      double s = 0.0;
      for (int e = 0; e < x.extent(axis); ++e)
        s += axis == 0 ? y.at({e, o}) : y.at({o, e});
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    // adding a constant along the axis changes nothing
    Tensor shifted = x.clone();
    for (double& v : shifted.data()) v += 137.5;
    CHECK(max_abs_diff(softmax_axis(shifted, axis), y) < 1e-12);
  }
}

TEST_CASE("softmax rejects out-of-range axis") {
  Tensor x = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(softmax_axis(x, 2), std::invalid_argument);
}

TEST_CASE("depthwise_xcorr sums entries under an all-ones template") {
  Tensor tmpl = Tensor::full({1, 2, 2}, 1.0);
  Tensor search = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  Tensor out = depthwise_xcorr(tmpl, search, false);
  REQUIRE(out.shape() == std::vector<int>{1, 1, 1});
  CHECK(out.at({0, 0, 0}) == doctest::Approx(10.0).epsilon(0.0));
}

TEST_CASE("depthwise_xcorr self correlation gives per-channel energy") {
  Rng rng(29);
  Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor out = depthwise_xcorr(x, x, false);
  REQUIRE(out.shape() == std::vector<int>{3, 1, 1});
  for (int c = 0; c < 3; ++c) {
    double want = 0.0;
    for (int y = 0; y < 4; ++y)
      for (int xx = 0; xx < 5; ++xx) want += x.at({c, y, xx}) * x.at({c, y, xx});
    CHECK(std::abs(out.at({c, 0, 0}) - want) < 1e-12);
  }
}

TEST_CASE("depthwise_xcorr matches brute-force sliding window") {
  Rng rng(31);
  Tensor search = random_tensor({2, 5, 5}, rng);
  Tensor tmpl = random_tensor({2, 3, 3}, rng);

  SUBCASE("valid") {
    Tensor got = depthwise_xcorr(tmpl, search, false);
    Tensor want = refk::xcorr(tmpl, search, 0, 0, 3, 3);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
  SUBCASE("padded keeps search extents") {
    Tensor got = depthwise_xcorr(tmpl, search, true);
    REQUIRE(got.shape() == std::vector<int>{2, 5, 5});
    Tensor want = refk::xcorr(tmpl, search, 1, 1, 5, 5);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
  SUBCASE("even template padded") {
    Tensor tmpl2 = random_tensor({2, 2, 4}, rng);
    Tensor got = depthwise_xcorr(tmpl2, search, true);
    REQUIRE(got.shape() == std::vector<int>{2, 5, 5});
    Tensor want = refk::xcorr(tmpl2, search, 1, 2, 5, 5);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("depthwise_xcorr valid offset zero equals windowed dot product") {
  Rng rng(37);
  Tensor search = random_tensor({2, 4, 4}, rng);
  Tensor tmpl = random_tensor({2, 3, 2}, rng);
  Tensor out = depthwise_xcorr(tmpl, search, false);
  double total = 0.0;
  for (int c = 0; c < 2; ++c) {
    double acc = 0.0;
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 2; ++x) acc += tmpl.at({c, y, x}) * search.at({c, y, x});
    CHECK(std::abs(out.at({c, 0, 0}) - acc) < 1e-12);
    total += acc;
  }
  (void)total;
}

TEST_CASE("depthwise_xcorr rejects channel mismatch") {
  CHECK_THROWS_AS(depthwise_xcorr(Tensor::zeros({2, 2, 2}), Tensor::zeros({3, 4, 4}), false),
                  std::invalid_argument);
}

TEST_CASE("roi_align of a constant field is constant") {
  Rng rng(41);
  Tensor feat = Tensor::full({2, 8, 8}, 3.25);
  for (int rep = 0; rep < 10; ++rep) {
    Box box{rng.uniform(1.0, 4.0), rng.uniform(1.0, 4.0), rng.uniform(1.0, 3.0),
            rng.uniform(1.0, 3.0)};
    Tensor out = roi_align(feat, box, 3, 3, 2);
    for (double v : out.data()) CHECK(std::abs(v - 3.25) < 1e-12);
  }
}

TEST_CASE("roi_align identity on a single cell") {
  Tensor feat = Tensor::from({1, 1, 1}, {7.0});
  Tensor out = roi_align(feat, Box{0, 0, 1, 1}, 1, 1, 2);
  CHECK(out.at({0, 0, 0}) == doctest::Approx(7.0).epsilon(0.0));
}

TEST_CASE("roi_align center sample bilinearly averages corners") {
  Tensor feat = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
  Tensor out = roi_align(feat, Box{0, 0, 2, 2}, 1, 1, 1);
  CHECK(std::abs(out.at({0, 0, 0}) - 2.5) < 1e-14);
}

TEST_CASE("roi_align matches the reference sampler") {
  Rng rng(43);
  Tensor feat = random_tensor({3, 6, 7}, rng);
  for (int rep = 0; rep < 8; ++rep) {
    Box box{rng.uniform(-1.0, 4.0), rng.uniform(-1.0, 3.0), rng.uniform(0.5, 4.0),
            rng.uniform(0.5, 4.0)};
    Tensor got = roi_align(feat, box, 3, 2, 2);
    Tensor want = refk::roi_align(feat, box, 3, 2, 2);
    CHECK(max_abs_diff(got, want) < 1e-13);
  }
}

TEST_CASE("roi_align rejects empty outputs and degenerate boxes") {
  Tensor feat = Tensor::zeros({1, 4, 4});
  CHECK_THROWS_AS(roi_align(feat, Box{0, 0, 1, 1}, 0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(roi_align(feat, Box{0, 0, 0, 1}, 1, 1, 2), std::invalid_argument);
}

TEST_CASE("grad_check is near exact for a linear map") {
  Rng rng(47);
  Tensor w = random_tensor({3, 4}, rng);
  double err = grad_check(
      [&](std::vector<Tensor>& in) { return sum_all(matmul(w, reshape(in[0], {4, 1}))); },
      {random_tensor({4}, rng)}, 1e-5);
  CHECK(err <= 1e-10);
}

TEST_CASE("grad_check softmax loss") {
  Rng rng(53);
  double err = grad_check(
      [](std::vector<Tensor>& in) {
        Tensor y = softmax_axis(in[0], 0);
        return sum_all(mul(y, y));
      },
      {random_tensor({6}, rng)}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check depthwise_xcorr") {
  Rng rng(59);
  double err = grad_check(
      [](std::vector<Tensor>& in) {
        Tensor y = depthwise_xcorr(in[0], in[1], true);
        return mean_all(mul(y, y));
      },
      {random_tensor({2, 2, 2}, rng), random_tensor({2, 4, 4}, rng)}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check roi_align and conv1x1") {
  Rng rng(61);
  OpParams p;
  p.weights = random_tensor({2, 3}, rng);
  p.bias = random_tensor({2}, rng);
  double err = grad_check(
      [&](std::vector<Tensor>& in) {
        Tensor y = conv1x1(in[0], p);
        Tensor r = roi_align(y, Box{0.8, 0.6, 2.3, 2.1}, 2, 2, 2);
        return mean_all(mul(r, r));
      },
      {random_tensor({3, 5, 5}, rng)}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check rejects non-scalar objectives") {
  Rng rng(67);
  CHECK_THROWS_AS(grad_check([](std::vector<Tensor>& in) { return relu(in[0]); },
                             {random_tensor({3}, rng)}, 1e-5),
                  std::invalid_argument);
}

TEST_CASE("gradients accumulate across shared uses") {
  Tensor x = Tensor::from({1}, {3.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor y = mul(x, x);  // d/dx = 2x
  tape.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("ops keep finite values on finite inputs") {
  Rng rng(71);
  Tensor x = random_tensor({4, 6, 6}, rng, -50.0, 50.0);
  OpParams p;
  p.weights = random_tensor({4, 4}, rng);
  p.bias = random_tensor({4}, rng);
  Tensor y = conv1x1(relu(x), p);
  CHECK(y.all_finite());
  CHECK(softmax_axis(x, 1).all_finite());
  CHECK(sigmoid_op(x).all_finite());
}
