#pragma once

// Naive serial reference implementations used as oracles by the tests and
// as the baseline side of the benchmark. Everything here is a direct loop
// transcription, written independently of the library kernels and of the
// autograd layer; keep it that way.

#include <vector>

#include "vistrack/geometry.hpp"
#include "vistrack/tensor.hpp"

namespace refk {

using vistrack::Box;
using vistrack::Tensor;

void matmul(const double* a, const double* b, double* y, int m, int k, int n);

// out[c,y,x] = sum_k w[c,k] in[k,y,x] + bias[c]
Tensor conv1x1(const Tensor& in, const Tensor& w, const Tensor& bias);

// Direct exp/sum softmax of a vector, no max subtraction.
std::vector<double> softmax_direct(const std::vector<double>& x);

// Per-channel sliding-window correlation; pad_top/pad_left zeros around the
// search grid, output extents oh x ow.
Tensor xcorr(const Tensor& tmpl, const Tensor& search, int pad_top, int pad_left,
             int oh, int ow);

// Mean of samples^2 bilinear reads per bin, box in cell coordinates, zero
// outside the grid.
Tensor roi_align(const Tensor& feat, const Box& box, int out_h, int out_w, int samples);

// Literal loop transcription of the temporal cross-attention: computes the
// ReLU-projected keys/values of the supports and the current frame with
// per-pixel matvecs, forms the similarity matrix entry by entry, softmaxes
// every column with plain exp/sum, aggregates values, applies the output
// transform W*relu(.)+b. Support positions are ordered (t, y, x).
Tensor temporal_attention_loops(const Tensor& current,
                                const std::vector<Tensor>& supports,
                                const Tensor& key_cur_w, const Tensor& key_cur_b,
                                const Tensor& key_sup_w, const Tensor& key_sup_b,
                                const Tensor& val_sup_w, const Tensor& val_sup_b,
                                const Tensor& out_w, const Tensor& out_b);

// Explicit-loop global-context branch: spatial logits, softmax over all
// positions, weighted pooling, two-layer transform, broadcast.
Tensor channel_attention_loops(const Tensor& current, const Tensor& attn_w,
                               const Tensor& attn_b, const Tensor& t1_w, const Tensor& t1_b,
                               const Tensor& t2_w, const Tensor& t2_b);

// score = w2 * relu(W1 * (a + b) + b1) + b2 for length-n vectors.
double two_layer_score(const std::vector<double>& a, const std::vector<double>& b,
                       const Tensor& w1, const Tensor& b1, const Tensor& w2,
                       const Tensor& b2);

// Best-total-score one-to-one assignment by enumerating permutations.
// Returns assignment[row] = column (or -1) maximizing the sum; rows = Q.
std::vector<int> best_permutation_assignment(const std::vector<std::vector<double>>& score);

}  // namespace refk
