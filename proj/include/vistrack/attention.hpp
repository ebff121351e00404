#pragma once

#include <vector>

#include "vistrack/ops.hpp"

namespace vistrack {

// Parameters of the dual attention block operating on C-channel features.
// Keys/values live in C/4 channels; the channel branch bottlenecks to C/r.
struct AttentionParams {
  OpParams key_proj_current;    // C -> C/4
  OpParams key_proj_support;    // C -> C/4
  OpParams value_proj_support;  // C -> C/4
  OpParams output_transform;    // C/4 -> C, zero-initialized
  OpParams channel_attn_proj;   // C -> 1
  OpParams channel_transform_1;  // C -> C/r
  OpParams channel_transform_2;  // C/r -> C, zero-initialized

  static AttentionParams init(int channels, int bottleneck_ratio, Rng& rng);
  std::vector<Tensor> tensors() const;
};

// Key/value embeddings of the support frames, stacked on a leading time axis.
struct SupportEmbedding {
  Tensor keys;    // [T, C/4, H, W]
  Tensor values;  // [T, C/4, H, W]

  int frames() const { return keys.extent(0); }
  int positions() const { return keys.extent(0) * keys.extent(2) * keys.extent(3); }
};

// ReLU-activated key projection of the current frame: [C,H,W] -> [C/4,H,W].
Tensor embed_current(const Tensor& current, const AttentionParams& params);

// Per-frame ReLU-activated key/value projections stacked along time.
SupportEmbedding embed_support(const std::vector<Tensor>& frames,
                               const AttentionParams& params);

// Cross-attention from every current position to every spatio-temporal
// support position, followed by the output transform. Returns the aggregated
// map without the residual; the residual is added by dual_attention.
// The current feature map may have different spatial extents than the
// support maps (object-level use).
Tensor temporal_attention(const Tensor& current, const SupportEmbedding& support,
                          const AttentionParams& params);

// Global-context branch: one spatial attention map shared across channels
// pools the frame into a context vector, which is transformed and broadcast
// back over the spatial extents. No residual.
Tensor channel_attention(const Tensor& current, const AttentionParams& params);

// temporal + channel + identity residual.
Tensor dual_attention(const Tensor& current, const std::vector<Tensor>& supports,
                      const AttentionParams& params);

// Applies dual attention to each proposal volume of [P,C,h,w] independently,
// embedding the support frames once at full resolution.
Tensor object_dual_attention(const Tensor& proposals, const std::vector<Tensor>& supports,
                             const AttentionParams& params);

}  // namespace vistrack
