#include "vistrack/attention.hpp"

namespace vistrack {

AttentionParams AttentionParams::init(int channels, int bottleneck_ratio, Rng& rng) {
  VT_CHECK(channels % 4 == 0,
           "attention: channels " + std::to_string(channels) + " not divisible by 4");
  VT_CHECK(bottleneck_ratio > 0 && channels % bottleneck_ratio == 0,
           "attention: channels " + std::to_string(channels) + " not divisible by ratio " +
               std::to_string(bottleneck_ratio));
  const int key_ch = channels / 4;
  const int mid_ch = channels / bottleneck_ratio;
  AttentionParams p;
  p.key_proj_current = OpParams::init(key_ch, channels, rng);
  p.key_proj_support = OpParams::init(key_ch, channels, rng);
  p.value_proj_support = OpParams::init(key_ch, channels, rng);
  p.output_transform = OpParams::zeros(channels, key_ch);
  p.channel_attn_proj = OpParams::init(1, channels, rng);
  p.channel_transform_1 = OpParams::init(mid_ch, channels, rng);
  p.channel_transform_2 = OpParams::zeros(channels, mid_ch);
  return p;
}

std::vector<Tensor> AttentionParams::tensors() const {
  std::vector<Tensor> out;
  for (const OpParams* p : {&key_proj_current, &key_proj_support, &value_proj_support,
                            &output_transform, &channel_attn_proj, &channel_transform_1,
                            &channel_transform_2}) {
    out.push_back(p->weights);
    out.push_back(p->bias);
  }
  return out;
}

Tensor embed_current(const Tensor& current, const AttentionParams& params) {
  VT_CHECK(current.rank() == 3, "embed_current: expected [C,H,W], got " +
                                    shape_string(current.shape()));
  return relu(conv1x1(current, params.key_proj_current));
}

SupportEmbedding embed_support(const std::vector<Tensor>& frames,
                               const AttentionParams& params) {
  VT_CHECK(!frames.empty(), "embed_support: empty support frame list");
  std::vector<Tensor> keys, values;
  keys.reserve(frames.size());
  values.reserve(frames.size());
  for (const Tensor& f : frames) {
    VT_CHECK(f.shape() == frames[0].shape(),
             "embed_support: support frames must share shape, got " + shape_string(f.shape()) +
                 " vs " + shape_string(frames[0].shape()));
    keys.push_back(relu(conv1x1(f, params.key_proj_support)));
    values.push_back(relu(conv1x1(f, params.value_proj_support)));
  }
  return SupportEmbedding{stack0(keys), stack0(values)};
}

Tensor temporal_attention(const Tensor& current, const SupportEmbedding& support,
                          const AttentionParams& params) {
  VT_CHECK(current.rank() == 3, "temporal_attention: expected [C,H,W] current features");
  VT_CHECK(support.keys.rank() == 4 && support.values.rank() == 4 &&
               support.keys.shape() == support.values.shape(),
           "temporal_attention: malformed support embedding");
  const int key_ch = support.keys.extent(1);
  const int positions = support.positions();
  VT_CHECK(positions > 0, "temporal_attention: support has zero positions");

  Tensor current_key = embed_current(current, params);  // [C/4,h,w]
  VT_CHECK(current_key.extent(0) == key_ch,
           "temporal_attention: key channels disagree, current " +
               std::to_string(current_key.extent(0)) + " vs support " + std::to_string(key_ch));
  const int out_h = current_key.extent(1), out_w = current_key.extent(2);
  const int query_count = out_h * out_w;

  // [T,C/4,H,W] -> [Np, C/4] with positions ordered (t, y, x).
  Tensor support_keys = reshape(permute(support.keys, {0, 2, 3, 1}), {positions, key_ch});
  Tensor support_values = reshape(permute(support.values, {0, 2, 3, 1}), {positions, key_ch});
  Tensor queries = reshape(current_key, {key_ch, query_count});

  Tensor similarity = matmul(support_keys, queries);    // [Np, h*w]
  Tensor weights = softmax_axis(similarity, 0);         // columns sum to 1
  Tensor values_t = permute(support_values, {1, 0});    // [C/4, Np]
  Tensor aggregated = matmul(values_t, weights);        // [C/4, h*w]
  Tensor agg_map = reshape(aggregated, {key_ch, out_h, out_w});
  return conv1x1(relu(agg_map), params.output_transform);
}

Tensor channel_attention(const Tensor& current, const AttentionParams& params) {
  VT_CHECK(current.rank() == 3, "channel_attention: expected [C,H,W], got " +
                                    shape_string(current.shape()));
  const int channels = current.extent(0);
  const int h = current.extent(1), w = current.extent(2);
  VT_CHECK(h * w > 0, "channel_attention: empty spatial extents " + std::to_string(h) + "x" +
                          std::to_string(w));

  Tensor logits = conv1x1(current, params.channel_attn_proj);           // [1,H,W]
  Tensor attn = softmax_axis(reshape(logits, {h * w, 1}), 0);           // [HW,1]
  Tensor context = matmul(reshape(current, {channels, h * w}), attn);   // [C,1]
  Tensor z = reshape(context, {channels, 1, 1});
  Tensor hidden = relu(conv1x1(z, params.channel_transform_1));
  Tensor gate = conv1x1(hidden, params.channel_transform_2);  // [C,1,1]
  return broadcast_spatial(gate, h, w);
}

Tensor dual_attention(const Tensor& current, const std::vector<Tensor>& supports,
                      const AttentionParams& params) {
  VT_CHECK(!supports.empty(), "dual_attention: empty support list");
  SupportEmbedding embedding = embed_support(supports, params);
  Tensor temporal = temporal_attention(current, embedding, params);
  Tensor channel = channel_attention(current, params);
  return add(add(temporal, channel), current);
}

Tensor object_dual_attention(const Tensor& proposals, const std::vector<Tensor>& supports,
                             const AttentionParams& params) {
  VT_CHECK(proposals.rank() == 4, "object_dual_attention: expected [P,C,h,w], got " +
                                      shape_string(proposals.shape()));
  const int count = proposals.extent(0);
  if (count == 0) return proposals;
  VT_CHECK(!supports.empty(), "object_dual_attention: empty support list");
  VT_CHECK(supports[0].extent(0) == proposals.extent(1),
           "object_dual_attention: proposal channels " + std::to_string(proposals.extent(1)) +
               " disagree with support channels " + std::to_string(supports[0].extent(0)));

  // Support keys/values are embedded once at full resolution and shared.
  SupportEmbedding embedding = embed_support(supports, params);
  std::vector<Tensor> refined;
  refined.reserve(static_cast<std::size_t>(count));
  for (int p = 0; p < count; ++p) {
    Tensor volume = slice0(proposals, p);
    Tensor temporal = temporal_attention(volume, embedding, params);
    Tensor channel = channel_attention(volume, params);
    refined.push_back(add(add(temporal, channel), volume));
  }
  return stack0(refined);
}

}  // namespace vistrack
