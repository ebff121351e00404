#include "vistrack/detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

namespace vistrack {

DetectorParams DetectorParams::init(int channels, int stride, int num_categories, Rng& rng) {
  VT_CHECK(channels > 0 && stride > 0 && num_categories > 0, "detector: invalid configuration");
  DetectorParams p;
  p.stride = stride;
  p.channels = channels;
  p.num_categories = num_categories;
  p.stem1 = OpParams::init(channels, 3 * stride * stride, rng);
  p.stem2 = OpParams::init(channels, channels, rng);
  p.cls = OpParams::init(num_categories, channels, rng);
  p.box_reg = OpParams::init(4, channels, rng);
  p.mask = OpParams::init(1, channels, rng);
  return p;
}

std::vector<Tensor> DetectorParams::tensors() const {
  std::vector<Tensor> out;
  for (const OpParams* p : {&stem1, &stem2, &cls, &box_reg, &mask}) {
    out.push_back(p->weights);
    out.push_back(p->bias);
  }
  return out;
}

Tensor extract_features(const Frame& frame, const DetectorParams& params) {
  VT_CHECK(frame.pixels.rank() == 3 && frame.pixels.extent(0) == 3,
           "extract_features: expected [3,H,W] pixels, got " +
               shape_string(frame.pixels.shape()));
  const int h = frame.pixels.extent(1), w = frame.pixels.extent(2);
  VT_CHECK(h >= params.stride && w >= params.stride,
           "extract_features: frame " + std::to_string(h) + "x" + std::to_string(w) +
               " smaller than stride " + std::to_string(params.stride));
  VT_CHECK(h % params.stride == 0 && w % params.stride == 0,
           "extract_features: frame " + std::to_string(h) + "x" + std::to_string(w) +
               " not divisible by stride " + std::to_string(params.stride));
  Tensor patches = space_to_depth(frame.pixels, params.stride);
  return conv1x1(relu(conv1x1(patches, params.stem1)), params.stem2);
}

namespace {

double luminance(const Tensor& pixels, int y, int x) {
  return (pixels.at({0, y, x}) + pixels.at({1, y, x}) + pixels.at({2, y, x})) / 3.0;
}

struct Component {
  int min_x, min_y, max_x, max_y;
  int area;
};

// 8-connected components of the thresholded luminance image.
std::vector<Component> connected_components(const Tensor& pixels, double threshold) {
  const int h = pixels.extent(1), w = pixels.extent(2);
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(h) * w, 0);
  std::vector<Component> components;
  for (int sy = 0; sy < h; ++sy)
    for (int sx = 0; sx < w; ++sx) {
      const std::size_t start = static_cast<std::size_t>(sy) * w + sx;
      if (visited[start] || luminance(pixels, sy, sx) <= threshold) continue;
      Component comp{sx, sy, sx, sy, 0};
      std::deque<std::pair<int, int>> queue{{sy, sx}};
      visited[start] = 1;
      while (!queue.empty()) {
        auto [y, x] = queue.front();
        queue.pop_front();
        ++comp.area;
        comp.min_x = std::min(comp.min_x, x);
        comp.max_x = std::max(comp.max_x, x);
        comp.min_y = std::min(comp.min_y, y);
        comp.max_y = std::max(comp.max_y, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const std::size_t id = static_cast<std::size_t>(ny) * w + nx;
            if (visited[id] || luminance(pixels, ny, nx) <= threshold) continue;
            visited[id] = 1;
            queue.emplace_back(ny, nx);
          }
      }
      components.push_back(comp);
    }
  return components;
}

}  // namespace

Box jitter_box(const Box& box, double jitter, Rng& rng) {
  if (jitter <= 0.0) return box;
  // Each corner moves independently by at most jitter * max(w,h).
  const double extent = jitter * std::max(box.w, box.h);
  const double x0 = box.x + rng.uniform(-extent, extent);
  const double y0 = box.y + rng.uniform(-extent, extent);
  const double x1 = box.x + box.w + rng.uniform(-extent, extent);
  const double y1 = box.y + box.h + rng.uniform(-extent, extent);
  return Box{x0, y0, std::max(1.0, x1 - x0), std::max(1.0, y1 - y0)};
}

std::vector<ObjectProposal> propose(const Frame& frame, const Tensor& features,
                                    ProposalMode mode, const std::vector<Box>* gt_boxes,
                                    const DetectorParams& params, const ProposalOptions& options,
                                    Rng& rng) {
  std::vector<ObjectProposal> proposals;
  const double inv_stride = 1.0 / params.stride;
  const int k = params.num_categories;

  auto finish = [&](Box box, double confidence) {
    ObjectProposal p;
    p.box = box;
    p.detection_confidence = confidence;
    p.roi_features = roi_align(features, box.scaled(inv_stride), options.roi_size,
                               options.roi_size, options.samples_per_bin);
    p.category_scores.assign(static_cast<std::size_t>(k), 1.0 / k);
    proposals.push_back(std::move(p));
  };

  if (mode == ProposalMode::kOracle) {
    VT_CHECK(gt_boxes != nullptr, "propose: oracle mode requires ground-truth boxes");
    for (const Box& gt : *gt_boxes) {
      finish(jitter_box(gt, options.jitter, rng), 1.0);
    }
    return proposals;
  }

  // Blob mode: threshold, box the components, greedy NMS by confidence.
  std::vector<Component> comps = connected_components(frame.pixels, options.blob_threshold);
  struct Candidate {
    Box box;
    double confidence;
  };
  std::vector<Candidate> candidates;
  for (const Component& c : comps) {
    Box box{static_cast<double>(c.min_x), static_cast<double>(c.min_y),
            static_cast<double>(c.max_x - c.min_x + 1), static_cast<double>(c.max_y - c.min_y + 1)};
    candidates.push_back({box, c.area / box.area()});
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.confidence > b.confidence; });
  std::vector<Candidate> kept;
  for (const Candidate& c : candidates) {
    bool suppressed = false;
    for (const Candidate& k2 : kept)
      if (box_iou(c.box, k2.box) > options.nms_iou) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(c);
  }
  for (const Candidate& c : kept) finish(c.box, c.confidence);
  return proposals;
}

HeadOutputs predict_heads(const Tensor& proposal_features, const DetectorParams& params) {
  VT_CHECK(proposal_features.rank() == 4, "predict_heads: expected [P,C,h,w], got " +
                                              shape_string(proposal_features.shape()));
  const int count = proposal_features.extent(0);
  const int k = params.num_categories;
  HeadOutputs out;
  if (count == 0) {
    out.category_scores = Tensor({0, k});
    out.box_deltas = Tensor({0, 4});
    out.mask_logits = Tensor({0, 2 * proposal_features.extent(2), 2 * proposal_features.extent(3)});
    out.class_logits = Tensor({0, k});
    return out;
  }
  std::vector<Tensor> scores, deltas, masks, logits;
  for (int p = 0; p < count; ++p) {
    Tensor volume = slice0(proposal_features, p);
    Tensor pooled = spatial_mean(volume);
    Tensor cls_logits = conv1x1(pooled, params.cls);
    logits.push_back(cls_logits);
    scores.push_back(softmax_axis(cls_logits, 0));
    deltas.push_back(conv1x1(pooled, params.box_reg));
    Tensor m = conv1x1(upsample2x(volume), params.mask);  // [1,2h,2w]
    masks.push_back(reshape(m, {m.extent(1), m.extent(2)}));
  }
  out.category_scores = stack0(scores);
  out.box_deltas = stack0(deltas);
  out.mask_logits = stack0(masks);
  out.class_logits = stack0(logits);
  return out;
}

std::array<double, 4> box_to_deltas(const Box& proposal, const Box& target) {
  return {(target.cx() - proposal.cx()) / proposal.w,
          (target.cy() - proposal.cy()) / proposal.h,
          std::log(target.w / proposal.w),
          std::log(target.h / proposal.h)};
}

Box apply_deltas(const Box& proposal, const std::array<double, 4>& deltas) {
  const double cx = proposal.cx() + deltas[0] * proposal.w;
  const double cy = proposal.cy() + deltas[1] * proposal.h;
  const double w = proposal.w * std::exp(deltas[2]);
  const double h = proposal.h * std::exp(deltas[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

}  // namespace vistrack
