#pragma once

#include <array>
#include <string>
#include <vector>

#include "vistrack/geometry.hpp"
#include "vistrack/ops.hpp"

namespace vistrack {

// One video frame: RGB pixels in [0,1].
struct Frame {
  Tensor pixels;  // [3,Hi,Wi]
  int index = 0;
  int video_id = 0;
};

// A candidate object on one frame. The box lives in image pixel
// coordinates; roi_features are pooled from the stride-reduced feature map.
struct ObjectProposal {
  Box box;
  Tensor roi_features;                 // [C,h,w]
  std::vector<double> category_scores;  // sums to 1
  Tensor mask_logits;                  // [h_m,w_m], filled by the heads
  double detection_confidence = 1.0;
};

enum class ProposalMode { kOracle, kBlob };

// Parameters of the desk-scale feature extractor and detection heads. The
// extractor is a patchify stem: a stride-s space-to-depth followed by two
// pointwise convolutions, standing in for a real backbone.
struct DetectorParams {
  int stride = 4;
  int channels = 32;
  int num_categories = 3;
  OpParams stem1;  // 3*stride^2 -> channels
  OpParams stem2;  // channels -> channels
  OpParams cls;    // channels -> num_categories
  OpParams box_reg;  // channels -> 4
  OpParams mask;   // channels -> 1

  static DetectorParams init(int channels, int stride, int num_categories, Rng& rng);
  std::vector<Tensor> tensors() const;
};

// Pixels [3,Hi,Wi] -> features [C,Hi/s,Wi/s]. Deterministic in (frame, params).
Tensor extract_features(const Frame& frame, const DetectorParams& params);

struct ProposalOptions {
  double jitter = 0.0;          // oracle box perturbation, fraction of box size
  int roi_size = 7;
  int samples_per_bin = 2;
  double blob_threshold = 0.1;  // luminance cut in blob mode
  double nms_iou = 0.5;
};

// Oracle mode perturbs the ground-truth boxes; blob mode thresholds
// luminance and boxes the connected components. ROI features come from
// roi_align on the given feature map.
std::vector<ObjectProposal> propose(const Frame& frame, const Tensor& features,
                                    ProposalMode mode, const std::vector<Box>* gt_boxes,
                                    const DetectorParams& params, const ProposalOptions& options,
                                    Rng& rng);

struct HeadOutputs {
  Tensor category_scores;  // [P,K]
  Tensor box_deltas;       // [P,4]
  Tensor mask_logits;      // [P,2h,2w]
  Tensor class_logits;     // [P,K], kept for the training loss
};

// Pooled linear classifier, linear box regressor and a pointwise mask head
// over the (2x upsampled) ROI grid. P = 0 yields empty outputs.
HeadOutputs predict_heads(const Tensor& proposal_features, const DetectorParams& params);

// Corner-wise box jitter: each corner moves by at most jitter*max(w,h).
Box jitter_box(const Box& box, double jitter, Rng& rng);

// Standard box-delta parameterization relative to a proposal box.
std::array<double, 4> box_to_deltas(const Box& proposal, const Box& target);
Box apply_deltas(const Box& proposal, const std::array<double, 4>& deltas);

}  // namespace vistrack
