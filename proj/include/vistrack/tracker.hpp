#pragma once

#include <vector>

#include "vistrack/detector.hpp"
#include "vistrack/geometry.hpp"
#include "vistrack/ops.hpp"

namespace vistrack {

// Correlation-based tracking head. Pairwise and map-pooled similarity
// vectors both live in 256 dimensions so they can be summed before the
// score head.
struct TrackerParams {
  static constexpr int kSimilarityDim = 256;

  OpParams refine_conv_1;  // C -> 256
  OpParams refine_conv_2;  // 256 -> 1
  OpParams pair_proj;      // C -> 256
  OpParams score_conv_1;   // 256 -> 256
  OpParams score_conv_2;   // 256 -> 1
  double new_identity_threshold = 0.0;  // logit scale
  double cue_det = 1.0;
  double cue_iou = 1.0;
  double cue_cat = 1.0;

  static TrackerParams init(int feature_channels, Rng& rng);
  std::vector<Tensor> tensors() const;
};

// Per-identity memory carried across frames of one video.
struct TrackState {
  int identity = 0;
  Tensor reference_roi;  // [C,h,w]
  Box last_box;
  std::vector<int> category_votes;
  double last_score = 0.0;
  int last_frame = -1;

  void vote(int category);
  int majority_category() const;  // -1 when no votes yet
};

struct CorrelationOutput {
  Tensor refined_features;  // [256,H,W]
  Tensor likelihood_map;    // [1,H,W] raw logits
};

// For each (reference q, detection p) pair: depth-wise correlation of the
// two ROI volumes collapses to a per-channel vector, projected to 256 dims.
// Returns [Q,P,256].
Tensor pairwise_similarity(const Tensor& det_rois, const Tensor& ref_rois,
                           const TrackerParams& params);

// Padded depth-wise correlation of one reference ROI against the whole
// frame, refined by two pointwise convolutions into 256-channel features
// and a one-channel likelihood map aligned to frame coordinates.
CorrelationOutput correlation_map(const Tensor& ref_roi, const Tensor& frame_features,
                                  const TrackerParams& params);

// Gaussian pseudo-likelihood target with sigma = sigma_factor * box extents,
// evaluated over pixel indices; peak 1 when the center lies on the grid.
Tensor gaussian_target(const Box& box, int h, int w, double sigma_factor);

enum class MapPoolSource { kRefined, kLikelihood };

// ROI-pools the correlation output inside the detection box (3x3 grid,
// spatial mean) into a 256-vector. kRefined pools the 256-channel refined
// features; kLikelihood pools the one-channel map and tiles the pooled
// scalar, kept as the alternative reading of the figure.
Tensor map_similarity(const CorrelationOutput& corr, const Box& det_box,
                      MapPoolSource source = MapPoolSource::kRefined);

// score = conv2(relu(conv1(v_pair + v_map))), a single logit.
Tensor match_score(const Tensor& v_pair, const Tensor& v_map, const TrackerParams& params);

enum class AssociationMode { kGreedy, kHungarian };

struct Association {
  // Per detection: index into tracks, or -1 for a new identity.
  std::vector<int> track_of_detection;
  // Raw match logit of the accepted pair (0 for new identities).
  std::vector<double> matched_logit;
  // Combined score of the accepted pair (0 for new identities).
  std::vector<double> matched_score;
};

// Combines match logits with detection-confidence, box-IoU and category
// cues, then assigns detections to tracks greedily (descending detection
// confidence) or by optimal one-to-one assignment. A detection whose best
// combined score falls below new_identity_threshold opens a new identity;
// each track is used at most once.
Association associate(const Tensor& match_logits, const std::vector<ObjectProposal>& detections,
                      const std::vector<TrackState>& tracks, const TrackerParams& params,
                      AssociationMode mode);

// MSE between the logistic-squashed map and the target (or between raw
// logits and target when squash = false).
Tensor correlation_loss(const Tensor& likelihood_map, const Tensor& target, bool squash = true);

// Max-sum one-to-one assignment on a Q x P score matrix; returns the column
// of each row or -1. Exposed for tests.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& score);

}  // namespace vistrack
