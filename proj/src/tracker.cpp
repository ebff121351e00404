#include "vistrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vistrack {

TrackerParams TrackerParams::init(int feature_channels, Rng& rng) {
  TrackerParams p;
  p.refine_conv_1 = OpParams::init(kSimilarityDim, feature_channels, rng);
  p.refine_conv_2 = OpParams::init(1, kSimilarityDim, rng);
  p.pair_proj = OpParams::init(kSimilarityDim, feature_channels, rng);
  p.score_conv_1 = OpParams::init(kSimilarityDim, kSimilarityDim, rng);
  p.score_conv_2 = OpParams::init(1, kSimilarityDim, rng);
  return p;
}

std::vector<Tensor> TrackerParams::tensors() const {
  std::vector<Tensor> out;
  for (const OpParams* p : {&refine_conv_1, &refine_conv_2, &pair_proj, &score_conv_1,
                            &score_conv_2}) {
    out.push_back(p->weights);
    out.push_back(p->bias);
  }
  return out;
}

void TrackState::vote(int category) {
  if (category >= static_cast<int>(category_votes.size()))
    category_votes.resize(static_cast<std::size_t>(category) + 1, 0);
  ++category_votes[static_cast<std::size_t>(category)];
}

int TrackState::majority_category() const {
  int best = -1, best_count = 0;
  for (std::size_t c = 0; c < category_votes.size(); ++c)
    if (category_votes[c] > best_count) {
      best_count = category_votes[c];
      best = static_cast<int>(c);
    }
  return best;
}

Tensor pairwise_similarity(const Tensor& det_rois, const Tensor& ref_rois,
                           const TrackerParams& params) {
  VT_CHECK(det_rois.rank() == 4 && ref_rois.rank() == 4,
           "pairwise_similarity: expected [P,C,h,w] and [Q,C,h,w]");
  for (int a = 1; a < 4; ++a)
    VT_CHECK(det_rois.extent(a) == ref_rois.extent(a),
             "pairwise_similarity: ROI extents disagree on axis " + std::to_string(a) + ", " +
                 std::to_string(det_rois.extent(a)) + " vs " + std::to_string(ref_rois.extent(a)));
  const int p_count = det_rois.extent(0);
  const int q_count = ref_rois.extent(0);
  const int dim = TrackerParams::kSimilarityDim;
  if (p_count == 0 || q_count == 0) return Tensor({q_count, p_count, dim});

  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(q_count));
  for (int q = 0; q < q_count; ++q) {
    Tensor ref = slice0(ref_rois, q);
    std::vector<Tensor> cells;
    cells.reserve(static_cast<std::size_t>(p_count));
    for (int p = 0; p < p_count; ++p) {
      Tensor det = slice0(det_rois, p);
      Tensor corr = depthwise_xcorr(ref, det, false);  // [C,1,1]
      cells.push_back(reshape(conv1x1(corr, params.pair_proj), {dim}));
    }
    rows.push_back(stack0(cells));
  }
  return stack0(rows);
}

CorrelationOutput correlation_map(const Tensor& ref_roi, const Tensor& frame_features,
                                  const TrackerParams& params) {
  VT_CHECK(ref_roi.rank() == 3 && frame_features.rank() == 3,
           "correlation_map: expected [C,h,w] template and [C,H,W] frame");
  VT_CHECK(ref_roi.extent(0) == frame_features.extent(0),
           "correlation_map: channel counts disagree, " + std::to_string(ref_roi.extent(0)) +
               " vs " + std::to_string(frame_features.extent(0)));
  Tensor corr = depthwise_xcorr(ref_roi, frame_features, true);  // [C,H,W]
  CorrelationOutput out;
  out.refined_features = relu(conv1x1(corr, params.refine_conv_1));
  out.likelihood_map = conv1x1(out.refined_features, params.refine_conv_2);
  return out;
}

Tensor gaussian_target(const Box& box, int h, int w, double sigma_factor) {
  VT_CHECK(box.w > 0.0 && box.h > 0.0, "gaussian_target: degenerate box with w=" +
                                           std::to_string(box.w) + " h=" + std::to_string(box.h));
  VT_CHECK(sigma_factor > 0.0, "gaussian_target: sigma_factor must be positive");
  // Pixel-index space: the center of cell-coordinate box (x,y,w,h) lands on
  // index (cx-0.5, cy-0.5).
  const double cx = box.cx() - 0.5;
  const double cy = box.cy() - 0.5;
  VT_CHECK(cx >= 0.0 && cx < w && cy >= 0.0 && cy < h,
           "gaussian_target: box center (" + std::to_string(cx) + "," + std::to_string(cy) +
               ") outside the " + std::to_string(h) + "x" + std::to_string(w) + " grid");
  const double sx = sigma_factor * box.w;
  const double sy = sigma_factor * box.h;
  Tensor out({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = (x - cx) / sx;
      const double dy = (y - cy) / sy;
      out.at({0, y, x}) = std::exp(-0.5 * (dx * dx + dy * dy));
    }
  return out;
}

Tensor map_similarity(const CorrelationOutput& corr, const Box& det_box, MapPoolSource source) {
  VT_CHECK(det_box.w > 0.0 && det_box.h > 0.0,
           "map_similarity: degenerate box with w=" + std::to_string(det_box.w) +
               " h=" + std::to_string(det_box.h));
  constexpr int kGrid = 3;
  if (source == MapPoolSource::kRefined) {
    Tensor pooled = roi_align(corr.refined_features, det_box, kGrid, kGrid);
    return spatial_mean(pooled);
  }
  Tensor pooled = roi_align(corr.likelihood_map, det_box, kGrid, kGrid);
  Tensor mean = spatial_mean(pooled);  // [1]
  return tile_scalar(mean, TrackerParams::kSimilarityDim);
}

Tensor match_score(const Tensor& v_pair, const Tensor& v_map, const TrackerParams& params) {
  VT_CHECK(v_pair.rank() == 1 && v_pair.extent(0) == TrackerParams::kSimilarityDim,
           "match_score: pair vector length " + std::to_string(v_pair.size()) + " != " +
               std::to_string(TrackerParams::kSimilarityDim));
  VT_CHECK(v_map.shape() == v_pair.shape(),
           "match_score: vector lengths disagree, " + shape_string(v_pair.shape()) + " vs " +
               shape_string(v_map.shape()));
  Tensor summed = add(v_pair, v_map);
  Tensor hidden = relu(conv1x1(summed, params.score_conv_1));
  return conv1x1(hidden, params.score_conv_2);  // [1]
}

namespace {

// Min-cost assignment on a square matrix (potentials / augmenting rows).
std::vector<int> hungarian_square(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0), match(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (match[static_cast<std::size_t>(j)] > 0)
      row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& score) {
  const int q = static_cast<int>(score.size());
  if (q == 0) return {};
  const int p = static_cast<int>(score[0].size());
  if (p == 0) return std::vector<int>(static_cast<std::size_t>(q), -1);
  // Pad to square; real pairs get a large bonus so the solver always uses
  // min(q,p) of them, matching the exhaustive-permutation definition.
  const int n = std::max(q, p);
  const double kBonus = 1e6;
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(n),
                                        std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          (i < q && j < p) ? -(score[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] + kBonus)
                           : 0.0;
  std::vector<int> assignment = hungarian_square(cost);
  std::vector<int> out(static_cast<std::size_t>(q), -1);
  for (int i = 0; i < q; ++i) {
    const int j = assignment[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = (j >= 0 && j < p) ? j : -1;
  }
  return out;
}

Association associate(const Tensor& match_logits, const std::vector<ObjectProposal>& detections,
                      const std::vector<TrackState>& tracks, const TrackerParams& params,
                      AssociationMode mode) {
  const int q = static_cast<int>(tracks.size());
  const int p = static_cast<int>(detections.size());
  VT_CHECK(match_logits.rank() == 2 && match_logits.extent(0) == q && match_logits.extent(1) == p,
           "associate: logits shaped " + shape_string(match_logits.shape()) + ", expected [" +
               std::to_string(q) + "," + std::to_string(p) + "]");

  Association result;
  result.track_of_detection.assign(static_cast<std::size_t>(p), -1);
  result.matched_logit.assign(static_cast<std::size_t>(p), 0.0);
  result.matched_score.assign(static_cast<std::size_t>(p), 0.0);
  if (p == 0) return result;
  if (q == 0) return result;  // all detections open new identities

  // Combined score: logit + cue terms.
  std::vector<std::vector<double>> combined(static_cast<std::size_t>(q),
                                            std::vector<double>(static_cast<std::size_t>(p)));
  for (int i = 0; i < q; ++i) {
    const int track_cat = tracks[static_cast<std::size_t>(i)].majority_category();
    for (int j = 0; j < p; ++j) {
      const ObjectProposal& det = detections[static_cast<std::size_t>(j)];
      const double conf = std::max(det.detection_confidence, 1e-9);
      int det_cat = 0;
      if (!det.category_scores.empty())
        det_cat = static_cast<int>(std::max_element(det.category_scores.begin(),
                                                    det.category_scores.end()) -
                                   det.category_scores.begin());
      double s = match_logits.at({i, j});
      s += params.cue_det * std::log(conf);
      s += params.cue_iou * box_iou(tracks[static_cast<std::size_t>(i)].last_box, det.box);
      s += params.cue_cat * ((track_cat >= 0 && det_cat == track_cat) ? 1.0 : 0.0);
      combined[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = s;
    }
  }

  if (mode == AssociationMode::kGreedy) {
    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return detections[static_cast<std::size_t>(a)].detection_confidence >
             detections[static_cast<std::size_t>(b)].detection_confidence;
    });
    std::vector<char> track_used(static_cast<std::size_t>(q), false);
    for (int j : order) {
      int best = -1;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < q; ++i) {
        if (track_used[static_cast<std::size_t>(i)]) continue;
        const double s = combined[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (s > best_score) {
          best_score = s;
          best = i;
        }
      }
      if (best >= 0 && best_score >= params.new_identity_threshold) {
        track_used[static_cast<std::size_t>(best)] = true;
        result.track_of_detection[static_cast<std::size_t>(j)] = best;
        result.matched_logit[static_cast<std::size_t>(j)] = match_logits.at({best, j});
        result.matched_score[static_cast<std::size_t>(j)] = best_score;
      }
    }
    return result;
  }

  std::vector<int> col_of_row = solve_assignment(combined);
  for (int i = 0; i < q; ++i) {
    const int j = col_of_row[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    const double s = combined[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (s < params.new_identity_threshold) continue;  // detection opens a new identity
    result.track_of_detection[static_cast<std::size_t>(j)] = i;
    result.matched_logit[static_cast<std::size_t>(j)] = match_logits.at({i, j});
    result.matched_score[static_cast<std::size_t>(j)] = s;
  }
  return result;
}

Tensor correlation_loss(const Tensor& likelihood_map, const Tensor& target, bool squash) {
  VT_CHECK(likelihood_map.shape() == target.shape(),
           "correlation_loss: shape mismatch " + shape_string(likelihood_map.shape()) + " vs " +
               shape_string(target.shape()));
  Tensor predicted = squash ? sigmoid_op(likelihood_map) : likelihood_map;
  Tensor diff = sub(predicted, target);
  return mean_all(mul(diff, diff));
}

}  // namespace vistrack
