#include "vistrack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

namespace vistrack {

void PipelineConfig::validate() const {
  VT_CHECK(t_train >= 0 && t_test >= 0, "config: support counts must be nonnegative");
  VT_CHECK(memory_horizon >= 1, "config: memory_horizon must be >= 1");
  VT_CHECK(feature_channels % 4 == 0 && feature_channels % bottleneck_ratio == 0,
           "config: feature_channels " + std::to_string(feature_channels) +
               " must be divisible by 4 and by the bottleneck ratio");
  VT_CHECK(stride >= 1 && roi_size >= 1, "config: stride and roi_size must be positive");
  VT_CHECK(!categories.empty(), "config: categories must be nonempty");
  VT_CHECK(sigma_factor > 0.0, "config: sigma_factor must be positive");
  VT_CHECK(jobs >= 1, "config: jobs must be >= 1");
}

ModelParams ModelParams::init(const PipelineConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams p;
  Rng det_rng(derive_seed(seed, 1));
  p.detector = DetectorParams::init(config.feature_channels, config.stride,
                                    static_cast<int>(config.categories.size()), det_rng);
  Rng frame_rng(derive_seed(seed, 2));
  p.frame_attention = AttentionParams::init(config.feature_channels, config.bottleneck_ratio,
                                            frame_rng);
  Rng object_rng(derive_seed(seed, 3));
  p.object_attention = AttentionParams::init(config.feature_channels, config.bottleneck_ratio,
                                             object_rng);
  Rng tracker_rng(derive_seed(seed, 4));
  p.tracker = TrackerParams::init(config.feature_channels, tracker_rng);
  p.tracker.new_identity_threshold = config.new_identity_threshold;
  p.tracker.cue_det = config.cue_det;
  p.tracker.cue_iou = config.cue_iou;
  p.tracker.cue_cat = config.cue_cat;
  return p;
}

std::vector<Tensor> ModelParams::all_tensors() const {
  std::vector<Tensor> out = detector.tensors();
  for (const Tensor& t : frame_attention.tensors()) out.push_back(t);
  for (const Tensor& t : object_attention.tensors()) out.push_back(t);
  for (const Tensor& t : tracker.tensors()) out.push_back(t);
  return out;
}

std::vector<int> sample_support(int video_len, int current, int t, SamplingMode mode,
                                std::uint64_t seed) {
  VT_CHECK(video_len >= 1, "sample_support: empty video");
  VT_CHECK(current >= 0 && current < video_len,
           "sample_support: current frame " + std::to_string(current) + " outside [0," +
               std::to_string(video_len) + ")");
  VT_CHECK(t >= 0, "sample_support: negative support count");
  if (t == 0) return {};
  if (video_len == 1) return std::vector<int>(static_cast<std::size_t>(t), current);

  if (mode == SamplingMode::kUniform) {
    std::vector<int> picks;
    std::vector<char> used(static_cast<std::size_t>(video_len), false);
    for (int k = 0; k < t; ++k) {
      int idx = t == 1 ? 0
                       : static_cast<int>(std::lround(static_cast<double>(k) *
                                                      (video_len - 1) / (t - 1)));
      // Shift collisions (current frame or an already used index) to the
      // nearest unused neighbor, preferring the smaller index on ties.
      if (idx == current || used[static_cast<std::size_t>(idx)]) {
        int found = -1;
        for (int d = 1; d < video_len; ++d) {
          const int lo = idx - d, hi = idx + d;
          if (lo >= 0 && !used[static_cast<std::size_t>(lo)] && lo != current) {
            found = lo;
            break;
          }
          if (hi < video_len && !used[static_cast<std::size_t>(hi)] && hi != current) {
            found = hi;
            break;
          }
        }
        if (found >= 0) idx = found;  // else: keep the duplicate (t >= len)
      }
      used[static_cast<std::size_t>(idx)] = true;
      picks.push_back(idx);
    }
    return picks;
  }

  Rng rng(seed);
  std::vector<int> eligible;
  for (int i = 0; i < video_len; ++i)
    if (i != current) eligible.push_back(i);
  std::vector<int> picks;
  std::vector<int> pool;
  for (int k = 0; k < t; ++k) {
    if (pool.empty()) pool = eligible;  // cycle when fewer frames than requested
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(pool.size()));
    picks.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return picks;
}

namespace {

Mask materialize_mask(const Tensor& mask_logits, const Box& box, int height, int width) {
  Mask mask(height, width);
  if (mask_logits.size() == 0) return mask;
  const int gh = mask_logits.extent(0), gw = mask_logits.extent(1);
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
  const int y1 = std::min(height, static_cast<int>(std::ceil(box.y + box.h)));
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
  const int x1 = std::min(width, static_cast<int>(std::ceil(box.x + box.w)));
  for (int y = y0; y < y1; ++y) {
    const double v = (y + 0.5 - box.y) / box.h;
    if (v < 0.0 || v >= 1.0) continue;
    const int gy = std::min(gh - 1, static_cast<int>(v * gh));
    for (int x = x0; x < x1; ++x) {
      const double u = (x + 0.5 - box.x) / box.w;
      if (u < 0.0 || u >= 1.0) continue;
      const int gx = std::min(gw - 1, static_cast<int>(u * gw));
      // logit >= 0 <=> sigmoid >= 0.5
      if (mask_logits.at({gy, gx}) >= 0.0) mask.set(y, x, true);
    }
  }
  return mask;
}

int argmax_category(const Tensor& scores_row) {
  int best = 0;
  double best_v = -1e300;
  for (int k = 0; k < scores_row.extent(0); ++k)
    if (scores_row.at({k}) > best_v) {
      best_v = scores_row.at({k});
      best = k;
    }
  return best;
}

double sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

FrameResult process_frame(VideoState& state, const Frame& frame,
                          const std::vector<Frame>& supports, const std::vector<Box>* gt_boxes,
                          const PipelineConfig& config, const ModelParams& params, Rng& rng) {
  FrameResult result;

  Tensor features = extract_features(frame, params.detector);
  std::vector<Tensor> support_features;
  support_features.reserve(supports.size());
  for (const Frame& s : supports) support_features.push_back(extract_features(s, params.detector));
  if (support_features.empty()) support_features.push_back(features);

  Tensor refined_frame = config.enable_frame_attention
                             ? dual_attention(features, support_features, params.frame_attention)
                             : features;

  ProposalOptions options;
  options.jitter = config.jitter;
  options.roi_size = config.roi_size;
  options.samples_per_bin = config.samples_per_bin;
  options.blob_threshold = config.blob_threshold;
  options.nms_iou = config.nms_iou;
  std::vector<ObjectProposal> proposals = propose(frame, refined_frame, config.proposal_mode,
                                                  gt_boxes, params.detector, options, rng);
  const int det_count = static_cast<int>(proposals.size());

  // Retire tracks that have been silent for longer than the horizon; they
  // never reacquire detections.
  std::vector<TrackState> live;
  for (TrackState& t : state.tracks)
    if (frame.index - t.last_frame <= config.memory_horizon) live.push_back(std::move(t));
  state.tracks = std::move(live);

  if (det_count == 0) return result;

  std::vector<Tensor> roi_list;
  roi_list.reserve(static_cast<std::size_t>(det_count));
  for (const ObjectProposal& p : proposals) roi_list.push_back(p.roi_features);
  Tensor rois = stack0(roi_list);
  if (config.enable_object_attention)
    rois = object_dual_attention(rois, support_features, params.object_attention);

  HeadOutputs heads = predict_heads(rois, params.detector);
  for (int p = 0; p < det_count; ++p) {
    Tensor row = slice0(heads.category_scores, p);
    proposals[static_cast<std::size_t>(p)].category_scores.assign(row.data().begin(),
                                                                  row.data().end());
    proposals[static_cast<std::size_t>(p)].mask_logits = slice0(heads.mask_logits, p);
  }

  const int track_count = static_cast<int>(state.tracks.size());
  Tensor logits({track_count, det_count});
  if (track_count > 0) {
    std::vector<Tensor> ref_list;
    ref_list.reserve(static_cast<std::size_t>(track_count));
    for (const TrackState& t : state.tracks) ref_list.push_back(t.reference_roi);
    Tensor refs = stack0(ref_list);
    Tensor pair_vectors = pairwise_similarity(rois, refs, params.tracker);
    const double inv_stride = 1.0 / config.stride;
    for (int q = 0; q < track_count; ++q) {
      CorrelationOutput corr;
      if (config.enable_correlation_map)
        corr = correlation_map(state.tracks[static_cast<std::size_t>(q)].reference_roi,
                               refined_frame, params.tracker);
      Tensor pair_row = slice0(pair_vectors, q);  // [P,256]
      for (int p = 0; p < det_count; ++p) {
        Tensor v_pair = slice0(pair_row, p);
        Tensor v_map =
            config.enable_correlation_map
                ? map_similarity(corr, proposals[static_cast<std::size_t>(p)].box.scaled(inv_stride),
                                 config.map_pool_source)
                : Tensor::zeros({TrackerParams::kSimilarityDim});
        logits.at({q, p}) = match_score(v_pair, v_map, params.tracker).item();
      }
    }
  }

  Association assoc = associate(logits, proposals, state.tracks, params.tracker,
                                config.association_mode);

  for (int p = 0; p < det_count; ++p) {
    ObjectProposal& det = proposals[static_cast<std::size_t>(p)];
    const int category = static_cast<int>(
        std::max_element(det.category_scores.begin(), det.category_scores.end()) -
        det.category_scores.begin());
    const int q = assoc.track_of_detection[static_cast<std::size_t>(p)];
    Tensor det_roi = slice0(rois, p);

    TrackedDetection out;
    out.box = det.box;
    out.category = category;
    out.confidence = det.detection_confidence;
    out.mask = materialize_mask(det.mask_logits, det.box, frame.pixels.extent(1),
                                frame.pixels.extent(2));
    if (q >= 0) {
      TrackState& track = state.tracks[static_cast<std::size_t>(q)];
      track.reference_roi = det_roi;  // replace-on-match policy
      track.last_box = det.box;
      track.last_frame = frame.index;
      track.last_score = assoc.matched_score[static_cast<std::size_t>(p)];
      track.vote(category);
      out.identity = track.identity;
      out.matched = true;
      out.match_prob = sigmoid(assoc.matched_logit[static_cast<std::size_t>(p)]);
    } else {
      TrackState track;
      track.identity = state.next_identity++;
      track.reference_roi = det_roi;
      track.last_box = det.box;
      track.last_frame = frame.index;
      track.last_score = 0.0;
      track.vote(category);
      out.identity = track.identity;
      out.matched = false;
      out.match_prob = 1.0;
      state.tracks.push_back(std::move(track));
    }
    result.detections.push_back(std::move(out));
  }
  return result;
}

std::vector<std::vector<Box>> gt_boxes_per_frame(const std::vector<Instance>& gt,
                                                 int frame_count) {
  std::vector<std::vector<Box>> boxes(static_cast<std::size_t>(frame_count));
  for (const Instance& inst : gt)
    for (const InstanceEntry& e : inst.entries)
      if (e.frame >= 0 && e.frame < frame_count)
        boxes[static_cast<std::size_t>(e.frame)].push_back(e.box);
  return boxes;
}

std::vector<Instance> run_video(const std::vector<Frame>& frames,
                                const std::vector<Instance>* gt, const PipelineConfig& config,
                                const ModelParams& params) {
  VT_CHECK(!frames.empty(), "run_video: empty video");
  const int len = static_cast<int>(frames.size());
  const int video_id = frames[0].video_id;
  std::vector<std::vector<Box>> gt_boxes;
  if (gt != nullptr) gt_boxes = gt_boxes_per_frame(*gt, len);

  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(video_id)));
  VideoState state;

  struct Accumulated {
    std::vector<InstanceEntry> entries;
    std::vector<int> categories;
    std::vector<double> confidences;
    std::vector<double> matched_probs;
  };
  std::map<int, Accumulated> per_identity;

  for (int t = 0; t < len; ++t) {
    // Testing always samples supports uniformly; the strict-causal flag
    // restricts the pool to frames seen so far.
    const int pool = config.strict_causal ? t + 1 : len;
    std::vector<int> support_idx = sample_support(pool, t, config.t_test, SamplingMode::kUniform,
                                                  derive_seed(config.seed, 1000 + t));
    std::vector<Frame> supports;
    for (int idx : support_idx) supports.push_back(frames[static_cast<std::size_t>(idx)]);

    FrameResult fr = process_frame(state, frames[static_cast<std::size_t>(t)], supports,
                                   gt ? &gt_boxes[static_cast<std::size_t>(t)] : nullptr, config,
                                   params, rng);
    for (TrackedDetection& det : fr.detections) {
      Accumulated& acc = per_identity[det.identity];
      InstanceEntry entry;
      entry.frame = t;
      entry.box = det.box;
      entry.mask = std::move(det.mask);
      acc.entries.push_back(std::move(entry));
      acc.categories.push_back(det.category);
      acc.confidences.push_back(det.confidence);
      if (det.matched) acc.matched_probs.push_back(det.match_prob);
    }
  }

  std::vector<Instance> tracks;
  for (auto& [identity, acc] : per_identity) {
    Instance inst;
    inst.video = video_id;
    inst.identity = identity;
    std::map<int, int> votes;
    for (int c : acc.categories) ++votes[c];
    int best_cat = 0, best_count = -1;
    for (const auto& [c, n] : votes)
      if (n > best_count) {
        best_count = n;
        best_cat = c;
      }
    inst.category = config.categories[static_cast<std::size_t>(
        std::min<int>(best_cat, static_cast<int>(config.categories.size()) - 1))];
    double mean_conf = 0.0;
    for (double c : acc.confidences) mean_conf += c;
    mean_conf /= static_cast<double>(acc.confidences.size());
    double mean_prob = 1.0;  // singleton tracks have no match terms
    if (!acc.matched_probs.empty()) {
      mean_prob = 0.0;
      for (double p : acc.matched_probs) mean_prob += p;
      mean_prob /= static_cast<double>(acc.matched_probs.size());
    }
    inst.score = mean_conf * mean_prob;
    inst.entries = std::move(acc.entries);
    tracks.push_back(std::move(inst));
  }
  return tracks;
}

std::vector<VideoSample> make_samples(const AnnotationFile& annotations,
                                      const std::vector<std::vector<Tensor>>& frames) {
  VT_CHECK(annotations.videos.size() == frames.size(),
           "make_samples: frame stacks do not match video records");
  std::vector<VideoSample> samples;
  for (std::size_t v = 0; v < annotations.videos.size(); ++v) {
    VideoSample s;
    s.video_id = annotations.videos[v].id;
    for (std::size_t f = 0; f < frames[v].size(); ++f)
      s.frames.push_back(Frame{frames[v][f], static_cast<int>(f), s.video_id});
    for (const Instance& inst : annotations.instances)
      if (inst.video == s.video_id) s.gt.push_back(inst);
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

struct FrameGt {
  std::vector<Box> boxes;
  std::vector<int> categories;
  std::vector<int> identities;
  std::vector<const Mask*> masks;
};

FrameGt gt_at_frame(const VideoSample& sample, int frame,
                    const std::vector<std::string>& categories) {
  FrameGt out;
  for (const Instance& inst : sample.gt) {
    int cat = 0;
    for (std::size_t c = 0; c < categories.size(); ++c)
      if (categories[c] == inst.category) cat = static_cast<int>(c);
    for (const InstanceEntry& e : inst.entries)
      if (e.frame == frame) {
        out.boxes.push_back(e.box);
        out.categories.push_back(cat);
        out.identities.push_back(inst.identity);
        out.masks.push_back(&e.mask);
      }
  }
  return out;
}

// Nearest-sampled gt mask restricted to a proposal box, on the mask grid.
Tensor mask_target(const Mask& gt_mask, const Box& box, int gh, int gw) {
  Tensor target({gh, gw});
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      const double py = box.y + (gy + 0.5) / gh * box.h;
      const double px = box.x + (gx + 0.5) / gw * box.w;
      const int iy = static_cast<int>(std::floor(py));
      const int ix = static_cast<int>(std::floor(px));
      if (iy >= 0 && iy < gt_mask.h && ix >= 0 && ix < gt_mask.w && gt_mask.at(iy, ix))
        target.at({gy, gx}) = 1.0;
    }
  return target;
}

void check_finite(const Tensor& loss, const std::string& term, int step) {
  if (!loss.all_finite())
    throw NumericalError(term + " loss became non-finite at training step " +
                         std::to_string(step));
}

}  // namespace

double train_model(const std::vector<VideoSample>& data, const PipelineConfig& config,
                   ModelParams& params, int steps, std::ostream* log) {
  VT_CHECK(!data.empty(), "train_model: empty dataset");
  Sgd sgd{config.lr, params.all_tensors()};
  Rng rng(derive_seed(config.seed, 0xABCD));
  const int mask_grid = 2 * config.roi_size;
  const double inv_stride = 1.0 / config.stride;

  std::deque<double> recent;
  for (int step = 0; step < steps; ++step) {
    const VideoSample& sample =
        data[static_cast<std::size_t>(rng.uniform_below(data.size()))];
    const int len = static_cast<int>(sample.frames.size());
    int current = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(len)));
    FrameGt gt_now = gt_at_frame(sample, current, config.categories);
    if (gt_now.boxes.empty()) continue;  // nothing to supervise on this frame
    int reference = len == 1 ? current
                             : static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(len)));
    if (reference == current && len > 1) reference = (reference + 1) % len;
    FrameGt gt_ref = gt_at_frame(sample, reference, config.categories);

    std::vector<int> support_idx =
        sample_support(len, current, config.t_train, config.sampling_mode, rng.next());

    Tape tape;
    Tensor f_cur = extract_features(sample.frames[static_cast<std::size_t>(current)],
                                    params.detector);
    std::vector<Tensor> support_features;
    for (int idx : support_idx)
      support_features.push_back(
          extract_features(sample.frames[static_cast<std::size_t>(idx)], params.detector));
    if (support_features.empty()) support_features.push_back(f_cur);
    if (config.enable_frame_attention)
      f_cur = dual_attention(f_cur, support_features, params.frame_attention);

    // Jittered oracle proposals on the current frame.
    const int det_count = static_cast<int>(gt_now.boxes.size());
    std::vector<Tensor> roi_list;
    std::vector<Box> det_boxes;
    for (int p = 0; p < det_count; ++p) {
      Box box = jitter_box(gt_now.boxes[static_cast<std::size_t>(p)], config.jitter, rng);
      det_boxes.push_back(box);
      roi_list.push_back(roi_align(f_cur, box.scaled(inv_stride), config.roi_size,
                                   config.roi_size, config.samples_per_bin));
    }
    Tensor rois = stack0(roi_list);
    if (config.enable_object_attention)
      rois = object_dual_attention(rois, support_features, params.object_attention);

    HeadOutputs heads = predict_heads(rois, params.detector);

    // Classification, box regression and mask terms.
    Tensor cls_loss = Tensor::scalar(0.0);
    Tensor box_loss = Tensor::scalar(0.0);
    Tensor mask_loss = Tensor::scalar(0.0);
    for (int p = 0; p < det_count; ++p) {
      cls_loss = add(cls_loss, softmax_cross_entropy(slice0(heads.class_logits, p),
                                                     gt_now.categories[static_cast<std::size_t>(p)]));
      const auto deltas = box_to_deltas(det_boxes[static_cast<std::size_t>(p)],
                                        gt_now.boxes[static_cast<std::size_t>(p)]);
      Tensor target_deltas = Tensor::from({4}, {deltas[0], deltas[1], deltas[2], deltas[3]});
      Tensor dd = sub(slice0(heads.box_deltas, p), target_deltas);
      box_loss = add(box_loss, mean_all(mul(dd, dd)));
      Tensor m_target = mask_target(*gt_now.masks[static_cast<std::size_t>(p)],
                                    det_boxes[static_cast<std::size_t>(p)], mask_grid, mask_grid);
      Tensor md = sub(sigmoid_op(slice0(heads.mask_logits, p)), m_target);
      mask_loss = add(mask_loss, mean_all(mul(md, md)));
    }
    const double inv_n = 1.0 / det_count;
    cls_loss = scale(cls_loss, inv_n);
    box_loss = scale(box_loss, inv_n);
    mask_loss = scale(mask_loss, inv_n);

    // Tracking terms against the reference frame.
    Tensor corr_loss = Tensor::scalar(0.0);
    Tensor assoc_loss = Tensor::scalar(0.0);
    if (!gt_ref.identities.empty()) {
      Tensor f_ref = extract_features(sample.frames[static_cast<std::size_t>(reference)],
                                      params.detector);
      if (config.enable_frame_attention)
        f_ref = dual_attention(f_ref, support_features, params.frame_attention);
      std::vector<Tensor> ref_roi_list;
      for (const Box& b : gt_ref.boxes)
        ref_roi_list.push_back(roi_align(f_ref, b.scaled(inv_stride), config.roi_size,
                                         config.roi_size, config.samples_per_bin));
      Tensor ref_rois = stack0(ref_roi_list);
      if (config.enable_object_attention)
        ref_rois = object_dual_attention(ref_rois, support_features, params.object_attention);
      const int ref_count = static_cast<int>(gt_ref.identities.size());

      Tensor pair_vectors = pairwise_similarity(rois, ref_rois, params.tracker);

      int corr_terms = 0;
      std::vector<std::vector<Tensor>> score(static_cast<std::size_t>(ref_count));
      for (int q = 0; q < ref_count; ++q) {
        CorrelationOutput corr;
        if (config.enable_correlation_map) {
          corr = correlation_map(slice0(ref_rois, q), f_cur, params.tracker);
          // Supervise the map with the gaussian centered at this identity's
          // current location, when it is visible.
          for (int p = 0; p < det_count; ++p)
            if (gt_now.identities[static_cast<std::size_t>(p)] ==
                gt_ref.identities[static_cast<std::size_t>(q)]) {
              Tensor target = gaussian_target(
                  gt_now.boxes[static_cast<std::size_t>(p)].scaled(inv_stride),
                  corr.likelihood_map.extent(1), corr.likelihood_map.extent(2),
                  config.sigma_factor);
              corr_loss = add(corr_loss, correlation_loss(corr.likelihood_map, target,
                                                          config.correlation_loss_squash));
              ++corr_terms;
            }
        }
        Tensor pair_row = slice0(pair_vectors, q);
        for (int p = 0; p < det_count; ++p) {
          Tensor v_map = config.enable_correlation_map
                             ? map_similarity(corr, det_boxes[static_cast<std::size_t>(p)]
                                                        .scaled(inv_stride),
                                              config.map_pool_source)
                             : Tensor::zeros({TrackerParams::kSimilarityDim});
          score[static_cast<std::size_t>(q)].push_back(
              match_score(slice0(pair_row, p), v_map, params.tracker));
        }
      }
      if (corr_terms > 0) corr_loss = scale(corr_loss, 1.0 / corr_terms);

      // Association cross-entropy: per detection, softmax over a fixed zero
      // logit for "new object" followed by the Q track logits.
      for (int p = 0; p < det_count; ++p) {
        std::vector<Tensor> options;
        options.push_back(Tensor::scalar(0.0));
        int target = 0;
        for (int q = 0; q < ref_count; ++q) {
          options.push_back(score[static_cast<std::size_t>(q)][static_cast<std::size_t>(p)]);
          if (gt_ref.identities[static_cast<std::size_t>(q)] ==
              gt_now.identities[static_cast<std::size_t>(p)])
            target = q + 1;
        }
        Tensor logits = reshape(stack0(options), {ref_count + 1});
        assoc_loss = add(assoc_loss, softmax_cross_entropy(logits, target));
      }
      assoc_loss = scale(assoc_loss, inv_n);
    }

    check_finite(cls_loss, "classification", step);
    check_finite(box_loss, "box", step);
    check_finite(mask_loss, "mask", step);
    check_finite(corr_loss, "correlation", step);
    check_finite(assoc_loss, "association", step);
    Tensor total = add(add(add(cls_loss, box_loss), add(mask_loss, corr_loss)), assoc_loss);

    sgd.zero_grad();
    tape.backward(total);
    sgd.step();

    recent.push_back(total.item());
    if (recent.size() > 20) recent.pop_front();
    if (log && (step % 50 == 0 || step + 1 == steps))
      *log << "step " << step << " total " << total.item() << "\n";
  }
  if (recent.empty()) return 0.0;
  double mean = 0.0;
  for (double v : recent) mean += v;
  return mean / static_cast<double>(recent.size());
}

}  // namespace vistrack
