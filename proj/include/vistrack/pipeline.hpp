#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vistrack/annotations.hpp"
#include "vistrack/attention.hpp"
#include "vistrack/detector.hpp"
#include "vistrack/tracker.hpp"

namespace vistrack {

enum class SamplingMode { kUniform, kRandom };

struct PipelineConfig {
  int t_train = 2;
  int t_test = 4;
  // Support sampling mode used during training; testing always samples
  // uniformly.
  SamplingMode sampling_mode = SamplingMode::kUniform;
  std::uint64_t seed = 0;
  ProposalMode proposal_mode = ProposalMode::kOracle;
  bool enable_frame_attention = true;
  bool enable_object_attention = true;
  bool enable_correlation_map = true;
  int memory_horizon = 10;  // frames a silent track stays alive
  bool strict_causal = false;
  double jitter = 0.05;
  int feature_channels = 32;
  int stride = 4;
  int roi_size = 7;
  int samples_per_bin = 2;
  int bottleneck_ratio = 4;
  std::vector<std::string> categories = {"disc", "square", "triangle"};
  AssociationMode association_mode = AssociationMode::kGreedy;
  MapPoolSource map_pool_source = MapPoolSource::kRefined;
  bool correlation_loss_squash = true;
  double sigma_factor = 0.25;
  double new_identity_threshold = 0.0;
  double cue_det = 1.0;
  double cue_iou = 1.0;
  double cue_cat = 1.0;
  double lr = 0.01;
  double blob_threshold = 0.1;
  double nms_iou = 0.5;
  int jobs = 1;
  int train_steps = 0;

  void validate() const;
};

// All learned parameters of the system.
struct ModelParams {
  DetectorParams detector;
  AttentionParams frame_attention;
  AttentionParams object_attention;
  TrackerParams tracker;

  static ModelParams init(const PipelineConfig& config, std::uint64_t seed);
  std::vector<Tensor> all_tensors() const;
};

// Support frame indices for one current frame. Uniform mode spreads T
// indices evenly over [0, video_len-1] with endpoints included, shifting
// collisions (with the current frame or each other) to the nearest unused
// neighbor. Random mode draws T distinct indices != current with the given
// seed, cycling when fewer are available. Degenerate videos fall back to
// the current frame itself.
std::vector<int> sample_support(int video_len, int current, int t, SamplingMode mode,
                                std::uint64_t seed);

struct TrackedDetection {
  int identity = 0;
  Box box;
  Mask mask;
  int category = 0;
  double confidence = 1.0;
  double match_prob = 1.0;
  bool matched = false;
};

struct VideoState {
  std::vector<TrackState> tracks;
  int next_identity = 1;
};

struct FrameResult {
  std::vector<TrackedDetection> detections;
};

// One online step: features, attention, proposals, heads, tracking, and the
// identity-memory update. gt_boxes feeds oracle proposals.
FrameResult process_frame(VideoState& state, const Frame& frame,
                          const std::vector<Frame>& supports, const std::vector<Box>* gt_boxes,
                          const PipelineConfig& config, const ModelParams& params, Rng& rng);

// Ground truth boxes of one video indexed per frame (oracle proposals).
std::vector<std::vector<Box>> gt_boxes_per_frame(const std::vector<Instance>& gt,
                                                 int frame_count);

// Processes a video frame by frame and assembles one Instance per emitted
// identity: category by majority vote, score = mean detection confidence
// times mean match probability (matched entries; 1 when none matched).
std::vector<Instance> run_video(const std::vector<Frame>& frames,
                                const std::vector<Instance>* gt, const PipelineConfig& config,
                                const ModelParams& params);

struct VideoSample {
  int video_id = 0;
  std::vector<Frame> frames;
  std::vector<Instance> gt;
};

std::vector<VideoSample> make_samples(const AnnotationFile& annotations,
                                      const std::vector<std::vector<Tensor>>& frames);

// Joint desk-scale training: classification + box + mask + correlation +
// association losses, plain SGD. Returns the mean total loss over the last
// min(steps, 20) steps; throws NumericalError naming the term that became
// non-finite.
double train_model(const std::vector<VideoSample>& data, const PipelineConfig& config,
                   ModelParams& params, int steps, std::ostream* log = nullptr);

}  // namespace vistrack
