#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vistrack/annotations.hpp"
#include "vistrack/rng.hpp"
#include "vistrack/tensor.hpp"

namespace vistrack {

// Moving-shapes video generator. Colored rigid shapes travel with constant
// velocity plus small seeded noise and bounce off the borders; masks are
// visible-region masks under a fixed z-order and boxes are the tight boxes
// of those masks.
struct SynthConfig {
  int num_videos = 1;
  int frames_per_video = 8;
  int frame_h = 96;
  int frame_w = 96;
  int objects_per_video = 2;
  std::vector<std::string> categories = {"disc", "square", "triangle"};
  double min_speed = 1.0;
  double max_speed = 2.5;
  double min_size = 14.0;
  double max_size = 22.0;
  bool occlusion_allowed = true;
  bool identical_appearance = false;  // all objects share shape, size and color
  std::uint64_t seed = 0;
};

struct SynthVideo {
  VideoInfo info;
  std::vector<Tensor> frames;       // [3,H,W] each
  std::vector<Instance> instances;  // ground truth, one per object identity
};

SynthVideo gen_synthetic_video(const SynthConfig& config, int video_id);

struct SynthDataset {
  AnnotationFile annotations;
  std::vector<std::vector<Tensor>> frames;  // per video
};

// num_videos videos with per-video derived seeds.
SynthDataset gen_synthetic_dataset(const SynthConfig& config);

// Still-image pseudo-video augmentation: T independently sampled affine
// maps (rotation, translation, shear about the image center) applied to the
// image and its instance masks; identities persist across the synthesized
// frames and instances pushed fully outside a frame are dropped for that
// frame.
struct AffineAugConfig {
  int t = 4;
  double rotation_deg = 15.0;     // sampled in [-r, r]
  double translation_frac = 0.1;  // of frame extents
  double shear = 0.1;
  std::uint64_t seed = 0;
};

SynthVideo augment_still(const Tensor& image, const std::vector<Instance>& instances,
                         const AffineAugConfig& config, int video_id);

}  // namespace vistrack
