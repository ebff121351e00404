#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vistrack/geometry.hpp"
#include "vistrack/tensor.hpp"

namespace vistrack {

// Malformed or inconsistent input files.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures (NaN losses, failed self-checks).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InstanceEntry {
  int frame = 0;
  Box box;
  Mask mask;
};

// One object identity across one video; used for both ground truth and
// predictions (predictions carry a score).
struct Instance {
  int video = 0;
  int identity = 0;
  std::string category;
  double score = 1.0;
  std::vector<InstanceEntry> entries;
};

struct VideoInfo {
  int id = 0;
  int height = 0;
  int width = 0;
  int frames = 0;
};

struct AnnotationFile {
  std::vector<VideoInfo> videos;
  std::vector<Instance> instances;
  bool has_scores = false;

  const VideoInfo* find_video(int id) const;
};

// JSON-backed serialization; parse rejects unknown keys and malformed RLE.
std::string serialize_annotations(const AnnotationFile& file);
AnnotationFile parse_annotations(const std::string& text);
void write_annotations(const std::filesystem::path& path, const AnnotationFile& file);
AnnotationFile read_annotations(const std::filesystem::path& path);

// Binary P6 portable pixmap; pixels in [0,1] as [3,H,W].
void write_ppm(const std::filesystem::path& path, const Tensor& pixels);
Tensor read_ppm(const std::filesystem::path& path);

// Dataset layout: DIR/frames/<video>/<frame %04d>.ppm + DIR/annotations.json.
std::filesystem::path frame_path(const std::filesystem::path& dir, int video, int frame);
void write_dataset(const std::filesystem::path& dir,
                   const std::vector<std::vector<Tensor>>& frames_per_video,
                   const AnnotationFile& annotations);
std::vector<std::vector<Tensor>> read_dataset_frames(const std::filesystem::path& dir,
                                                     const AnnotationFile& annotations);

}  // namespace vistrack
