#include "vistrack/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vistrack {

using nlohmann::json;

bool tight_box(const Mask& m, Box& out) {
  int min_x = m.w, min_y = m.h, max_x = -1, max_y = -1;
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x)
      if (m.at(y, x)) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
      }
  if (max_x < 0) return false;
  out = Box{static_cast<double>(min_x), static_cast<double>(min_y),
            static_cast<double>(max_x - min_x + 1), static_cast<double>(max_y - min_y + 1)};
  return true;
}

std::vector<int> rle_encode(const Mask& m) {
  std::vector<int> counts;
  std::uint8_t current = 0;  // runs start with zeros
  int run = 0;
  for (std::uint8_t v : m.data) {
    const std::uint8_t bit = v ? 1 : 0;
    if (bit == current) {
      ++run;
    } else {
      counts.push_back(run);
      current = bit;
      run = 1;
    }
  }
  counts.push_back(run);
  return counts;
}

Mask rle_decode(const std::vector<int>& counts, int h, int w) {
  Mask m(h, w);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (int c : counts) {
    if (c < 0 || pos + static_cast<std::size_t>(c) > m.data.size())
      throw DataError("rle counts exceed mask area " + std::to_string(h) + "x" +
                      std::to_string(w));
    std::fill(m.data.begin() + static_cast<std::ptrdiff_t>(pos),
              m.data.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(c)),
              value);
    pos += static_cast<std::size_t>(c);
    value = value ? 0 : 1;
  }
  if (pos != m.data.size())
    throw DataError("rle counts sum to " + std::to_string(pos) + ", expected " +
                    std::to_string(m.data.size()));
  return m;
}

const VideoInfo* AnnotationFile::find_video(int id) const {
  for (const VideoInfo& v : videos)
    if (v.id == id) return &v;
  return nullptr;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw DataError("unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

std::string serialize_annotations(const AnnotationFile& file) {
  json root;
  root["videos"] = json::array();
  for (const VideoInfo& v : file.videos) {
    json jv;
    jv["id"] = v.id;
    jv["height"] = v.height;
    jv["width"] = v.width;
    jv["frames"] = v.frames;
    root["videos"].push_back(jv);
  }
  root["instances"] = json::array();
  for (const Instance& inst : file.instances) {
    json ji;
    ji["video"] = inst.video;
    ji["identity"] = inst.identity;
    ji["category"] = inst.category;
    if (file.has_scores) ji["score"] = inst.score;
    ji["entries"] = json::array();
    for (const InstanceEntry& e : inst.entries) {
      json je;
      je["frame"] = e.frame;
      je["box"] = {e.box.x, e.box.y, e.box.w, e.box.h};
      je["rle"] = rle_encode(e.mask);
      ji["entries"].push_back(je);
    }
    root["instances"].push_back(ji);
  }
  return root.dump(1) + "\n";
}

AnnotationFile parse_annotations(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("annotation parse error: ") + e.what());
  }
  try {
    AnnotationFile file;
    reject_unknown_keys(root, {"videos", "instances"}, "annotation document");
    for (const json& jv : root.at("videos")) {
      reject_unknown_keys(jv, {"id", "height", "width", "frames"}, "video record");
      VideoInfo v;
      v.id = jv.at("id").get<int>();
      v.height = jv.at("height").get<int>();
      v.width = jv.at("width").get<int>();
      v.frames = jv.at("frames").get<int>();
      file.videos.push_back(v);
    }
    for (const json& ji : root.at("instances")) {
      reject_unknown_keys(ji, {"video", "identity", "category", "score", "entries"},
                          "instance record");
      Instance inst;
      inst.video = ji.at("video").get<int>();
      inst.identity = ji.at("identity").get<int>();
      inst.category = ji.at("category").get<std::string>();
      if (ji.contains("score")) {
        inst.score = ji.at("score").get<double>();
        file.has_scores = true;
      }
      const VideoInfo* video = file.find_video(inst.video);
      if (video == nullptr)
        throw DataError("instance references unknown video " + std::to_string(inst.video));
      for (const json& je : ji.at("entries")) {
        reject_unknown_keys(je, {"frame", "box", "rle"}, "instance entry");
        InstanceEntry e;
        e.frame = je.at("frame").get<int>();
        if (e.frame < 0 || e.frame >= video->frames)
          throw DataError("frame " + std::to_string(e.frame) + " out of bounds for video " +
                          std::to_string(inst.video));
        const auto box = je.at("box").get<std::vector<double>>();
        if (box.size() != 4) throw DataError("box must have 4 entries");
        e.box = Box{box[0], box[1], box[2], box[3]};
        e.mask = rle_decode(je.at("rle").get<std::vector<int>>(), video->height, video->width);
        inst.entries.push_back(std::move(e));
      }
      file.instances.push_back(std::move(inst));
    }
    return file;
  } catch (const json::exception& e) {
    throw DataError(std::string("annotation schema error: ") + e.what());
  }
}

void write_annotations(const std::filesystem::path& path, const AnnotationFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize_annotations(file);
}

AnnotationFile read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_annotations(buffer.str());
}

void write_ppm(const std::filesystem::path& path, const Tensor& pixels) {
  VT_CHECK(pixels.rank() == 3 && pixels.extent(0) == 3,
           "write_ppm: expected [3,H,W], got " + shape_string(pixels.shape()));
  const int h = pixels.extent(1), w = pixels.extent(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = pixels.at({c, y, x});
        const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)] =
            static_cast<unsigned char>(q);
      }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
    throw DataError("unsupported pixmap header in " + path.string());
  in.get();  // single whitespace after the header
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw DataError("truncated pixmap " + path.string());
  Tensor pixels({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        pixels.at({c, y, x}) =
            raw[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)] / 255.0;
  return pixels;
}

std::filesystem::path frame_path(const std::filesystem::path& dir, int video, int frame) {
  char name[16];
  std::snprintf(name, sizeof(name), "%04d.ppm", frame);
  return dir / "frames" / std::to_string(video) / name;
}

void write_dataset(const std::filesystem::path& dir,
                   const std::vector<std::vector<Tensor>>& frames_per_video,
                   const AnnotationFile& annotations) {
  VT_CHECK(frames_per_video.size() == annotations.videos.size(),
           "write_dataset: frame stacks do not match video records");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t v = 0; v < annotations.videos.size(); ++v) {
    const VideoInfo& info = annotations.videos[v];
    std::filesystem::create_directories(dir / "frames" / std::to_string(info.id), ec);
    if (ec) throw DataError("cannot create frame directory: " + ec.message());
    VT_CHECK(static_cast<int>(frames_per_video[v].size()) == info.frames,
             "write_dataset: video " + std::to_string(info.id) + " has " +
                 std::to_string(frames_per_video[v].size()) + " frames, annotation says " +
                 std::to_string(info.frames));
    for (int f = 0; f < info.frames; ++f)
      write_ppm(frame_path(dir, info.id, f), frames_per_video[v][static_cast<std::size_t>(f)]);
  }
  write_annotations(dir / "annotations.json", annotations);
}

std::vector<std::vector<Tensor>> read_dataset_frames(const std::filesystem::path& dir,
                                                     const AnnotationFile& annotations) {
  std::vector<std::vector<Tensor>> out;
  out.reserve(annotations.videos.size());
  for (const VideoInfo& info : annotations.videos) {
    std::vector<Tensor> frames;
    frames.reserve(static_cast<std::size_t>(info.frames));
    for (int f = 0; f < info.frames; ++f) {
      Tensor px = read_ppm(frame_path(dir, info.id, f));
      if (px.extent(1) != info.height || px.extent(2) != info.width)
        throw DataError("frame size mismatch for video " + std::to_string(info.id));
      frames.push_back(std::move(px));
    }
    out.push_back(std::move(frames));
  }
  return out;
}

}  // namespace vistrack
