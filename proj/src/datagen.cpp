#include "vistrack/datagen.hpp"

#include <algorithm>
#include <cmath>

namespace vistrack {

namespace {

enum class Shape { kDisc, kSquare, kTriangle };

Shape shape_of(const std::string& category) {
  if (category == "disc") return Shape::kDisc;
  if (category == "square") return Shape::kSquare;
  if (category == "triangle") return Shape::kTriangle;
  // Unknown labels render as squares; categories are free-form strings.
  return Shape::kSquare;
}

struct ObjectSpec {
  int category = 0;
  double size = 0.0;
  double color[3] = {0.0, 0.0, 0.0};
};

struct Trajectory {
  std::vector<double> cx, cy;  // per frame, cell coordinates
};

bool inside_shape(Shape shape, double size, double dx, double dy) {
  const double half = 0.5 * size;
  switch (shape) {
    case Shape::kDisc:
      return dx * dx + dy * dy <= half * half;
    case Shape::kSquare:
      return std::abs(dx) <= half && std::abs(dy) <= half;
    case Shape::kTriangle:
      // Apex up: width grows linearly from the apex to the base.
      return dy >= -half && dy <= half && std::abs(dx) <= 0.5 * (dy + half);
  }
  return false;
}

std::vector<Trajectory> simulate(const SynthConfig& cfg, const std::vector<ObjectSpec>& objects,
                                 Rng& rng) {
  std::vector<Trajectory> trajectories(objects.size());
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const double half = 0.5 * objects[o].size;
    double cx = rng.uniform(half, cfg.frame_w - half);
    double cy = rng.uniform(half, cfg.frame_h - half);
    const double speed = rng.uniform(cfg.min_speed, cfg.max_speed);
    const double heading = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double vx = speed * std::cos(heading);
    double vy = speed * std::sin(heading);
    for (int f = 0; f < cfg.frames_per_video; ++f) {
      trajectories[o].cx.push_back(cx);
      trajectories[o].cy.push_back(cy);
      cx += vx + rng.uniform(-0.15, 0.15);
      cy += vy + rng.uniform(-0.15, 0.15);
      if (cx - half < 0.0) {
        cx = 2.0 * half - cx;
        vx = -vx;
      }
      if (cx + half > cfg.frame_w) {
        cx = 2.0 * (cfg.frame_w - half) - cx;
        vx = -vx;
      }
      if (cy - half < 0.0) {
        cy = 2.0 * half - cy;
        vy = -vy;
      }
      if (cy + half > cfg.frame_h) {
        cy = 2.0 * (cfg.frame_h - half) - cy;
        vy = -vy;
      }
    }
  }
  return trajectories;
}

bool boxes_overlap_anywhere(const SynthConfig& cfg, const std::vector<ObjectSpec>& objects,
                            const std::vector<Trajectory>& trajectories) {
  for (int f = 0; f < cfg.frames_per_video; ++f)
    for (std::size_t a = 0; a < objects.size(); ++a)
      for (std::size_t b = a + 1; b < objects.size(); ++b) {
        const double ra = 0.5 * objects[a].size, rb = 0.5 * objects[b].size;
        const Box ba{trajectories[a].cx[static_cast<std::size_t>(f)] - ra,
                     trajectories[a].cy[static_cast<std::size_t>(f)] - ra, objects[a].size,
                     objects[a].size};
        const Box bb{trajectories[b].cx[static_cast<std::size_t>(f)] - rb,
                     trajectories[b].cy[static_cast<std::size_t>(f)] - rb, objects[b].size,
                     objects[b].size};
        if (box_iou(ba, bb) > 0.0) return true;
      }
  return false;
}

}  // namespace

SynthVideo gen_synthetic_video(const SynthConfig& cfg, int video_id) {
  VT_CHECK(cfg.frames_per_video > 0 && cfg.frame_h > 0 && cfg.frame_w > 0,
           "gen_synthetic_video: extents must be positive");
  VT_CHECK(!cfg.categories.empty(), "gen_synthetic_video: categories must be nonempty");
  VT_CHECK(cfg.max_size < std::min(cfg.frame_h, cfg.frame_w),
           "gen_synthetic_video: objects of size " + std::to_string(cfg.max_size) +
               " too large for " + std::to_string(cfg.frame_h) + "x" + std::to_string(cfg.frame_w) +
               " frames");

  const std::uint64_t video_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(video_id));
  std::vector<ObjectSpec> objects;
  std::vector<Trajectory> trajectories;
  const int max_attempts = cfg.occlusion_allowed ? 1 : 200;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(derive_seed(video_seed, static_cast<std::uint64_t>(attempt)));
    objects.clear();
    for (int o = 0; o < cfg.objects_per_video; ++o) {
      ObjectSpec spec;
      if (cfg.identical_appearance && o > 0) {
        spec = objects[0];
        // keep consuming the same number of draws so trajectories stay
        // decoupled from the appearance mode
        rng.uniform_below(cfg.categories.size());
        rng.uniform(cfg.min_size, cfg.max_size);
        for (int c = 0; c < 3; ++c) rng.uniform(0.35, 1.0);
      } else {
        spec.category = static_cast<int>(rng.uniform_below(cfg.categories.size()));
        spec.size = rng.uniform(cfg.min_size, cfg.max_size);
        for (int c = 0; c < 3; ++c) spec.color[c] = rng.uniform(0.35, 1.0);
      }
      objects.push_back(spec);
    }
    trajectories = simulate(cfg, objects, rng);
    if (cfg.occlusion_allowed || !boxes_overlap_anywhere(cfg, objects, trajectories)) break;
    VT_CHECK(attempt + 1 < max_attempts,
             "gen_synthetic_video: could not place non-occluding objects");
  }

  SynthVideo video;
  video.info = VideoInfo{video_id, cfg.frame_h, cfg.frame_w, cfg.frames_per_video};
  video.instances.resize(static_cast<std::size_t>(cfg.objects_per_video));
  for (int o = 0; o < cfg.objects_per_video; ++o) {
    video.instances[static_cast<std::size_t>(o)].video = video_id;
    video.instances[static_cast<std::size_t>(o)].identity = o + 1;
    video.instances[static_cast<std::size_t>(o)].category =
        cfg.categories[static_cast<std::size_t>(objects[static_cast<std::size_t>(o)].category)];
  }

  for (int f = 0; f < cfg.frames_per_video; ++f) {
    Tensor pixels({3, cfg.frame_h, cfg.frame_w});
    std::vector<Mask> masks(static_cast<std::size_t>(cfg.objects_per_video),
                            Mask(cfg.frame_h, cfg.frame_w));
    for (int y = 0; y < cfg.frame_h; ++y)
      for (int x = 0; x < cfg.frame_w; ++x) {
        // Later objects sit on top.
        int top = -1;
        for (int o = 0; o < cfg.objects_per_video; ++o) {
          const ObjectSpec& spec = objects[static_cast<std::size_t>(o)];
          const double dx = (x + 0.5) - trajectories[static_cast<std::size_t>(o)].cx[static_cast<std::size_t>(f)];
          const double dy = (y + 0.5) - trajectories[static_cast<std::size_t>(o)].cy[static_cast<std::size_t>(f)];
          if (inside_shape(shape_of(cfg.categories[static_cast<std::size_t>(spec.category)]),
                           spec.size, dx, dy))
            top = o;
        }
        if (top >= 0) {
          masks[static_cast<std::size_t>(top)].set(y, x, true);
          for (int c = 0; c < 3; ++c)
            pixels.at({c, y, x}) = objects[static_cast<std::size_t>(top)].color[c];
        }
      }
    video.frames.push_back(std::move(pixels));
    for (int o = 0; o < cfg.objects_per_video; ++o) {
      Box box;
      if (!tight_box(masks[static_cast<std::size_t>(o)], box)) continue;  // fully occluded
      InstanceEntry entry;
      entry.frame = f;
      entry.box = box;
      entry.mask = std::move(masks[static_cast<std::size_t>(o)]);
      video.instances[static_cast<std::size_t>(o)].entries.push_back(std::move(entry));
    }
  }
  return video;
}

SynthDataset gen_synthetic_dataset(const SynthConfig& cfg) {
  SynthDataset ds;
  for (int v = 0; v < cfg.num_videos; ++v) {
    SynthVideo video = gen_synthetic_video(cfg, v);
    ds.annotations.videos.push_back(video.info);
    for (Instance& inst : video.instances)
      if (!inst.entries.empty()) ds.annotations.instances.push_back(std::move(inst));
    ds.frames.push_back(std::move(video.frames));
  }
  return ds;
}

namespace {

struct Affine {
  // p' = M (p - c) + c + t
  double m[2][2];
  double tx, ty, cx, cy;

  void invert(double px, double py, double& qx, double& qy) const {
    const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    const double rx = px - cx - tx;
    const double ry = py - cy - ty;
    qx = (m[1][1] * rx - m[0][1] * ry) / det + cx;
    qy = (-m[1][0] * rx + m[0][0] * ry) / det + cy;
  }
};

Affine sample_affine(const AffineAugConfig& cfg, int w, int h, Rng& rng) {
  const double theta = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg) * 3.14159265358979323846 / 180.0;
  const double tx = rng.uniform(-cfg.translation_frac, cfg.translation_frac) * w;
  const double ty = rng.uniform(-cfg.translation_frac, cfg.translation_frac) * h;
  const double shx = rng.uniform(-cfg.shear, cfg.shear);
  const double shy = rng.uniform(-cfg.shear, cfg.shear);
  const double c = std::cos(theta), s = std::sin(theta);
  Affine a;
  // rotation composed with shear [[1,shx],[shy,1]]
  a.m[0][0] = c * 1.0 + (-s) * shy;
  a.m[0][1] = c * shx + (-s) * 1.0;
  a.m[1][0] = s * 1.0 + c * shy;
  a.m[1][1] = s * shx + c * 1.0;
  a.tx = tx;
  a.ty = ty;
  a.cx = 0.5 * w;
  a.cy = 0.5 * h;
  return a;
}

double bilinear_pixel(const Tensor& image, int c, double iy, double ix) {
  const int h = image.extent(1), w = image.extent(2);
  const int y0 = static_cast<int>(std::floor(iy));
  const int x0 = static_cast<int>(std::floor(ix));
  double v = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int y = y0 + dy, x = x0 + dx;
      if (y < 0 || y >= h || x < 0 || x >= w) continue;
      const double wy = dy ? iy - y0 : 1.0 - (iy - y0);
      const double wx = dx ? ix - x0 : 1.0 - (ix - x0);
      v += wy * wx * image.at({c, y, x});
    }
  return v;
}

}  // namespace

SynthVideo augment_still(const Tensor& image, const std::vector<Instance>& instances,
                         const AffineAugConfig& cfg, int video_id) {
  VT_CHECK(image.rank() == 3 && image.extent(0) == 3,
           "augment_still: expected [3,H,W] image, got " + shape_string(image.shape()));
  VT_CHECK(cfg.t > 0, "augment_still: frame count must be positive");
  VT_CHECK(cfg.rotation_deg >= 0.0 && cfg.translation_frac >= 0.0 && cfg.shear >= 0.0,
           "augment_still: ranges must be nonnegative");
  for (const Instance& inst : instances)
    VT_CHECK(!inst.entries.empty() && !inst.entries[0].mask.data.empty(),
             "augment_still: instances must carry masks");
  const int h = image.extent(1), w = image.extent(2);

  SynthVideo video;
  video.info = VideoInfo{video_id, h, w, cfg.t};
  video.instances.resize(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    video.instances[i].video = video_id;
    video.instances[i].identity = instances[i].identity;
    video.instances[i].category = instances[i].category;
  }

  Rng rng(cfg.seed);
  for (int f = 0; f < cfg.t; ++f) {
    const Affine map = sample_affine(cfg, w, h, rng);
    Tensor pixels({3, h, w});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double qx, qy;
        map.invert(x + 0.5, y + 0.5, qx, qy);
        for (int c = 0; c < 3; ++c) pixels.at({c, y, x}) = bilinear_pixel(image, c, qy - 0.5, qx - 0.5);
      }
    video.frames.push_back(std::move(pixels));

    for (std::size_t i = 0; i < instances.size(); ++i) {
      const Mask& src = instances[i].entries[0].mask;
      Mask dst(h, w);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double qx, qy;
          map.invert(x + 0.5, y + 0.5, qx, qy);
          const int sy = static_cast<int>(std::lround(qy - 0.5));
          const int sx = static_cast<int>(std::lround(qx - 0.5));
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
          if (src.at(sy, sx)) dst.set(y, x, true);
        }
      Box box;
      if (!tight_box(dst, box)) continue;  // pushed outside: drop for this frame
      InstanceEntry entry;
      entry.frame = f;
      entry.box = box;
      entry.mask = std::move(dst);
      video.instances[i].entries.push_back(std::move(entry));
    }
  }
  return video;
}

}  // namespace vistrack
