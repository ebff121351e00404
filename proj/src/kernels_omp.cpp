#include "vistrack/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace vistrack::kernels {

namespace {

// Bilinear read with zero outside the grid, positions in pixel-index space.
inline double bilinear(const double* plane, int h, int w, double py, double px) {
  const int y0 = static_cast<int>(std::floor(py));
  const int x0 = static_cast<int>(std::floor(px));
  const double fy = py - y0;
  const double fx = px - x0;
  double v = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    const int y = y0 + dy;
    if (y < 0 || y >= h) continue;
    const double wy = dy ? fy : 1.0 - fy;
    for (int dx = 0; dx <= 1; ++dx) {
      const int x = x0 + dx;
      if (x < 0 || x >= w) continue;
      const double wx = dx ? fx : 1.0 - fx;
      v += wy * wx * plane[y * w + x];
    }
  }
  return v;
}

}  // namespace

void matmul(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      y[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
      y[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
      y[i * n + j] = acc;
    }
  }
}

void conv1x1_forward(const double* in, const double* w, const double* bias,
                     double* out, int cin, int cout, int npix) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < cout; ++c) {
    for (int p = 0; p < npix; ++p) {
      double acc = bias ? bias[c] : 0.0;
      for (int k = 0; k < cin; ++k) acc += w[c * cin + k] * in[k * npix + p];
      out[c * npix + p] = acc;
    }
  }
}

void conv1x1_backward_input(const double* gout, const double* w, double* gin,
                            int cin, int cout, int npix) {
#pragma omp parallel for schedule(static)
  for (int k = 0; k < cin; ++k) {
    for (int p = 0; p < npix; ++p) {
      double acc = 0.0;
      for (int c = 0; c < cout; ++c) acc += w[c * cin + k] * gout[c * npix + p];
      gin[k * npix + p] += acc;
    }
  }
}

void conv1x1_backward_weights(const double* gout, const double* in, double* gw,
                              int cin, int cout, int npix) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < cout; ++c) {
    for (int k = 0; k < cin; ++k) {
      double acc = 0.0;
      for (int p = 0; p < npix; ++p) acc += gout[c * npix + p] * in[k * npix + p];
      gw[c * cin + k] += acc;
    }
  }
}

void conv1x1_backward_bias(const double* gout, double* gb, int cout, int npix) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < cout; ++c) {
    double acc = 0.0;
    for (int p = 0; p < npix; ++p) acc += gout[c * npix + p];
    gb[c] += acc;
  }
}

void xcorr_forward(const double* tmpl, const double* search, double* out,
                   int channels, int th, int tw, int sh, int sw,
                   int pad_top, int pad_left, int oh, int ow) {
  const std::int64_t tplane = static_cast<std::int64_t>(th) * tw;
  const std::int64_t splane = static_cast<std::int64_t>(sh) * sw;
  const std::int64_t oplane = static_cast<std::int64_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < channels; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      const double* t = tmpl + c * tplane;
      const double* s = search + c * splane;
      double* o = out + c * oplane + static_cast<std::int64_t>(oy) * ow;
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int dy = 0; dy < th; ++dy) {
          const int sy = oy + dy - pad_top;
          if (sy < 0 || sy >= sh) continue;
          for (int dx = 0; dx < tw; ++dx) {
            const int sx = ox + dx - pad_left;
            if (sx < 0 || sx >= sw) continue;
            acc += t[dy * tw + dx] * s[sy * sw + sx];
          }
        }
        o[ox] = acc;
      }
    }
  }
}

void xcorr_backward_template(const double* gout, const double* search, double* gtmpl,
                             int channels, int th, int tw, int sh, int sw,
                             int pad_top, int pad_left, int oh, int ow) {
  const std::int64_t tplane = static_cast<std::int64_t>(th) * tw;
  const std::int64_t splane = static_cast<std::int64_t>(sh) * sw;
  const std::int64_t oplane = static_cast<std::int64_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < channels; ++c) {
    for (int dy = 0; dy < th; ++dy) {
      const double* g = gout + c * oplane;
      const double* s = search + c * splane;
      for (int dx = 0; dx < tw; ++dx) {
        double acc = 0.0;
        for (int oy = 0; oy < oh; ++oy) {
          const int sy = oy + dy - pad_top;
          if (sy < 0 || sy >= sh) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int sx = ox + dx - pad_left;
            if (sx < 0 || sx >= sw) continue;
            acc += g[oy * ow + ox] * s[sy * sw + sx];
          }
        }
        gtmpl[c * tplane + dy * tw + dx] += acc;
      }
    }
  }
}

void xcorr_backward_search(const double* gout, const double* tmpl, double* gsearch,
                           int channels, int th, int tw, int sh, int sw,
                           int pad_top, int pad_left, int oh, int ow) {
  const std::int64_t tplane = static_cast<std::int64_t>(th) * tw;
  const std::int64_t splane = static_cast<std::int64_t>(sh) * sw;
  const std::int64_t oplane = static_cast<std::int64_t>(oh) * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int c = 0; c < channels; ++c) {
    for (int sy = 0; sy < sh; ++sy) {
      const double* g = gout + c * oplane;
      const double* t = tmpl + c * tplane;
      for (int sx = 0; sx < sw; ++sx) {
        double acc = 0.0;
        for (int dy = 0; dy < th; ++dy) {
          const int oy = sy - dy + pad_top;
          if (oy < 0 || oy >= oh) continue;
          for (int dx = 0; dx < tw; ++dx) {
            const int ox = sx - dx + pad_left;
            if (ox < 0 || ox >= ow) continue;
            acc += t[dy * tw + dx] * g[oy * ow + ox];
          }
        }
        gsearch[c * splane + sy * sw + sx] += acc;
      }
    }
  }
}

void roi_align_forward(const double* feat, double* out, int channels, int h, int w,
                       double box_x, double box_y, double box_w, double box_h,
                       int out_h, int out_w, int samples) {
  const double bin_w = box_w / out_w;
  const double bin_h = box_h / out_h;
  const double inv_count = 1.0 / (samples * samples);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double* plane = feat + static_cast<std::int64_t>(c) * h * w;
    double* oplane = out + static_cast<std::int64_t>(c) * out_h * out_w;
    for (int by = 0; by < out_h; ++by) {
      for (int bx = 0; bx < out_w; ++bx) {
        double acc = 0.0;
        for (int sy = 0; sy < samples; ++sy) {
          const double py = box_y + (by + (sy + 0.5) / samples) * bin_h;
          for (int sx = 0; sx < samples; ++sx) {
            const double px = box_x + (bx + (sx + 0.5) / samples) * bin_w;
            acc += bilinear(plane, h, w, py - 0.5, px - 0.5);
          }
        }
        oplane[by * out_w + bx] = acc * inv_count;
      }
    }
  }
}

void roi_align_backward(const double* gout, double* gfeat, int channels, int h, int w,
                        double box_x, double box_y, double box_w, double box_h,
                        int out_h, int out_w, int samples) {
  const double bin_w = box_w / out_w;
  const double bin_h = box_h / out_h;
  const double inv_count = 1.0 / (samples * samples);
  // Scatter into the four bilinear neighbors; channels are independent.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const double* gplane = gout + static_cast<std::int64_t>(c) * out_h * out_w;
    double* gf = gfeat + static_cast<std::int64_t>(c) * h * w;
    for (int by = 0; by < out_h; ++by) {
      for (int bx = 0; bx < out_w; ++bx) {
        const double g = gplane[by * out_w + bx] * inv_count;
        for (int sy = 0; sy < samples; ++sy) {
          const double py = box_y + (by + (sy + 0.5) / samples) * bin_h - 0.5;
          for (int sx = 0; sx < samples; ++sx) {
            const double px = box_x + (bx + (sx + 0.5) / samples) * bin_w - 0.5;
            const int y0 = static_cast<int>(std::floor(py));
            const int x0 = static_cast<int>(std::floor(px));
            const double fy = py - y0;
            const double fx = px - x0;
            for (int dy = 0; dy <= 1; ++dy) {
              const int y = y0 + dy;
              if (y < 0 || y >= h) continue;
              const double wy = dy ? fy : 1.0 - fy;
              for (int dx = 0; dx <= 1; ++dx) {
                const int x = x0 + dx;
                if (x < 0 || x >= w) continue;
                const double wx = dx ? fx : 1.0 - fx;
                gf[y * w + x] += g * wy * wx;
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace vistrack::kernels
