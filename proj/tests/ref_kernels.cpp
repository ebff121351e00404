#include "ref_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace refk {

void matmul(const double* a, const double* b, double* y, int m, int k, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      y[i * n + j] = acc;
    }
}

Tensor conv1x1(const Tensor& in, const Tensor& w, const Tensor& bias) {
  const int cin = in.extent(0), h = in.extent(1), wd = in.extent(2);
  const int cout = w.extent(0);
  Tensor out({cout, h, wd});
  for (int c = 0; c < cout; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < wd; ++x) {
        double acc = bias.data()[static_cast<std::size_t>(c)];
        for (int k = 0; k < cin; ++k) acc += w.at({c, k}) * in.at({k, y, x});
        out.at({c, y, x}) = acc;
      }
  return out;
}

std::vector<double> softmax_direct(const std::vector<double>& x) {
  double denom = 0.0;
  for (double v : x) denom += std::exp(v);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]) / denom;
  return out;
}

Tensor xcorr(const Tensor& tmpl, const Tensor& search, int pad_top, int pad_left,
             int oh, int ow) {
  const int c = tmpl.extent(0);
  const int th = tmpl.extent(1), tw = tmpl.extent(2);
  const int sh = search.extent(1), sw = search.extent(2);
  Tensor out({c, oh, ow});
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (int dy = 0; dy < th; ++dy)
          for (int dx = 0; dx < tw; ++dx) {
            const int sy = oy + dy - pad_top;
            const int sx = ox + dx - pad_left;
            if (sy < 0 || sy >= sh || sx < 0 || sx >= sw) continue;
            acc += tmpl.at({ci, dy, dx}) * search.at({ci, sy, sx});
          }
        out.at({ci, oy, ox}) = acc;
      }
  return out;
}

namespace {
double bilinear_zero(const Tensor& feat, int c, double py, double px) {
  const int h = feat.extent(1), w = feat.extent(2);
  const int y0 = static_cast<int>(std::floor(py));
  const int x0 = static_cast<int>(std::floor(px));
  double v = 0.0;
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const int y = y0 + dy, x = x0 + dx;
      if (y < 0 || y >= h || x < 0 || x >= w) continue;
      const double wy = dy ? py - y0 : 1.0 - (py - y0);
      const double wx = dx ? px - x0 : 1.0 - (px - x0);
      v += wy * wx * feat.at({c, y, x});
    }
  return v;
}
}  // namespace

Tensor roi_align(const Tensor& feat, const Box& box, int out_h, int out_w, int samples) {
  const int c = feat.extent(0);
  Tensor out({c, out_h, out_w});
  for (int ci = 0; ci < c; ++ci)
    for (int by = 0; by < out_h; ++by)
      for (int bx = 0; bx < out_w; ++bx) {
        double acc = 0.0;
        for (int sy = 0; sy < samples; ++sy)
          for (int sx = 0; sx < samples; ++sx) {
            const double py = box.y + (by + (sy + 0.5) / samples) * (box.h / out_h);
            const double px = box.x + (bx + (sx + 0.5) / samples) * (box.w / out_w);
            acc += bilinear_zero(feat, ci, py - 0.5, px - 0.5);
          }
        out.at({ci, by, bx}) = acc / (samples * samples);
      }
  return out;
}

namespace {
// relu(W x + b) applied per pixel of [C,H,W].
Tensor project_relu(const Tensor& in, const Tensor& w, const Tensor& b) {
  Tensor out = conv1x1(in, w, b);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}
}  // namespace

Tensor temporal_attention_loops(const Tensor& current,
                                const std::vector<Tensor>& supports,
                                const Tensor& key_cur_w, const Tensor& key_cur_b,
                                const Tensor& key_sup_w, const Tensor& key_sup_b,
                                const Tensor& val_sup_w, const Tensor& val_sup_b,
                                const Tensor& out_w, const Tensor& out_b) {
  const int channels = current.extent(0);
  const int qh = current.extent(1), qw = current.extent(2);
  const int key_ch = key_cur_w.extent(0);
  const int t = static_cast<int>(supports.size());
  const int sh = supports[0].extent(1), sw = supports[0].extent(2);
  const int np = t * sh * sw;

  Tensor cur_key = project_relu(current, key_cur_w, key_cur_b);
  std::vector<Tensor> sup_keys, sup_vals;
  for (const Tensor& s : supports) {
    sup_keys.push_back(project_relu(s, key_sup_w, key_sup_b));
    sup_vals.push_back(project_relu(s, val_sup_w, val_sup_b));
  }

  Tensor out({channels, qh, qw});
  for (int y = 0; y < qh; ++y)
    for (int x = 0; x < qw; ++x) {
      // One column of the similarity matrix: every support position vs (y,x).
      std::vector<double> column(static_cast<std::size_t>(np));
      int i = 0;
      for (int ti = 0; ti < t; ++ti)
        for (int sy = 0; sy < sh; ++sy)
          for (int sx = 0; sx < sw; ++sx) {
            double dot = 0.0;
            for (int k = 0; k < key_ch; ++k)
              dot += sup_keys[static_cast<std::size_t>(ti)].at({k, sy, sx}) * cur_key.at({k, y, x});
            column[static_cast<std::size_t>(i++)] = dot;
          }
      std::vector<double> weights = softmax_direct(column);
      std::vector<double> aggregated(static_cast<std::size_t>(key_ch), 0.0);
      i = 0;
      for (int ti = 0; ti < t; ++ti)
        for (int sy = 0; sy < sh; ++sy)
          for (int sx = 0; sx < sw; ++sx) {
            for (int k = 0; k < key_ch; ++k)
              aggregated[static_cast<std::size_t>(k)] +=
                  weights[static_cast<std::size_t>(i)] *
                  sup_vals[static_cast<std::size_t>(ti)].at({k, sy, sx});
            ++i;
          }
      for (int c = 0; c < channels; ++c) {
        double acc = out_b.data()[static_cast<std::size_t>(c)];
        for (int k = 0; k < key_ch; ++k) {
          const double a = aggregated[static_cast<std::size_t>(k)];
          acc += out_w.at({c, k}) * (a > 0.0 ? a : 0.0);
        }
        out.at({c, y, x}) = acc;
      }
    }
  return out;
}

Tensor channel_attention_loops(const Tensor& current, const Tensor& attn_w,
                               const Tensor& attn_b, const Tensor& t1_w, const Tensor& t1_b,
                               const Tensor& t2_w, const Tensor& t2_b) {
  const int channels = current.extent(0);
  const int h = current.extent(1), w = current.extent(2);
  std::vector<double> logits;
  logits.reserve(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = attn_b.data()[0];
      for (int c = 0; c < channels; ++c) acc += attn_w.at({0, c}) * current.at({c, y, x});
      logits.push_back(acc);
    }
  std::vector<double> attn = softmax_direct(logits);

  std::vector<double> context(static_cast<std::size_t>(channels), 0.0);
  for (int c = 0; c < channels; ++c) {
    int j = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        context[static_cast<std::size_t>(c)] +=
            current.at({c, y, x}) * attn[static_cast<std::size_t>(j++)];
  }

  const int mid = t1_w.extent(0);
  std::vector<double> hidden(static_cast<std::size_t>(mid));
  for (int m = 0; m < mid; ++m) {
    double acc = t1_b.data()[static_cast<std::size_t>(m)];
    for (int c = 0; c < channels; ++c) acc += t1_w.at({m, c}) * context[static_cast<std::size_t>(c)];
    hidden[static_cast<std::size_t>(m)] = acc > 0.0 ? acc : 0.0;
  }

  Tensor out({channels, h, w});
  for (int c = 0; c < channels; ++c) {
    double acc = t2_b.data()[static_cast<std::size_t>(c)];
    for (int m = 0; m < mid; ++m) acc += t2_w.at({c, m}) * hidden[static_cast<std::size_t>(m)];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at({c, y, x}) = acc;
  }
  return out;
}

double two_layer_score(const std::vector<double>& a, const std::vector<double>& b,
                       const Tensor& w1, const Tensor& b1, const Tensor& w2,
                       const Tensor& b2) {
  const int n = static_cast<int>(a.size());
  const int mid = w1.extent(0);
  std::vector<double> hidden(static_cast<std::size_t>(mid));
  for (int m = 0; m < mid; ++m) {
    double acc = b1.data()[static_cast<std::size_t>(m)];
    for (int i = 0; i < n; ++i)
      acc += w1.at({m, i}) * (a[static_cast<std::size_t>(i)] + b[static_cast<std::size_t>(i)]);
    hidden[static_cast<std::size_t>(m)] = acc > 0.0 ? acc : 0.0;
  }
  double score = b2.data()[0];
  for (int m = 0; m < mid; ++m) score += w2.at({0, m}) * hidden[static_cast<std::size_t>(m)];
  return score;
}

std::vector<int> best_permutation_assignment(const std::vector<std::vector<double>>& score) {
  const int q = static_cast<int>(score.size());
  if (q == 0) return {};
  const int p = static_cast<int>(score[0].size());
  // Permute over max(q,p) slots; a row mapped to a slot >= p stays unassigned,
  // so every injective partial assignment of size min(q,p) is enumerated.
  const int n = std::max(q, p);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);

  std::vector<int> best(static_cast<std::size_t>(q), -1);
  double best_total = -1e300;
  do {
    double total = 0.0;
    for (int r = 0; r < q; ++r) {
      const int col = perm[static_cast<std::size_t>(r)];
      if (col < p) total += score[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
    }
    if (total > best_total) {
      best_total = total;
      for (int r = 0; r < q; ++r) {
        const int col = perm[static_cast<std::size_t>(r)];
        best[static_cast<std::size_t>(r)] = col < p ? col : -1;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace refk
