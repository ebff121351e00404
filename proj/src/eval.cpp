#include "vistrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace vistrack {

EvalConfig EvalConfig::defaults() {
  EvalConfig cfg;
  for (int i = 0; i < 10; ++i) cfg.iou_thresholds.push_back(0.50 + 0.05 * i);
  return cfg;
}

double st_iou(const Instance& a, const Instance& b) {
  VT_CHECK(a.video == b.video, "st_iou: tracks from different videos (" +
                                   std::to_string(a.video) + " vs " + std::to_string(b.video) + ")");
  std::map<int, const Mask*> masks_a, masks_b;
  for (const InstanceEntry& e : a.entries) masks_a[e.frame] = &e.mask;
  for (const InstanceEntry& e : b.entries) masks_b[e.frame] = &e.mask;
  std::set<int> frames;
  for (const auto& [f, m] : masks_a) frames.insert(f);
  for (const auto& [f, m] : masks_b) frames.insert(f);

  long long inter = 0, uni = 0;
  for (int f : frames) {
    const Mask* ma = masks_a.count(f) ? masks_a[f] : nullptr;
    const Mask* mb = masks_b.count(f) ? masks_b[f] : nullptr;
    if (ma && mb) {
      VT_CHECK(ma->h == mb->h && ma->w == mb->w,
               "st_iou: mask grids disagree on frame " + std::to_string(f));
      for (std::size_t i = 0; i < ma->data.size(); ++i) {
        const bool va = ma->data[i] != 0, vb = mb->data[i] != 0;
        inter += va && vb;
        uni += va || vb;
      }
    } else if (ma) {
      uni += ma->area();
    } else if (mb) {
      uni += mb->area();
    }
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<int> match_tracks(const std::vector<const Instance*>& preds,
                              const std::vector<const Instance*>& gts, double threshold,
                              const std::string& category) {
  std::vector<int> match(preds.size(), -1);
  std::vector<char> gt_used(gts.size(), false);
  for (std::size_t p = 0; p < preds.size(); ++p) {
    if (preds[p]->category != category) continue;
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g]->category != category) continue;
      if (gts[g]->video != preds[p]->video) continue;
      const double iou = st_iou(*preds[p], *gts[g]);
      if (iou >= threshold && iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      match[p] = best;
      gt_used[static_cast<std::size_t>(best)] = true;
    }
  }
  return match;
}

namespace {

std::vector<std::string> gt_categories(const std::vector<Instance>& gts,
                                       const EvalConfig& config) {
  std::vector<std::string> cats;
  if (!config.categories.empty()) {
    for (const std::string& c : config.categories) {
      bool any = false;
      for (const Instance& g : gts) any = any || g.category == c;
      if (any) cats.push_back(c);
    }
  } else {
    std::set<std::string> seen;
    for (const Instance& g : gts) seen.insert(g.category);
    cats.assign(seen.begin(), seen.end());
  }
  return cats;
}

// Predictions of one category ordered by descending score (stable).
std::vector<const Instance*> ranked_preds(const std::vector<Instance>& preds,
                                          const std::string& category) {
  std::vector<const Instance*> out;
  for (const Instance& p : preds)
    if (p.category == category) out.push_back(&p);
  std::stable_sort(out.begin(), out.end(),
                   [](const Instance* a, const Instance* b) { return a->score > b->score; });
  return out;
}

std::vector<const Instance*> category_gts(const std::vector<Instance>& gts,
                                          const std::string& category) {
  std::vector<const Instance*> out;
  for (const Instance& g : gts)
    if (g.category == category) out.push_back(&g);
  return out;
}

// 101-point interpolated AP from score-ranked TP flags.
double ap_101(const std::vector<char>& tp, std::size_t n_gt) {
  std::vector<double> precision, recall;
  std::size_t tp_count = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    tp_count += tp[i] ? 1 : 0;
    precision.push_back(static_cast<double>(tp_count) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp_count) / static_cast<double>(n_gt));
  }
  // Precision envelope from the right.
  for (std::size_t i = precision.size(); i-- > 1;)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double total = 0.0;
  std::size_t k = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    while (k < recall.size() && recall[k] < level - 1e-12) ++k;
    total += k < recall.size() ? precision[k] : 0.0;
  }
  return total / 101.0;
}

}  // namespace

EvalResult average_precision(const std::vector<Instance>& preds,
                             const std::vector<Instance>& gts, const EvalConfig& config) {
  VT_CHECK(!config.iou_thresholds.empty(), "eval: empty threshold list");
  for (std::size_t i = 0; i + 1 < config.iou_thresholds.size(); ++i)
    VT_CHECK(config.iou_thresholds[i] < config.iou_thresholds[i + 1],
             "eval: thresholds must be strictly increasing");
  for (double t : config.iou_thresholds)
    VT_CHECK(t > 0.0 && t <= 1.0, "eval: threshold " + std::to_string(t) + " outside (0,1]");
  if (gts.empty()) throw DataError("empty benchmark: no ground-truth instances");

  EvalResult result;
  result.categories = gt_categories(gts, config);
  if (result.categories.empty()) throw DataError("empty benchmark: no ground-truth instances");

  double mean_ap = 0.0, ap50 = 0.0, ap75 = 0.0;
  int idx50 = -1, idx75 = -1;
  for (std::size_t t = 0; t < config.iou_thresholds.size(); ++t) {
    if (std::abs(config.iou_thresholds[t] - 0.50) < 1e-9) idx50 = static_cast<int>(t);
    if (std::abs(config.iou_thresholds[t] - 0.75) < 1e-9) idx75 = static_cast<int>(t);
  }

  for (const std::string& category : result.categories) {
    std::vector<const Instance*> ranked = ranked_preds(preds, category);
    std::vector<const Instance*> cat_gts = category_gts(gts, category);
    std::vector<double> per_threshold;
    for (double threshold : config.iou_thresholds) {
      std::vector<int> match = match_tracks(ranked, cat_gts, threshold, category);
      std::vector<char> tp;
      tp.reserve(match.size());
      for (int m : match) tp.push_back(m >= 0);
      per_threshold.push_back(tp.empty() ? 0.0 : ap_101(tp, cat_gts.size()));
    }
    double category_ap = 0.0;
    for (double v : per_threshold) category_ap += v;
    category_ap /= static_cast<double>(per_threshold.size());
    mean_ap += category_ap;
    if (idx50 >= 0) ap50 += per_threshold[static_cast<std::size_t>(idx50)];
    if (idx75 >= 0) ap75 += per_threshold[static_cast<std::size_t>(idx75)];
    result.ap_per_category_per_threshold[category] = std::move(per_threshold);
  }
  const double n_cat = static_cast<double>(result.categories.size());
  result.mean_ap = mean_ap / n_cat;
  result.ap50 = idx50 >= 0 ? ap50 / n_cat : -1.0;
  result.ap75 = idx75 >= 0 ? ap75 / n_cat : -1.0;
  return result;
}

std::map<int, double> average_recall(const std::vector<Instance>& preds,
                                     const std::vector<Instance>& gts,
                                     const EvalConfig& config) {
  if (gts.empty()) throw DataError("empty benchmark: no ground-truth instances");
  const std::vector<std::string> categories = gt_categories(gts, config);
  std::map<int, double> out;
  for (int budget : config.ar_budgets) {
    VT_CHECK(budget > 0, "eval: recall budget must be positive");
    // Keep the top-K scored predictions per video.
    std::map<int, std::vector<const Instance*>> per_video;
    for (const Instance& p : preds) per_video[p.video].push_back(&p);
    std::vector<Instance> kept;
    for (auto& [video, list] : per_video) {
      std::stable_sort(list.begin(), list.end(),
                       [](const Instance* a, const Instance* b) { return a->score > b->score; });
      for (std::size_t i = 0; i < list.size() && i < static_cast<std::size_t>(budget); ++i)
        kept.push_back(*list[i]);
    }
    double recall_sum = 0.0;
    for (const std::string& category : categories) {
      std::vector<const Instance*> ranked = ranked_preds(kept, category);
      std::vector<const Instance*> cat_gts = category_gts(gts, category);
      double over_thresholds = 0.0;
      for (double threshold : config.iou_thresholds) {
        std::vector<int> match = match_tracks(ranked, cat_gts, threshold, category);
        int matched = 0;
        for (int m : match) matched += m >= 0;
        over_thresholds += static_cast<double>(matched) / static_cast<double>(cat_gts.size());
      }
      recall_sum += over_thresholds / static_cast<double>(config.iou_thresholds.size());
    }
    out[budget] = recall_sum / static_cast<double>(categories.size());
  }
  return out;
}

EvalResult evaluate(const std::vector<Instance>& preds, const std::vector<Instance>& gts,
                    const EvalConfig& config) {
  EvalResult result = average_precision(preds, gts, config);
  result.ar_per_budget = average_recall(preds, gts, config);
  return result;
}

}  // namespace vistrack
