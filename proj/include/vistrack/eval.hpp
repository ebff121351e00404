#pragma once

#include <map>
#include <string>
#include <vector>

#include "vistrack/annotations.hpp"

namespace vistrack {

struct EvalConfig {
  std::vector<double> iou_thresholds;   // strictly increasing in (0,1]
  std::vector<int> ar_budgets = {1, 10};
  std::vector<std::string> categories;  // empty: the categories present in the gt

  static EvalConfig defaults();  // thresholds 0.50..0.95 step 0.05
};

struct EvalResult {
  std::vector<std::string> categories;  // categories with ground truth, eval order
  std::map<std::string, std::vector<double>> ap_per_category_per_threshold;
  double mean_ap = 0.0;
  double ap50 = -1.0;  // -1 when 0.50 / 0.75 are not in the threshold list
  double ap75 = -1.0;
  std::map<int, double> ar_per_budget;
};

// Spatio-temporal IoU: per-frame intersections and unions summed over the
// union of annotated frames before dividing; absent masks count as empty.
// Two entry-less tracks give 0.
double st_iou(const Instance& a, const Instance& b);

// Greedy one-to-one matching for one category at one threshold: preds must
// be ordered by descending score; each takes the unmatched same-video gt
// with the highest st_iou >= threshold. Returns the gt index per pred, -1
// for unmatched.
std::vector<int> match_tracks(const std::vector<const Instance*>& preds,
                              const std::vector<const Instance*>& gts, double threshold,
                              const std::string& category);

// COCO-style 101-point interpolated AP per category and threshold, averaged
// category-first. Categories without ground truth are excluded; an entirely
// empty ground truth is an error.
EvalResult average_precision(const std::vector<Instance>& preds,
                             const std::vector<Instance>& gts, const EvalConfig& config);

// Max recall with the top-K scored predictions kept per video, averaged
// over thresholds and categories.
std::map<int, double> average_recall(const std::vector<Instance>& preds,
                                     const std::vector<Instance>& gts,
                                     const EvalConfig& config);

// average_precision + average_recall in one result.
EvalResult evaluate(const std::vector<Instance>& preds, const std::vector<Instance>& gts,
                    const EvalConfig& config);

}  // namespace vistrack
