/*
 * Copyright 2026 The Damagen Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "damagen/core/errors.hpp"

// Precision-recall evaluation. AUPRC is step-wise average precision with one
// step per distinct score threshold: items tied on score enter together, so
// the value does not depend on their relative order. A constant scorer
// therefore gets exactly the positive prevalence.

namespace damagen::eval {

struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
};

namespace detail {

// Indices sorted by score descending, stable in the original order.
inline std::vector<std::size_t> ranked_indices(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

inline void check_metric_inputs(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  contract_check(!scores.empty(), "metric: empty inputs");
  contract_check(scores.size() == labels.size(), "metric: score/label size mismatch");
  long positives = 0;
  for (int y : labels) {
    contract_check(y == 0 || y == 1, "metric: labels must be 0 or 1");
    positives += y;
  }
  if (positives == 0)
    throw MetricError("AUPRC is undefined without positive labels");
}

}  // namespace detail

// One point per distinct score value, thresholds descending.
inline std::vector<PrPoint> pr_curve(const std::vector<double>& scores,
                                     const std::vector<int>& labels) {
  detail::check_metric_inputs(scores, labels);
  auto idx = detail::ranked_indices(scores);
  long total_pos = 0;
  for (int y : labels) total_pos += y;

  std::vector<PrPoint> points;
  long tp = 0, fp = 0;
  std::size_t at = 0;
  while (at < idx.size()) {
    const double threshold = scores[idx[at]];
    while (at < idx.size() && scores[idx[at]] == threshold) {
      if (labels[idx[at]]) ++tp; else ++fp;
      ++at;
    }
    PrPoint p;
    p.threshold = threshold;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    points.push_back(p);
  }
  return points;
}

// Average precision: sum of (R_k - R_{k-1}) * P_k over the PR curve points.
inline double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const auto points = pr_curve(scores, labels);
  double ap = 0.0, prev_recall = 0.0;
  for (const auto& p : points) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

struct EvalReport {
  double auprc_value = 0.0;
  std::vector<PrPoint> pr_points;
  long n_pos = 0;
  long n_neg = 0;
  std::string domain;
  std::string checkpoint_hash;

  nlohmann::json to_json() const {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : pr_points)
      curve.push_back({{"precision", p.precision},
                       {"recall", p.recall},
                       {"threshold", p.threshold}});
    return {{"auprc", auprc_value},
            {"pr_curve", curve},
            {"n_pos", n_pos},
            {"n_neg", n_neg},
            {"domain", domain},
            {"checkpoint_hash", checkpoint_hash},
            {"ap_convention", "stepwise average precision, distinct-score thresholds"}};
  }
};

inline EvalReport make_report(const std::vector<double>& scores,
                              const std::vector<int>& labels, const std::string& domain,
                              const std::string& checkpoint_hash) {
  EvalReport report;
  report.pr_points = pr_curve(scores, labels);
  report.auprc_value = auprc(scores, labels);
  for (int y : labels) (y ? report.n_pos : report.n_neg) += 1;
  report.domain = domain;
  report.checkpoint_hash = checkpoint_hash;
  return report;
}

}  // namespace damagen::eval
