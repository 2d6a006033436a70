// Copyright 2026 The Ambient Depth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Metrics and confidence intervals. Pure functions only; the experiment
// drivers that retrain models live in experiments.hpp.

#ifndef AMBIENT_EVAL_HPP_
#define AMBIENT_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ambient/rng.hpp"

namespace ambient::eval {

struct MetricReport {
  std::string name;
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  size_t n = 0;
  uint64_t seed = 0;
};

// Precision averaged at each positive, scores descending, ties broken by
// stable input order.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("average_precision: bad input sizes");
  size_t n_pos = 0;
  for (int l : labels) n_pos += (l != 0);
  if (n_pos == 0) throw std::invalid_argument("average_precision: no positives");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  size_t tp = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 0) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(n_pos);
}

inline double accuracy(const std::vector<double>& scores,
                       const std::vector<int>& labels,
                       double threshold = 0.5) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("accuracy: bad input sizes");
  size_t correct = 0;
  for (size_t i = 0; i < scores.size(); ++i)
    correct += ((scores[i] > threshold) ? 1 : 0) == (labels[i] != 0);
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

struct RegressionMetrics {
  double mae = 0.0;
  double median_ae = 0.0;
  double r2 = 0.0;
  bool r2_defined = true;  // false when targets have zero variance
};

inline RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                            const std::vector<double>& targets) {
  if (preds.size() != targets.size() || preds.size() < 2)
    throw std::invalid_argument("regression_metrics: need >= 2 pairs");
  const size_t n = preds.size();
  std::vector<double> abs_err(n);
  double mae = 0.0, ss_res = 0.0, mean_t = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = preds[i] - targets[i];
    abs_err[i] = std::abs(e);
    mae += abs_err[i];
    ss_res += e * e;
    mean_t += targets[i];
  }
  mae /= static_cast<double>(n);
  mean_t /= static_cast<double>(n);
  double ss_tot = 0.0;
  for (double t : targets) ss_tot += (t - mean_t) * (t - mean_t);

  std::sort(abs_err.begin(), abs_err.end());
  const double med = (n % 2 == 1)
                         ? abs_err[n / 2]
                         : 0.5 * (abs_err[n / 2 - 1] + abs_err[n / 2]);

  RegressionMetrics m;
  m.mae = mae;
  m.median_ae = med;
  if (ss_tot <= 0.0) {
    m.r2 = std::numeric_limits<double>::quiet_NaN();
    m.r2_defined = false;
  } else {
    m.r2 = 1.0 - ss_res / ss_tot;
  }
  return m;
}

struct ClassificationMetrics {
  double top1 = 0.0;
  double top5 = 0.0;
  bool top5_defined = true;  // false when k < 5
  double avg_distance = 0.0;
};

inline int argmax_index(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

namespace detail {

inline bool in_top_k(const std::vector<double>& dist, int label, int k) {
  // rank by probability, ties resolved by lower index first
  const double p = dist[label];
  int better = 0;
  for (int i = 0; i < static_cast<int>(dist.size()); ++i) {
    if (dist[i] > p || (dist[i] == p && i < label)) ++better;
  }
  return better < k;
}

}  // namespace detail

// Distances between predicted and true bins use the 1-D bin centers.
inline ClassificationMetrics classification_metrics(
    const std::vector<std::vector<double>>& pred_dists,
    const std::vector<int>& true_bins, const std::vector<double>& centers) {
  if (pred_dists.size() != true_bins.size() || pred_dists.empty())
    throw std::invalid_argument("classification_metrics: bad input sizes");
  const int k = static_cast<int>(centers.size());
  ClassificationMetrics m;
  m.top5_defined = k >= 5;
  double top1 = 0.0, top5 = 0.0, dist = 0.0;
  for (size_t i = 0; i < pred_dists.size(); ++i) {
    const int pred = argmax_index(pred_dists[i]);
    top1 += pred == true_bins[i];
    if (m.top5_defined) top5 += detail::in_top_k(pred_dists[i], true_bins[i], 5);
    dist += std::abs(centers[pred] - centers[true_bins[i]]);
  }
  const double n = static_cast<double>(pred_dists.size());
  m.top1 = top1 / n;
  m.top5 = m.top5_defined ? top5 / n : 0.0;
  m.avg_distance = dist / n;
  return m;
}

// Grid-localization variant: distance is Euclidean between cell centers in
// cell units.
inline ClassificationMetrics grid_metrics(
    const std::vector<std::vector<double>>& pred_dists,
    const std::vector<int>& true_cells,
    const std::vector<std::pair<double, double>>& cell_coords) {
  if (pred_dists.size() != true_cells.size() || pred_dists.empty())
    throw std::invalid_argument("grid_metrics: bad input sizes");
  const int k = static_cast<int>(cell_coords.size());
  ClassificationMetrics m;
  m.top5_defined = k >= 5;
  double top1 = 0.0, top5 = 0.0, dist = 0.0;
  for (size_t i = 0; i < pred_dists.size(); ++i) {
    const int pred = argmax_index(pred_dists[i]);
    top1 += pred == true_cells[i];
    if (m.top5_defined) top5 += detail::in_top_k(pred_dists[i], true_cells[i], 5);
    const auto& a = cell_coords[pred];
    const auto& b = cell_coords[true_cells[i]];
    dist += std::hypot(a.first - b.first, a.second - b.second);
  }
  const double n = static_cast<double>(pred_dists.size());
  m.top1 = top1 / n;
  m.top5 = m.top5_defined ? top5 / n : 0.0;
  m.avg_distance = dist / n;
  return m;
}

// Percentile bootstrap, 1000 resamples by default. The statistic receives
// resampled item indices. Resamples where the statistic is NaN (e.g. AP
// with no positives drawn) are skipped.
inline std::pair<double, double> bootstrap_ci(
    size_t n_items, const std::function<double(const std::vector<size_t>&)>& stat,
    int n_resamples, uint64_t seed) {
  if (n_items < 2) throw std::invalid_argument("bootstrap_ci: need n >= 2");
  if (n_resamples < 2) throw std::invalid_argument("bootstrap_ci: resamples");
  Rng rng(seed);
  std::vector<double> stats;
  stats.reserve(n_resamples);
  std::vector<size_t> idx(n_items);
  for (int r = 0; r < n_resamples; ++r) {
    for (size_t i = 0; i < n_items; ++i) idx[i] = rng.bounded(n_items);
    const double s = stat(idx);
    if (!std::isnan(s)) stats.push_back(s);
  }
  if (stats.empty()) throw std::runtime_error("bootstrap_ci: all resamples NaN");
  std::sort(stats.begin(), stats.end());
  auto pct = [&](double p) {
    const double pos = p * static_cast<double>(stats.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, stats.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return stats[lo] * (1.0 - frac) + stats[hi] * frac;
  };
  return {pct(0.025), pct(0.975)};
}

// Mean statistic convenience wrapper; clamps so the interval always
// contains the point estimate.
inline MetricReport report_with_ci(const std::string& name,
                                   const std::vector<double>& values,
                                   uint64_t seed, int n_resamples = 1000) {
  if (values.empty()) throw std::invalid_argument("report_with_ci: empty");
  MetricReport r;
  r.name = name;
  r.n = values.size();
  r.seed = seed;
  r.value = std::accumulate(values.begin(), values.end(), 0.0) /
            static_cast<double>(values.size());
  if (values.size() >= 2) {
    auto stat = [&](const std::vector<size_t>& idx) {
      double s = 0.0;
      for (size_t i : idx) s += values[i];
      return s / static_cast<double>(idx.size());
    };
    auto [lo, hi] = bootstrap_ci(values.size(), stat, n_resamples, seed);
    r.ci_low = std::min(lo, r.value);
    r.ci_high = std::max(hi, r.value);
  } else {
    r.ci_low = r.ci_high = r.value;
  }
  return r;
}

}  // namespace ambient::eval

#endif  // AMBIENT_EVAL_HPP_
