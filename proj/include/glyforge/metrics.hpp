// Copyright 2026 The Glyforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Evaluation metrics: macro-averaged F1 for multi-class labels, area under
// the precision-recall curve for binary scores, and Spearman's rank
// correlation for regression outputs. All three are plain functions over
// double vectors so they can be checked against naive reimplementations.

#ifndef GLYFORGE_METRICS_HPP_
#define GLYFORGE_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "glyforge/error.hpp"

namespace glyforge {

// A metric was asked to score an empty prediction set.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Binary labels lack a positive or a negative example, so the
// precision-recall curve is undefined.
class DegenerateLabelsError : public Error {
 public:
  using Error::Error;
};

// A correlation input is constant, so its rank variance is zero.
class ConstantInputError : public Error {
 public:
  using Error::Error;
};

// Unweighted mean of per-class F1 over all `num_classes` classes. A class
// that never appears in either vector contributes zero to the mean.
inline double macro_f1(std::span<const std::int32_t> pred_ids,
                       std::span<const std::int32_t> true_ids, std::size_t num_classes) {
  if (pred_ids.empty()) throw EmptyInputError("macro_f1 needs at least one prediction");
  if (pred_ids.size() != true_ids.size()) {
    throw ShapeError("macro_f1 got " + std::to_string(pred_ids.size()) + " predictions for " +
                     std::to_string(true_ids.size()) + " labels");
  }
  if (num_classes == 0) throw ConfigError("macro_f1 needs a positive class count");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < pred_ids.size(); ++i) {
    const auto p = pred_ids[i];
    const auto t = true_ids[i];
    if (p < 0 || static_cast<std::size_t>(p) >= num_classes || t < 0 ||
        static_cast<std::size_t>(t) >= num_classes) {
      throw IndexError("macro_f1 saw class id outside [0, " + std::to_string(num_classes) + ")");
    }
    if (p == t) {
      ++tp[static_cast<std::size_t>(p)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(t)];
    }
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    if (denom > 0.0) sum += 2.0 * static_cast<double>(tp[c]) / denom;
  }
  return sum / static_cast<double>(num_classes);
}

// Area under the precision-recall step curve. Scores are swept in descending
// order, tied scores enter as one group, and each recall increment is paid at
// the precision reached after the group (step, not trapezoidal,
// interpolation).
inline double auprc(std::span<const double> scores, std::span<const std::int32_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("auprc got " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(labels.size()) + " labels");
  }
  std::size_t positives = 0;
  for (const auto label : labels) {
    if (label != 0 && label != 1) {
      throw DataError("auprc labels must be 0 or 1, saw " + std::to_string(label));
    }
    positives += static_cast<std::size_t>(label);
  }
  if (positives == 0 || positives == labels.size()) {
    throw DegenerateLabelsError("auprc needs at least one positive and one negative label");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += static_cast<std::size_t>(labels[order[j]]);
      fp += static_cast<std::size_t>(1 - labels[order[j]]);
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

// Ranks 1..n with tied values sharing the mean of the positions they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

// Spearman's rank correlation: Pearson correlation of average-ranked values.
inline double spearman_rho(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw ShapeError("spearman_rho got " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(target.size()) + " targets");
  }
  if (pred.empty()) throw EmptyInputError("spearman_rho needs at least two values");
  if (pred.size() < 2) {
    throw ConstantInputError("spearman_rho needs at least two values to rank");
  }
  const auto rp = average_ranks(pred);
  const auto rt = average_ranks(target);
  const double n = static_cast<double>(pred.size());
  const double mean = 0.5 * (n + 1.0);  // ranks always average to (n+1)/2
  double cov = 0.0;
  double var_p = 0.0;
  double var_t = 0.0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const double dp = rp[i] - mean;
    const double dt = rt[i] - mean;
    cov += dp * dt;
    var_p += dp * dp;
    var_t += dt * dt;
  }
  if (var_p == 0.0) throw ConstantInputError("spearman_rho predictions are constant");
  if (var_t == 0.0) throw ConstantInputError("spearman_rho targets are constant");
  return cov / std::sqrt(var_p * var_t);
}

}  // namespace glyforge

#endif  // GLYFORGE_METRICS_HPP_
