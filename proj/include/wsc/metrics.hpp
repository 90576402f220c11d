#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "wsc/error.hpp"

namespace wsc {

struct MetricsReport {
  double balanced_accuracy = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double threshold = 0.5;
};

/// Accuracy and balanced accuracy at a decision threshold. Scores equal to
/// the threshold predict positive. Errors if either class is absent.
inline MetricsReport accuracy_metrics(const std::vector<double>& scores,
                                      const std::vector<int>& labels, double threshold = 0.5) {
  if (scores.empty() || scores.size() != labels.size())
    fail(errc::invalid_argument, "accuracy_metrics: empty or mismatched inputs");
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1)
      pred ? ++tp : ++fn;
    else
      pred ? ++fp : ++tn;
  }
  const std::size_t n_pos = tp + fn, n_neg = tn + fp;
  if (n_pos == 0 || n_neg == 0)
    fail(errc::invalid_argument, "accuracy_metrics: only one class present");
  MetricsReport r;
  r.threshold = threshold;
  r.n_pos = n_pos;
  r.n_neg = n_neg;
  r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  const double recall_pos = static_cast<double>(tp) / static_cast<double>(n_pos);
  const double recall_neg = static_cast<double>(tn) / static_cast<double>(n_neg);
  r.balanced_accuracy = 0.5 * (recall_pos + recall_neg);
  return r;
}

/// Mann-Whitney AUC: probability a random positive outranks a random negative,
/// ties counted 1/2. Sort-based with average ranks over tie groups; the
/// numerator is an exact sum of halves, so it matches pairwise counting bit
/// for bit.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.empty() || scores.size() != labels.size())
    fail(errc::invalid_argument, "roc_auc: empty or mismatched inputs");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    fail(errc::invalid_argument, "roc_auc: only one class present, AUC undefined");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j averaged over the tie group
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

inline MetricsReport evaluate_scores(const std::vector<double>& scores,
                                     const std::vector<int>& labels, double threshold = 0.5) {
  MetricsReport r = accuracy_metrics(scores, labels, threshold);
  r.auc = roc_auc(scores, labels);
  return r;
}

}  // namespace wsc
