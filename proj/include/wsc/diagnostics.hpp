#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/pca.hpp"
#include "wsc/tensor.hpp"

namespace wsc {

constexpr std::size_t kCosineHistogramBins = 80;

/// Fixed binning over [-1, 1]: left-closed right-open, final bin closed.
inline std::vector<std::size_t> cosine_histogram(const std::vector<double>& cosines,
                                                 std::size_t bins = kCosineHistogramBins) {
  if (bins == 0) fail(errc::invalid_argument, "cosine_histogram: zero bins");
  std::vector<std::size_t> counts(bins, 0);
  const double width = 2.0 / static_cast<double>(bins);
  for (std::size_t i = 0; i < cosines.size(); ++i) {
    const double x = cosines[i];
    if (!(x >= -1.0 && x <= 1.0))
      fail(errc::domain, "cosine_histogram: value " + std::to_string(x) +
                             " outside [-1, 1] at index " + std::to_string(i));
    auto bin = static_cast<std::size_t>((x + 1.0) / width);
    if (bin >= bins) bin = bins - 1;  // x == 1.0 lands in the closed last bin
    ++counts[bin];
  }
  return counts;
}

struct AnchorReport {
  std::size_t anchor_index = 0;
  std::size_t neighbor_count = 0;  // neighbors strictly above threshold, self excluded
  double threshold = 0.999;
  std::vector<double> cosines;            // anchor to every row, self included
  std::vector<std::size_t> histogram;     // kCosineHistogramBins bins over [-1, 1]
  std::map<double, double> fraction_above;  // threshold -> fraction of all rows
};

/// Densest-cluster anchor: the row with the most neighbors at cosine strictly
/// above `threshold`; ties go to the lowest index. Rows must be unit-norm.
inline AnchorReport densest_anchor(const Tensor& features, double threshold = 0.999) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n < 2) fail(errc::invalid_argument, "densest_anchor: need at least 2 rows");
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += features.at(i, j) * features.at(i, j);
    if (std::fabs(std::sqrt(s) - 1.0) > 1e-6)
      fail(errc::invalid_argument, "densest_anchor: row " + std::to_string(i) + " is not unit-norm");
  }

  auto cos_ij = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += features.at(a, j) * features.at(b, j);
    return std::clamp(s, -1.0, 1.0);
  };

  auto neighbor_count_of = [&](std::size_t i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && cos_ij(i, j) > threshold) ++count;
    return count;
  };
  std::size_t best = 0, best_count = neighbor_count_of(0);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t count = neighbor_count_of(i);
    if (count > best_count) {  // strict: ties keep the lowest index
      best = i;
      best_count = count;
    }
  }

  AnchorReport r;
  r.anchor_index = best;
  r.neighbor_count = best_count;
  r.threshold = threshold;
  r.cosines.resize(n);
  for (std::size_t j = 0; j < n; ++j) r.cosines[j] = cos_ij(best, j);
  r.histogram = cosine_histogram(r.cosines);
  for (double t : {0.9, 0.999}) {
    std::size_t c = 0;
    for (double x : r.cosines)
      if (x > t) ++c;
    r.fraction_above[t] = static_cast<double>(c) / static_cast<double>(n);
  }
  return r;
}

/// Fraction of rows with cosine to `anchor_row` strictly above `threshold`.
inline double fraction_above_anchor(const Tensor& features, const Tensor& anchor_row,
                                    double threshold) {
  const std::size_t n = features.rows(), d = features.cols();
  if (anchor_row.numel() != d)
    fail(errc::shape_mismatch, "fraction_above_anchor: width mismatch");
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += features.at(i, j) * anchor_row.v[j];
    if (std::clamp(s, -1.0, 1.0) > threshold) ++c;
  }
  return static_cast<double>(c) / static_cast<double>(n);
}

struct PcaSpreadResult {
  PcaResult pca;                      // computed on the pooled feature set
  std::vector<int> group;             // group label per projected row
  std::map<int, double> pc1_range;    // per-group max - min along PC1
  double pc1_range_all = 0.0;
};

/// PCA over the pooled set, then per-group spread along the first component.
inline PcaSpreadResult pca_spread(const Tensor& features, const std::vector<int>& group) {
  if (group.size() != features.rows())
    fail(errc::invalid_argument, "pca_spread: group array length mismatch");
  PcaSpreadResult r;
  r.pca = pca_top2(features);
  r.group = group;
  std::map<int, std::pair<double, double>> ranges;  // group -> (min, max)
  double lo_all = 0.0, hi_all = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const double x = r.pca.projected.at(i, 0);
    auto [it, fresh] = ranges.try_emplace(group[i], std::make_pair(x, x));
    if (!fresh) {
      it->second.first = std::min(it->second.first, x);
      it->second.second = std::max(it->second.second, x);
    }
    if (i == 0) {
      lo_all = hi_all = x;
    } else {
      lo_all = std::min(lo_all, x);
      hi_all = std::max(hi_all, x);
    }
  }
  for (const auto& [gid, mm] : ranges) r.pc1_range[gid] = mm.second - mm.first;
  r.pc1_range_all = hi_all - lo_all;
  return r;
}

}  // namespace wsc
