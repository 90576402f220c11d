#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/rng.hpp"
#include "wsc/tensor.hpp"

namespace wsc {

/// A labeled collection of instance feature vectors. witness_mask carries the
/// generator's ground truth for positive instances; it is stored for
/// diagnostics and tests only -- no training path reads it.
struct Bag {
  std::uint32_t id = 0;
  int label = 0;  // 0 = negative, 1 = positive
  Tensor instances;  // n_i x d
  std::vector<std::uint8_t> witness_mask;  // empty, or n_i entries of {0,1}

  std::size_t size() const { return instances.rows(); }

  void check_mil_assumption() const {
    if (witness_mask.empty()) return;
    if (witness_mask.size() != size())
      fail(errc::invalid_argument, "Bag: witness_mask length mismatch");
    bool any = false;
    for (std::uint8_t w : witness_mask) any = any || (w != 0);
    if ((label == 1) != any)
      fail(errc::invalid_argument,
           "Bag " + std::to_string(id) + ": label contradicts witness mask");
  }
};

/// Gaussian-mixture bag generator. Negative bags draw every instance from
/// negative components; positive bags contain ceil(witness_rate * n) witness
/// instances from positive components at shuffled positions, the rest from
/// negative components.
struct SyntheticSpec {
  std::size_t d = 32;
  std::size_t neg_clusters = 3;
  std::size_t pos_clusters = 2;
  double cluster_sigma = 0.5;
  double cluster_separation = 3.0;  // min distance between any pos and neg mean
  double witness_rate = 0.1;
  std::size_t bag_size_min = 40;
  std::size_t bag_size_max = 60;
  // train_neg, train_pos, val_neg, val_pos, test_neg, test_pos
  std::array<std::size_t, 6> counts{30, 30, 10, 10, 15, 15};
  std::uint64_t seed = 7;

  void validate() const {
    if (d < 1) fail(errc::config, "SyntheticSpec: d must be >= 1");
    if (neg_clusters < 1 || pos_clusters < 1)
      fail(errc::config, "SyntheticSpec: need at least one cluster per class");
    if (!(witness_rate > 0.0 && witness_rate <= 1.0))
      fail(errc::config, "SyntheticSpec: witness_rate must be in (0, 1]");
    if (bag_size_min < 2) fail(errc::config, "SyntheticSpec: bag_size_min must be >= 2");
    if (bag_size_max < bag_size_min)
      fail(errc::config, "SyntheticSpec: bag_size_max < bag_size_min");
    if (!(cluster_separation > 0.0))
      fail(errc::config, "SyntheticSpec: cluster_separation must be > 0");
    if (!(cluster_sigma >= 0.0)) fail(errc::config, "SyntheticSpec: cluster_sigma must be >= 0");
  }
};

struct DatasetSplit {
  std::vector<Bag> train, val, test;
};

/// The frozen desk-scale benchmark fixture.
inline SyntheticSpec standard_benchmark() { return SyntheticSpec{}; }

namespace detail {

/// Negative component means spread over a wide box; each positive component
/// mean is planted near one negative component at a distance that makes
/// cluster_separation binding (between 1.0x and 1.25x the minimum), then
/// rejected unless it clears every negative mean. The separation knob is what
/// sets task difficulty: small values put witnesses close to negative tissue,
/// large values make bags trivially separable.
inline std::vector<Tensor> draw_separated_means(const SyntheticSpec& spec, Rng& rng) {
  for (int round = 0; round < 1000; ++round) {
    std::vector<Tensor> means;
    for (std::size_t c = 0; c < spec.neg_clusters; ++c) {
      Tensor m = Tensor::zeros(1, spec.d);
      for (double& x : m.v) x = rng.next_double() * 10.0 - 5.0;  // U(-5, 5) per coordinate
      means.push_back(std::move(m));
    }
    bool ok = true;
    for (std::size_t pi = 0; pi < spec.pos_clusters && ok; ++pi) {
      const std::size_t anchor = rng.index(spec.neg_clusters);
      Tensor dir = Tensor::zeros(1, spec.d);
      double norm2 = 0.0;
      for (double& x : dir.v) {
        x = rng.gaussian();
        norm2 += x * x;
      }
      const double radius = spec.cluster_separation * (1.0 + 0.25 * rng.next_double());
      Tensor m = Tensor::zeros(1, spec.d);
      for (std::size_t j = 0; j < spec.d; ++j) {
        m.v[j] = means[anchor].v[j] + radius * dir.v[j] / std::sqrt(norm2);
        if (std::fabs(m.v[j]) > 10.0) ok = false;  // means stay in a bounded domain
      }
      for (std::size_t ni = 0; ni < spec.neg_clusters; ++ni) {
        double s = 0.0;
        for (std::size_t j = 0; j < spec.d; ++j) {
          const double diff = means[ni].v[j] - m.v[j];
          s += diff * diff;
        }
        if (std::sqrt(s) < spec.cluster_separation) ok = false;
      }
      means.push_back(std::move(m));
    }
    if (ok) return means;
  }
  fail(errc::invalid_argument,
       "generate_synthetic: cluster separation " + std::to_string(spec.cluster_separation) +
           " unattainable after 1000 rejection rounds; reduce cluster_separation");
}

inline Bag make_bag(const SyntheticSpec& spec, const std::vector<Tensor>& means,
                    std::uint32_t id, int label, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(
      rng.uniform_int(static_cast<long>(spec.bag_size_min), static_cast<long>(spec.bag_size_max)));
  Bag bag;
  bag.id = id;
  bag.label = label;
  bag.instances = Tensor::zeros(n, spec.d);
  bag.witness_mask.assign(n, 0);

  if (label == 1) {
    const std::size_t n_w =
        static_cast<std::size_t>(std::ceil(spec.witness_rate * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t k = 0; k < n_w; ++k) bag.witness_mask[order[k]] = 1;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const bool witness = bag.witness_mask[i] != 0;
    const std::size_t comp = witness ? spec.neg_clusters + rng.index(spec.pos_clusters)
                                     : rng.index(spec.neg_clusters);
    for (std::size_t j = 0; j < spec.d; ++j)
      bag.instances.at(i, j) = means[comp].v[j] + spec.cluster_sigma * rng.gaussian();
  }
  return bag;
}

}  // namespace detail

inline DatasetSplit generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng = rng_stream(spec.seed, "data");
  const std::vector<Tensor> means = detail::draw_separated_means(spec, rng);

  DatasetSplit split;
  std::uint32_t next_id = 0;
  auto emit = [&](std::vector<Bag>& dst, std::size_t count, int label) {
    for (std::size_t k = 0; k < count; ++k)
      dst.push_back(detail::make_bag(spec, means, next_id++, label, rng));
  };
  emit(split.train, spec.counts[0], 0);
  emit(split.train, spec.counts[1], 1);
  emit(split.val, spec.counts[2], 0);
  emit(split.val, spec.counts[3], 1);
  emit(split.test, spec.counts[4], 0);
  emit(split.test, spec.counts[5], 1);
  return split;
}

/// Every instance inherits its bag label, concatenated over bags in order.
inline std::vector<int> assign_pseudo_labels(const std::vector<Bag>& bags) {
  std::vector<int> out;
  for (const Bag& b : bags)
    for (std::size_t i = 0; i < b.size(); ++i) out.push_back(b.label);
  return out;
}

}  // namespace wsc
