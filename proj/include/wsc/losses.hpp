#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/tensor.hpp"

namespace wsc {

constexpr int kNegativeBag = 0;
constexpr int kPositiveBag = 1;

struct LossConfig {
  double tau = 0.5;              // softmax temperature
  double alpha = 1.0;            // weight on the similarity term in the total loss
  bool normalize_inputs = true;  // L2-normalize feature rows before any dot product

  void validate() const {
    if (!(tau > 0.0)) fail(errc::invalid_argument, "LossConfig: tau must be > 0");
    if (!(alpha >= 0.0)) fail(errc::invalid_argument, "LossConfig: alpha must be >= 0");
  }
};

/// A two-view contrastive batch: 2N projected feature rows. origin[i] names
/// the source sample (each id appears exactly twice), bag_label partitions
/// views into negative-bag and positive-bag subsets, pseudo_label (optional)
/// carries per-view class ids for the supervised loss.
struct ContrastiveBatch {
  Tensor z;                       // 2N x D
  std::vector<int> origin;        // 2N
  std::vector<int> bag_label;     // 2N, values in {0, 1}
  std::vector<int> pseudo_label;  // empty, or 2N

  std::size_t views() const { return origin.size(); }

  void validate() const {
    const std::size_t m = views();
    if (z.rows() != m || bag_label.size() != m)
      fail(errc::invalid_argument, "ContrastiveBatch: array length mismatch");
    if (!pseudo_label.empty() && pseudo_label.size() != m)
      fail(errc::invalid_argument, "ContrastiveBatch: pseudo_label length mismatch");
    std::map<int, std::vector<std::size_t>> by_origin;
    for (std::size_t i = 0; i < m; ++i) by_origin[origin[i]].push_back(i);
    for (const auto& [id, idxs] : by_origin) {
      if (idxs.size() != 2)
        fail(errc::invalid_argument,
             "ContrastiveBatch: origin " + std::to_string(id) + " has " +
                 std::to_string(idxs.size()) + " views, expected 2");
      if (bag_label[idxs[0]] != bag_label[idxs[1]])
        fail(errc::invalid_argument,
             "ContrastiveBatch: views of origin " + std::to_string(id) + " disagree on bag_label");
      if (!pseudo_label.empty() && pseudo_label[idxs[0]] != pseudo_label[idxs[1]])
        fail(errc::invalid_argument,
             "ContrastiveBatch: views of origin " + std::to_string(id) + " disagree on pseudo_label");
    }
  }

  /// Index of the other view sharing origin[i].
  std::size_t partner(std::size_t i) const {
    for (std::size_t j = 0; j < views(); ++j)
      if (j != i && origin[j] == origin[i]) return j;
    fail(errc::invalid_argument, "ContrastiveBatch: no partner view for index " + std::to_string(i));
  }

  std::vector<std::size_t> views_with_label(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < views(); ++i)
      if (bag_label[i] == label) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> all_views() const {
    std::vector<std::size_t> out(views());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
};

inline double cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.numel() != v.numel())
    fail(errc::shape_mismatch, "cosine_similarity: " + u.shape_str() + " vs " + v.shape_str());
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.numel(); ++i) {
    uu += u.v[i] * u.v[i];
    vv += v.v[i] * v.v[i];
    uv += u.v[i] * v.v[i];
  }
  if (std::sqrt(uu) <= 1e-12 || std::sqrt(vv) <= 1e-12)
    fail(errc::zero_norm, "cosine_similarity: zero vector");
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

namespace detail {

constexpr double kMaskNegInf = -1e9;  // underflows to exactly 0 after exp in the lse

inline Value normalized_rows(Graph& g, Value z, const LossConfig& cfg) {
  return cfg.normalize_inputs ? g.l2norm_rows(z) : z;
}

/// sum_i sum_j W[i,j] * (lse_{k != i}(S[i,k]) - S[i,j]) for a temperature-scaled
/// similarity matrix S over the given subset rows. Shared by the SimCLR and
/// SupCon losses so that SupCon with unique labels reproduces SimCLR bit for bit.
inline Value masked_softmax_ce(Graph& g, Value zn, const std::vector<std::size_t>& subset,
                               const Tensor& weights, double tau) {
  return g.info_nce(g.gather_rows(zn, subset), weights, tau);
}

inline std::vector<std::size_t> sorted_unique(std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace detail

/// Pairwise contrastive term for views i, j of the same origin:
/// -log( exp(sim_ij / tau) / sum_{k != i} exp(sim_ik / tau) ), denominator over
/// the whole batch object the caller passed. Computed as lse - pair, so it is
/// nonnegative by construction.
inline Value simclr_pair_term_node(Graph& g, Value z, const ContrastiveBatch& b, std::size_t i,
                                   std::size_t j, const LossConfig& cfg) {
  cfg.validate();
  if (i == j) fail(errc::invalid_argument, "simclr_pair_term: i == j");
  if (i >= b.views() || j >= b.views())
    fail(errc::invalid_argument, "simclr_pair_term: index out of range");
  if (b.origin[i] != b.origin[j])
    fail(errc::invalid_argument, "simclr_pair_term: views " + std::to_string(i) + " and " +
                                     std::to_string(j) + " have different origins");
  Value zn = detail::normalized_rows(g, z, cfg);
  Value row = g.gather_rows(zn, {i});
  Value sims = g.scale(g.matmul(row, g.transpose(zn)), 1.0 / cfg.tau);  // 1 x 2N
  Tensor self_mask = Tensor::zeros(1, b.views());
  self_mask.v[i] = detail::kMaskNegInf;
  Value lse = g.lse_rows(g.add(sims, g.input(self_mask)));
  Tensor select = Tensor::zeros(1, b.views());
  select.v[j] = 1.0;
  Value pair = g.sum_all(g.mul(sims, g.input(select)));
  return g.add(g.sum_all(lse), g.scale(pair, -1.0));
}

/// SimCLR loss over a subset of view indices (both views of each included
/// origin must be present). Numerator and denominator are restricted to the
/// subset. Empty subset contributes 0.
inline Value simclr_loss_node(Graph& g, Value z, const ContrastiveBatch& b,
                              const std::vector<std::size_t>& subset, const LossConfig& cfg) {
  cfg.validate();
  const std::vector<std::size_t> idx = detail::sorted_unique(subset);
  if (idx.empty()) return g.input(Tensor::scalar(0.0));

  std::vector<std::size_t> pos_in_subset(b.views(), static_cast<std::size_t>(-1));
  for (std::size_t r = 0; r < idx.size(); ++r) pos_in_subset[idx[r]] = r;
  std::vector<int> orphans;
  for (std::size_t i : idx) {
    std::size_t p = b.partner(i);
    if (pos_in_subset[p] == static_cast<std::size_t>(-1)) orphans.push_back(b.origin[i]);
  }
  if (!orphans.empty()) {
    std::ostringstream os;
    os << "simclr_loss: subset not closed under view pairing; orphan origins:";
    for (int o : orphans) os << " " << o;
    fail(errc::invalid_argument, os.str());
  }

  Tensor weights = Tensor::zeros(idx.size(), idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    weights.at(r, pos_in_subset[b.partner(idx[r])]) = 1.0;
  Value zn = detail::normalized_rows(g, z, cfg);
  return detail::masked_softmax_ce(g, zn, idx, weights, cfg.tau);
}

/// Supervised contrastive loss over the full batch: every same-pseudo-label
/// view is a positive, denominator over all other views.
inline Value supcon_loss_node(Graph& g, Value z, const ContrastiveBatch& b, const LossConfig& cfg) {
  cfg.validate();
  if (b.pseudo_label.empty())
    fail(errc::invalid_argument, "supcon_loss: batch has no pseudo_label array");
  std::map<int, std::size_t> class_count;
  for (int c : b.pseudo_label) ++class_count[c];
  for (const auto& [c, cnt] : class_count)
    if (cnt < 2)
      fail(errc::invalid_argument, "supcon_loss: singleton class " + std::to_string(c));

  const std::size_t m = b.views();
  Tensor weights = Tensor::zeros(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const double inv_p = 1.0 / static_cast<double>(class_count[b.pseudo_label[i]] - 1);
    for (std::size_t p = 0; p < m; ++p)
      if (p != i && b.pseudo_label[p] == b.pseudo_label[i]) weights.at(i, p) = inv_p;
  }
  Value zn = detail::normalized_rows(g, z, cfg);
  return detail::masked_softmax_ce(g, zn, b.all_views(), weights, cfg.tau);
}

/// Attraction-only loss over negative-bag views:
/// sum_{i in Neg} (-1/|Neg|) sum_{j in Neg, j != i} z_i . z_j / tau.
/// Defined as 0 when |Neg| <= 1. For unit-norm rows, the minimum is
/// -(|Neg|-1)/tau, attained exactly when all negative features coincide.
inline Value similarity_loss_node(Graph& g, Value z, const ContrastiveBatch& b,
                                  const LossConfig& cfg) {
  cfg.validate();
  const std::vector<std::size_t> neg = b.views_with_label(kNegativeBag);
  if (neg.size() <= 1) return g.input(Tensor::scalar(0.0));
  Value zn = detail::normalized_rows(g, z, cfg);
  Value zneg = g.gather_rows(zn, neg);
  Value sim = g.matmul(zneg, g.transpose(zneg));
  Tensor offdiag = Tensor::full(neg.size(), neg.size(), 1.0);
  for (std::size_t i = 0; i < neg.size(); ++i) offdiag.at(i, i) = 0.0;
  const double coef = -1.0 / (static_cast<double>(neg.size()) * cfg.tau);
  return g.scale(g.sum_all(g.mul(sim, g.input(offdiag))), coef);
}

struct WeakSupConNodes {
  Value total;
  Value similarity;  // unweighted similarity part
  Value simclr;      // positive-subset SimCLR part
};

/// Weighted two-task total: alpha * similarity(negative views) +
/// simclr(positive views). Degenerate subsets contribute 0.
inline WeakSupConNodes weaksupcon_loss_node(Graph& g, Value z, const ContrastiveBatch& b,
                                            const LossConfig& cfg) {
  cfg.validate();
  WeakSupConNodes out;
  out.similarity = similarity_loss_node(g, z, b, cfg);
  out.simclr = simclr_loss_node(g, z, b, b.views_with_label(kPositiveBag), cfg);
  out.total = g.add(g.scale(out.similarity, cfg.alpha), out.simclr);
  return out;
}

// ---- value-level wrappers (same code path, forward only) ----

inline double simclr_pair_term(const ContrastiveBatch& b, std::size_t i, std::size_t j,
                               const LossConfig& cfg) {
  Graph g;
  Value z = g.input(b.z);
  return g.val(simclr_pair_term_node(g, z, b, i, j, cfg)).v[0];
}

inline double simclr_loss(const ContrastiveBatch& b, const std::vector<std::size_t>& subset,
                          const LossConfig& cfg) {
  Graph g;
  Value z = g.input(b.z);
  return g.val(simclr_loss_node(g, z, b, subset, cfg)).v[0];
}

inline double supcon_loss(const ContrastiveBatch& b, const LossConfig& cfg) {
  Graph g;
  Value z = g.input(b.z);
  return g.val(supcon_loss_node(g, z, b, cfg)).v[0];
}

inline double similarity_loss(const ContrastiveBatch& b, const LossConfig& cfg) {
  Graph g;
  Value z = g.input(b.z);
  return g.val(similarity_loss_node(g, z, b, cfg)).v[0];
}

struct WeakSupConResult {
  double total;
  double similarity_part;
  double simclr_part;
};

inline WeakSupConResult weaksupcon_loss(const ContrastiveBatch& b, const LossConfig& cfg) {
  Graph g;
  Value z = g.input(b.z);
  WeakSupConNodes n = weaksupcon_loss_node(g, z, b, cfg);
  return {g.val(n.total).v[0], g.val(n.similarity).v[0], g.val(n.simclr).v[0]};
}

/// Evaluates the supervised contrastive loss along two algebraic routes --
/// the quotient form -log(exp(s_ip)/sum_a exp(s_ia)) with direct exp sums,
/// and the expanded form -(s_ip - log sum_a exp(s_ia)) with a max-shifted
/// log-sum-exp -- and returns the absolute difference between them.
inline double supcon_decomposition_check(const ContrastiveBatch& b, const LossConfig& cfg) {
  cfg.validate();
  if (b.pseudo_label.empty())
    fail(errc::invalid_argument, "supcon_decomposition_check: batch has no pseudo_label array");
  std::map<int, std::size_t> class_count;
  for (int c : b.pseudo_label) ++class_count[c];
  for (const auto& [c, cnt] : class_count)
    if (cnt < 2)
      fail(errc::invalid_argument, "supcon_decomposition_check: singleton class " + std::to_string(c));

  const std::size_t m = b.views();
  Tensor zn = b.z;
  if (cfg.normalize_inputs) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < zn.cols(); ++j) s += zn.at(i, j) * zn.at(i, j);
      const double nrm = std::sqrt(s);
      if (nrm <= 1e-12)
        fail(errc::zero_norm, "supcon_decomposition_check: zero-norm row " + std::to_string(i));
      for (std::size_t j = 0; j < zn.cols(); ++j) zn.at(i, j) /= nrm;
    }
  }
  auto sim = [&](std::size_t i, std::size_t a) {
    double s = 0.0;
    for (std::size_t j = 0; j < zn.cols(); ++j) s += zn.at(i, j) * zn.at(a, j);
    return s / cfg.tau;
  };

  double quotient_form = 0.0, expanded_form = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double denom = 0.0, mx = -1e300;
    for (std::size_t a = 0; a < m; ++a) {
      if (a == i) continue;
      denom += std::exp(sim(i, a));
      mx = std::max(mx, sim(i, a));
    }
    double shifted = 0.0;
    for (std::size_t a = 0; a < m; ++a)
      if (a != i) shifted += std::exp(sim(i, a) - mx);
    const double lse = mx + std::log(shifted);

    const double inv_p = 1.0 / static_cast<double>(class_count[b.pseudo_label[i]] - 1);
    for (std::size_t p = 0; p < m; ++p) {
      if (p == i || b.pseudo_label[p] != b.pseudo_label[i]) continue;
      quotient_form += -inv_p * std::log(std::exp(sim(i, p)) / denom);
      expanded_form += -inv_p * (sim(i, p) - lse);
    }
  }
  return std::fabs(quotient_form - expanded_form);
}

}  // namespace wsc
