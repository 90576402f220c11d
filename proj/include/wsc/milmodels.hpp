#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wsc/bags.hpp"
#include "wsc/encoder.hpp"
#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/metrics.hpp"
#include "wsc/rng.hpp"

namespace wsc {

enum class MilKind { mean, max, abmil, dtfd };

inline std::string mil_kind_name(MilKind k) {
  switch (k) {
    case MilKind::mean: return "mean";
    case MilKind::max: return "max";
    case MilKind::abmil: return "abmil";
    case MilKind::dtfd: return "dtfd";
  }
  return "?";
}

inline MilKind mil_kind_from_name(const std::string& s) {
  if (s == "mean") return MilKind::mean;
  if (s == "max") return MilKind::max;
  if (s == "abmil") return MilKind::abmil;
  if (s == "dtfd") return MilKind::dtfd;
  fail(errc::config, "unknown MIL model kind '" + s + "'");
}

struct MILModelSpec {
  MilKind kind = MilKind::abmil;
  std::size_t input_dim = 32;
  std::size_t attention_dim = 16;            // abmil / dtfd scoring width
  std::size_t num_pseudo_bags = 4;           // dtfd only, M >= 2
  std::vector<std::size_t> classifier_widths;  // hidden widths; empty = linear head

  void validate() const {
    if (input_dim < 1) fail(errc::config, "MILModelSpec: input_dim must be >= 1");
    if ((kind == MilKind::abmil || kind == MilKind::dtfd) && attention_dim < 1)
      fail(errc::config, "MILModelSpec: attention_dim must be >= 1");
    if (kind == MilKind::dtfd && num_pseudo_bags < 2)
      fail(errc::config, "MILModelSpec: num_pseudo_bags must be >= 2");
  }

  std::vector<std::size_t> classifier_layer_widths() const {
    std::vector<std::size_t> w{input_dim};
    w.insert(w.end(), classifier_widths.begin(), classifier_widths.end());
    w.push_back(1);
    return w;
  }
};

/// Gated attention scorer: e_k = w . (tanh(h_k V) * sigmoid(h_k U)).
struct GatedAttentionParams {
  Tensor V;  // D x k
  Tensor U;  // D x k
  Tensor w;  // k x 1
};

inline GatedAttentionParams init_gated_attention(std::size_t input_dim, std::size_t att_dim,
                                                 Rng& rng) {
  GatedAttentionParams p;
  const double sv = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double sw = 1.0 / std::sqrt(static_cast<double>(att_dim));
  p.V = Tensor::zeros(input_dim, att_dim);
  p.U = Tensor::zeros(input_dim, att_dim);
  p.w = Tensor::zeros(att_dim, 1);
  for (double& x : p.V.v) x = (2.0 * rng.next_double() - 1.0) * sv;
  for (double& x : p.U.v) x = (2.0 * rng.next_double() - 1.0) * sv;
  for (double& x : p.w.v) x = (2.0 * rng.next_double() - 1.0) * sw;
  return p;
}

struct MilParams {
  GatedAttentionParams att1;  // abmil, dtfd tier 1
  GatedAttentionParams att2;  // dtfd tier 2
  MlpParams cls1;             // mean / max / abmil head, dtfd tier 1 head
  MlpParams cls2;             // dtfd tier 2 head
};

inline MilParams init_mil_params(const MILModelSpec& spec, Rng& rng) {
  spec.validate();
  MilParams p;
  switch (spec.kind) {
    case MilKind::mean:
    case MilKind::max:
      p.cls1 = init_mlp(spec.classifier_layer_widths(), rng);
      break;
    case MilKind::abmil:
      p.att1 = init_gated_attention(spec.input_dim, spec.attention_dim, rng);
      p.cls1 = init_mlp(spec.classifier_layer_widths(), rng);
      break;
    case MilKind::dtfd:
      p.att1 = init_gated_attention(spec.input_dim, spec.attention_dim, rng);
      p.cls1 = init_mlp(spec.classifier_layer_widths(), rng);
      p.att2 = init_gated_attention(spec.input_dim, spec.attention_dim, rng);
      p.cls2 = init_mlp(spec.classifier_layer_widths(), rng);
      break;
  }
  return p;
}

struct BagPrediction {
  std::uint32_t bag_id = 0;
  double score = 0.0;                    // positive-class probability
  std::vector<double> attention;         // per-instance weights (abmil/dtfd), empty otherwise
};

/// Shuffled round-robin partition into M label-inheriting pseudo-bags:
/// sizes differ by at most one, disjoint, union is the whole bag.
inline std::vector<std::vector<std::size_t>> dtfd_split(std::size_t n_instances, std::size_t m,
                                                        Rng& rng) {
  if (m < 2) fail(errc::invalid_argument, "dtfd_split: need at least 2 pseudo-bags");
  if (n_instances < m)
    fail(errc::invalid_argument, "dtfd_split: bag of " + std::to_string(n_instances) +
                                     " instances cannot fill " + std::to_string(m) +
                                     " pseudo-bags");
  std::vector<std::size_t> order(n_instances);
  for (std::size_t i = 0; i < n_instances; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> parts(m);
  for (std::size_t i = 0; i < n_instances; ++i) parts[i % m].push_back(order[i]);
  return parts;
}

namespace detail {

struct BoundGatedAttention {
  Value V, U, w;
};

inline BoundGatedAttention bind_attention(Graph& g, GatedAttentionParams& p,
                                          std::vector<ParamBinding>& bindings) {
  BoundGatedAttention b;
  b.V = g.param(p.V);
  b.U = g.param(p.U);
  b.w = g.param(p.w);
  bindings.push_back({&p.V, b.V});
  bindings.push_back({&p.U, b.U});
  bindings.push_back({&p.w, b.w});
  return b;
}

struct AttentionPooled {
  Value rep;        // 1 x D attention-weighted bag representation
  Value attention;  // n x 1 simplex weights
};

inline AttentionPooled gated_attention_pool(Graph& g, Value h, const BoundGatedAttention& att) {
  Value gates = g.mul(g.tanh_fn(g.matmul(h, att.V)), g.sigmoid_fn(g.matmul(h, att.U)));
  Value scores = g.matmul(gates, att.w);        // n x 1
  Value a = g.softmax_flat(scores);             // n x 1
  Value rep = g.matmul(g.transpose(a), h);      // 1 x D
  return {rep, a};
}

}  // namespace detail

struct MilForwardNodes {
  Value logit;                    // scalar bag logit
  Value attention;                // invalid unless abmil/dtfd
  std::vector<Value> tier1_logits;  // dtfd only
};

/// Forward pass for one bag of frozen features (n x D). For dtfd, `split`
/// must hold the pseudo-bag partition to use.
inline MilForwardNodes mil_forward_node(Graph& g, Value h, const MILModelSpec& spec,
                                        MilParams& params, std::vector<ParamBinding>& bindings,
                                        const std::vector<std::vector<std::size_t>>* split = nullptr) {
  spec.validate();
  if (g.val(h).rows() < 1) fail(errc::invalid_argument, "mil_forward: empty bag");
  if (g.val(h).cols() != spec.input_dim)
    fail(errc::shape_mismatch, "mil_forward: feature width " + std::to_string(g.val(h).cols()) +
                                   " != model input_dim " + std::to_string(spec.input_dim));
  MilForwardNodes out;
  switch (spec.kind) {
    case MilKind::mean: {
      BoundMlp cls = bind_mlp(g, params.cls1, bindings);
      out.logit = mlp_forward(g, g.mean_rows(h), cls, Activation::tanh);
      break;
    }
    case MilKind::max: {
      BoundMlp cls = bind_mlp(g, params.cls1, bindings);
      Value instance_logits = mlp_forward(g, h, cls, Activation::tanh);  // n x 1
      out.logit = g.max_flat(instance_logits);
      break;
    }
    case MilKind::abmil: {
      detail::BoundGatedAttention att = detail::bind_attention(g, params.att1, bindings);
      BoundMlp cls = bind_mlp(g, params.cls1, bindings);
      detail::AttentionPooled pooled = detail::gated_attention_pool(g, h, att);
      out.logit = mlp_forward(g, pooled.rep, cls, Activation::tanh);
      out.attention = pooled.attention;
      break;
    }
    case MilKind::dtfd: {
      if (!split) fail(errc::invalid_argument, "mil_forward: dtfd requires a pseudo-bag split");
      detail::BoundGatedAttention att1 = detail::bind_attention(g, params.att1, bindings);
      BoundMlp cls1 = bind_mlp(g, params.cls1, bindings);
      detail::BoundGatedAttention att2 = detail::bind_attention(g, params.att2, bindings);
      BoundMlp cls2 = bind_mlp(g, params.cls2, bindings);
      std::vector<Value> reps;
      for (const auto& idx : *split) {
        Value hj = g.gather_rows(h, idx);
        detail::AttentionPooled pooled = detail::gated_attention_pool(g, hj, att1);
        reps.push_back(pooled.rep);
        out.tier1_logits.push_back(mlp_forward(g, pooled.rep, cls1, Activation::tanh));
      }
      Value tier2_input = g.concat_rows(reps);  // M x D pseudo-bag features as instances
      detail::AttentionPooled pooled2 = detail::gated_attention_pool(g, tier2_input, att2);
      out.logit = mlp_forward(g, pooled2.rep, cls2, Activation::tanh);
      out.attention = pooled2.attention;
      break;
    }
  }
  return out;
}

/// Training loss: bag-level cross-entropy; dtfd adds the mean tier-1
/// cross-entropy, with every pseudo-bag inheriting the bag label.
inline Value mil_loss_node(Graph& g, const MilForwardNodes& fwd, int label) {
  const double y = static_cast<double>(label);
  Value loss = g.bce_logit(fwd.logit, y);
  if (!fwd.tier1_logits.empty()) {
    Value acc = g.bce_logit(fwd.tier1_logits[0], y);
    for (std::size_t j = 1; j < fwd.tier1_logits.size(); ++j)
      acc = g.add(acc, g.bce_logit(fwd.tier1_logits[j], y));
    loss = g.add(loss, g.scale(acc, 1.0 / static_cast<double>(fwd.tier1_logits.size())));
  }
  return loss;
}

/// Deterministic evaluation-time pseudo-bag split (independent of epoch).
inline std::vector<std::vector<std::size_t>> dtfd_eval_split(const Bag& bag,
                                                             const MILModelSpec& spec,
                                                             std::uint64_t seed) {
  Rng rng = rng_stream(seed, "dtfd-eval", bag.id + 1);
  return dtfd_split(bag.size(), spec.num_pseudo_bags, rng);
}

inline BagPrediction mil_predict(const Bag& bag, const MILModelSpec& spec, MilParams& params,
                                 std::uint64_t seed) {
  Graph g;
  std::vector<ParamBinding> bindings;
  Value h = g.input(bag.instances);
  std::vector<std::vector<std::size_t>> split;
  if (spec.kind == MilKind::dtfd) split = dtfd_eval_split(bag, spec, seed);
  MilForwardNodes fwd =
      mil_forward_node(g, h, spec, params, bindings, spec.kind == MilKind::dtfd ? &split : nullptr);
  BagPrediction p;
  p.bag_id = bag.id;
  const double logit = g.val(fwd.logit).v[0];
  p.score = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit))
                         : std::exp(logit) / (1.0 + std::exp(logit));
  if (fwd.attention.valid()) p.attention = g.val(fwd.attention).v;
  return p;
}

inline std::vector<double> mil_scores(const std::vector<Bag>& bags, const MILModelSpec& spec,
                                      MilParams& params, std::uint64_t seed) {
  std::vector<double> s;
  s.reserve(bags.size());
  for (const Bag& b : bags) s.push_back(mil_predict(b, spec, params, seed).score);
  return s;
}

struct MilTrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  std::uint64_t seed = 7;
};

struct MilValRow {
  std::size_t epoch = 0;
  double balanced_accuracy = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;
};

struct MilTrainResult {
  MILModelSpec spec;
  MilParams params;       // snapshot from the best-validation-AUC epoch
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  std::vector<MilValRow> val_log;
};

/// One gradient step per bag (shuffled each epoch), binary cross-entropy.
/// dtfd re-splits pseudo-bags every epoch from (seed, epoch, bag id). The
/// returned checkpoint is the earliest epoch attaining the maximum
/// validation AUC.
inline MilTrainResult train_mil(const std::vector<Bag>& train_bags,
                                const std::vector<Bag>& val_bags, const MILModelSpec& spec,
                                const MilTrainConfig& cfg) {
  spec.validate();
  if (train_bags.empty() || val_bags.empty())
    fail(errc::invalid_argument, "train_mil: empty train or validation split");
  bool has_pos = false, has_neg = false;
  for (const Bag& b : val_bags) (b.label == 1 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    fail(errc::invalid_argument, "train_mil: validation set has a single label, AUC undefined");

  std::vector<int> val_labels;
  for (const Bag& b : val_bags) val_labels.push_back(b.label);

  Rng init_rng = rng_stream(cfg.seed, "init");
  Rng shuffle_rng = rng_stream(cfg.seed, "shuffle");

  MilTrainResult result;
  result.spec = spec;
  MilParams params = init_mil_params(spec, init_rng);
  result.params = params;
  result.best_val_auc = -1.0;

  std::vector<std::size_t> order(train_bags.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t oi : order) {
      const Bag& bag = train_bags[oi];
      Graph g;
      std::vector<ParamBinding> bindings;
      Value h = g.input(bag.instances);
      std::vector<std::vector<std::size_t>> split;
      if (spec.kind == MilKind::dtfd) {
        Rng split_rng = rng_stream(cfg.seed, "dtfd-split", epoch, bag.id + 1);
        split = dtfd_split(bag.size(), spec.num_pseudo_bags, split_rng);
      }
      MilForwardNodes fwd = mil_forward_node(g, h, spec, params, bindings,
                                             spec.kind == MilKind::dtfd ? &split : nullptr);
      Value loss = mil_loss_node(g, fwd, bag.label);
      g.backward(loss);
      sgd_step(g, bindings, cfg.learning_rate);
    }

    const std::vector<double> vs = mil_scores(val_bags, spec, params, cfg.seed);
    MetricsReport m = evaluate_scores(vs, val_labels);
    result.val_log.push_back({epoch, m.balanced_accuracy, m.accuracy, m.auc});
    if (m.auc > result.best_val_auc) {  // strict: ties keep the earliest epoch
      result.best_val_auc = m.auc;
      result.best_epoch = epoch;
      result.params = params;
    }
  }
  return result;
}

}  // namespace wsc
