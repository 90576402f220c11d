#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wsc/bags.hpp"
#include "wsc/encoder.hpp"
#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/losses.hpp"
#include "wsc/rng.hpp"

namespace wsc {

enum class PretrainMode { simclr, supcon, weaksupcon, similarity_only };

inline std::string pretrain_mode_name(PretrainMode m) {
  switch (m) {
    case PretrainMode::simclr: return "simclr";
    case PretrainMode::supcon: return "supcon";
    case PretrainMode::weaksupcon: return "weaksupcon";
    case PretrainMode::similarity_only: return "similarity-only";
  }
  return "?";
}

inline PretrainMode pretrain_mode_from_name(const std::string& s) {
  if (s == "simclr") return PretrainMode::simclr;
  if (s == "supcon") return PretrainMode::supcon;
  if (s == "weaksupcon") return PretrainMode::weaksupcon;
  if (s == "similarity-only") return PretrainMode::similarity_only;
  fail(errc::config, "unknown pretrain mode '" + s + "'");
}

struct PretrainConfig {
  PretrainMode mode = PretrainMode::weaksupcon;
  LossConfig loss;
  std::size_t batch_n = 256;  // original samples per batch (2N views)
  std::size_t epochs = 200;
  double learning_rate = 0.05;
  std::uint64_t seed = 7;

  void validate() const {
    loss.validate();
    if (batch_n < 2) fail(errc::config, "PretrainConfig: batch_n must be >= 2");
    if (!(learning_rate > 0.0) && learning_rate != 0.0)
      fail(errc::config, "PretrainConfig: learning_rate must be >= 0");
  }
};

struct EpochLoss {
  double total = 0.0;
  double similarity_part = 0.0;
  double simclr_part = 0.0;
};

struct PretrainResult {
  EncoderSpec encoder_spec;
  ProjectionSpec projection_spec;
  MlpParams encoder;
  MlpParams projection;
  std::vector<EpochLoss> loss_log;  // one entry per epoch, batch means
};

namespace detail {

struct InstancePool {
  Tensor data;              // total x d, all training instances in bag order
  std::vector<int> labels;  // bag label per instance
};

inline InstancePool pool_instances(const std::vector<Bag>& bags) {
  std::size_t total = 0, d = 0;
  for (const Bag& b : bags) {
    total += b.size();
    d = b.instances.cols();
  }
  if (total == 0) fail(errc::invalid_argument, "pretrain: empty dataset");
  InstancePool pool;
  pool.data = Tensor::zeros(total, d);
  pool.labels.reserve(total);
  std::size_t r = 0;
  for (const Bag& b : bags)
    for (std::size_t i = 0; i < b.size(); ++i, ++r) {
      for (std::size_t j = 0; j < d; ++j) pool.data.at(r, j) = b.instances.at(i, j);
      pool.labels.push_back(b.label);
    }
  return pool;
}

}  // namespace detail

/// Assemble a two-view contrastive batch: batch_n instances sampled uniformly
/// with replacement from the pool, each augmented twice; the two views of
/// sample k occupy rows 2k and 2k+1.
inline ContrastiveBatch sample_contrastive_batch(const detail::InstancePool& pool,
                                                 std::size_t batch_n,
                                                 const AugmentationSpec& aug, Rng& sample_rng,
                                                 Rng& aug_rng) {
  const std::size_t d = pool.data.cols();
  ContrastiveBatch batch;
  batch.z = Tensor::zeros(2 * batch_n, d);
  batch.origin.resize(2 * batch_n);
  batch.bag_label.resize(2 * batch_n);
  batch.pseudo_label.resize(2 * batch_n);
  Tensor x = Tensor::zeros(1, d);
  for (std::size_t k = 0; k < batch_n; ++k) {
    const std::size_t pick = sample_rng.index(pool.data.rows());
    for (std::size_t j = 0; j < d; ++j) x.v[j] = pool.data.at(pick, j);
    auto [va, vb] = augment_two_views(x, aug, aug_rng);
    for (std::size_t j = 0; j < d; ++j) {
      batch.z.at(2 * k, j) = va.v[j];
      batch.z.at(2 * k + 1, j) = vb.v[j];
    }
    const int lab = pool.labels[pick];
    batch.origin[2 * k] = batch.origin[2 * k + 1] = static_cast<int>(k);
    batch.bag_label[2 * k] = batch.bag_label[2 * k + 1] = lab;
    batch.pseudo_label[2 * k] = batch.pseudo_label[2 * k + 1] = lab;
  }
  return batch;
}

/// Minibatch SGD over the configured contrastive objective. The loss log and
/// final parameters are bit-reproducible for a given seed and config.
inline PretrainResult pretrain(const std::vector<Bag>& train_bags, const EncoderSpec& enc_spec,
                               const ProjectionSpec& proj_spec, const AugmentationSpec& aug,
                               const PretrainConfig& cfg) {
  enc_spec.validate();
  proj_spec.validate();
  aug.validate();
  cfg.validate();
  if (train_bags.empty()) fail(errc::invalid_argument, "pretrain: no training bags");

  bool has_neg = false, has_pos = false;
  for (const Bag& b : train_bags) (b.label == 1 ? has_pos : has_neg) = true;
  if (cfg.mode == PretrainMode::weaksupcon && !(has_neg && has_pos))
    fail(errc::invalid_argument, "pretrain: weaksupcon mode needs both bag labels in the dataset");
  if (cfg.mode == PretrainMode::similarity_only && !has_neg)
    fail(errc::invalid_argument, "pretrain: similarity-only mode needs negative bags");

  const detail::InstancePool pool = detail::pool_instances(train_bags);
  if (pool.data.cols() != enc_spec.input_dim())
    fail(errc::shape_mismatch, "pretrain: instance width " + std::to_string(pool.data.cols()) +
                                   " != encoder input " + std::to_string(enc_spec.input_dim()));

  Rng init_rng = rng_stream(cfg.seed, "init");
  Rng sample_rng = rng_stream(cfg.seed, "shuffle");
  Rng aug_rng = rng_stream(cfg.seed, "augmentation");

  PretrainResult result;
  result.encoder_spec = enc_spec;
  result.projection_spec = proj_spec;
  result.encoder = init_mlp(enc_spec.layer_widths, init_rng);
  result.projection = init_mlp(projection_widths(enc_spec.embed_dim(), proj_spec), init_rng);

  const std::size_t batches_per_epoch = std::max<std::size_t>(1, pool.data.rows() / cfg.batch_n);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLoss sums;
    for (std::size_t step = 0; step < batches_per_epoch; ++step) {
      ContrastiveBatch batch =
          sample_contrastive_batch(pool, cfg.batch_n, aug, sample_rng, aug_rng);

      Graph g;
      std::vector<ParamBinding> bindings;
      Value x = g.input(batch.z);
      BoundMlp enc = bind_mlp(g, result.encoder, bindings);
      BoundMlp proj = bind_mlp(g, result.projection, bindings);
      EncodeProjectNodes ep = encode_project_node(g, x, enc_spec, enc, proj);

      Value total;
      double similarity_part = 0.0, simclr_part = 0.0;
      switch (cfg.mode) {
        case PretrainMode::simclr: {
          total = simclr_loss_node(g, ep.z, batch, batch.all_views(), cfg.loss);
          simclr_part = g.val(total).v[0];
          break;
        }
        case PretrainMode::supcon: {
          total = supcon_loss_node(g, ep.z, batch, cfg.loss);
          simclr_part = g.val(total).v[0];
          break;
        }
        case PretrainMode::weaksupcon: {
          WeakSupConNodes nodes = weaksupcon_loss_node(g, ep.z, batch, cfg.loss);
          total = nodes.total;
          similarity_part = g.val(nodes.similarity).v[0];
          simclr_part = g.val(nodes.simclr).v[0];
          break;
        }
        case PretrainMode::similarity_only: {
          Value sim = similarity_loss_node(g, ep.z, batch, cfg.loss);
          total = g.scale(sim, cfg.loss.alpha);
          similarity_part = g.val(sim).v[0];
          break;
        }
      }
      // Losses are batch sums; descend on the per-view mean so the step size
      // does not scale with batch_n. Logged values stay sums.
      g.backward(g.scale(total, 1.0 / static_cast<double>(2 * cfg.batch_n)));
      sgd_step(g, bindings, cfg.learning_rate);

      sums.total += g.val(total).v[0];
      sums.similarity_part += similarity_part;
      sums.simclr_part += simclr_part;
    }
    const double inv = 1.0 / static_cast<double>(batches_per_epoch);
    result.loss_log.push_back({sums.total * inv, sums.similarity_part * inv, sums.simclr_part * inv});
  }
  return result;
}

/// Frozen-feature extraction: no augmentation, encoder embeddings h by
/// default, unit-norm projections z when use_projection is set. Bag ids,
/// labels, and witness masks pass through untouched.
inline std::vector<Bag> extract_features(const std::vector<Bag>& bags, const EncoderSpec& enc_spec,
                                         MlpParams& encoder, MlpParams& projection,
                                         bool use_projection) {
  std::vector<Bag> out;
  out.reserve(bags.size());
  for (const Bag& b : bags) {
    if (b.instances.cols() != enc_spec.input_dim())
      fail(errc::shape_mismatch, "extract_features: instance width " +
                                     std::to_string(b.instances.cols()) + " != encoder input " +
                                     std::to_string(enc_spec.input_dim()));
    EncodeProjectResult r = encode_project(b.instances, enc_spec, encoder, projection);
    Bag nb;
    nb.id = b.id;
    nb.label = b.label;
    nb.witness_mask = b.witness_mask;
    nb.instances = use_projection ? r.z : r.h;
    out.push_back(std::move(nb));
  }
  return out;
}

}  // namespace wsc
