#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wsc/checkpoint.hpp"
#include "wsc/config.hpp"
#include "wsc/csv.hpp"
#include "wsc/diagnostics.hpp"
#include "wsc/feature_store.hpp"
#include "wsc/manifest.hpp"
#include "wsc/metrics.hpp"
#include "wsc/milmodels.hpp"
#include "wsc/pretrain.hpp"

namespace wsc {

namespace paths {

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}
inline std::string data_store(const RunConfig& c, const std::string& split) {
  return join(c.out_dir, "data_" + split + ".wscf");
}
inline std::string feature_store_path(const RunConfig& c, const std::string& split) {
  return join(c.out_dir, "features_" + split + ".wscf");
}
inline std::string projected_store_path(const RunConfig& c, const std::string& split) {
  return join(c.out_dir, "projected_" + split + ".wscf");
}
inline std::string encoder_ckpt(const RunConfig& c) { return join(c.out_dir, "encoder.wsck"); }
inline std::string loss_log_csv(const RunConfig& c) { return join(c.out_dir, "loss_log.csv"); }
inline std::string mil_ckpt(const RunConfig& c) {
  return join(c.out_dir, "mil_" + mil_kind_name(c.mil.kind) + ".wsck");
}
inline std::string mil_val_csv(const RunConfig& c) {
  return join(c.out_dir, "mil_val_log_" + mil_kind_name(c.mil.kind) + ".csv");
}
inline std::string metrics_csv(const RunConfig& c) {
  return join(c.out_dir, "metrics_" + mil_kind_name(c.mil.kind) + ".csv");
}
inline std::string manifest_json(const RunConfig& c, const std::string& command) {
  return join(c.out_dir, "manifest_" + command + ".json");
}

}  // namespace paths

namespace detail {

inline void ensure_out_dir(const RunConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out_dir, ec);
  if (ec) fail(errc::io, "cannot create output directory '" + c.out_dir + "': " + ec.message());
}

inline void finish_command(const RunConfig& c, const std::string& command,
                           const std::vector<std::uint64_t>& seeds,
                           const std::vector<std::string>& artifacts, const WallTimer& timer) {
  write_manifest(paths::manifest_json(c, command), command, to_json(c), seeds, artifacts,
                 timer.seconds());
}

}  // namespace detail

/// gen-data: synthesize the benchmark and write one raw feature store per split.
inline std::vector<std::string> cmd_gen_data(const RunConfig& c) {
  WallTimer timer;
  detail::ensure_out_dir(c);
  DatasetSplit split = generate_synthetic(c.synthetic);
  for (const Bag& b : split.train) b.check_mil_assumption();
  for (const Bag& b : split.val) b.check_mil_assumption();
  for (const Bag& b : split.test) b.check_mil_assumption();
  std::vector<std::string> artifacts;
  write_feature_store(paths::data_store(c, "train"), split.train, c.synthetic.d);
  write_feature_store(paths::data_store(c, "val"), split.val, c.synthetic.d);
  write_feature_store(paths::data_store(c, "test"), split.test, c.synthetic.d);
  artifacts = {paths::data_store(c, "train"), paths::data_store(c, "val"),
               paths::data_store(c, "test")};
  detail::finish_command(c, "gen-data", {c.synthetic.seed}, artifacts, timer);
  return artifacts;
}

/// pretrain: contrastive pretraining on the training split; writes the
/// encoder checkpoint and the per-epoch loss log.
inline std::vector<std::string> cmd_pretrain(const RunConfig& c) {
  WallTimer timer;
  detail::ensure_out_dir(c);
  std::vector<Bag> train = read_feature_store(paths::data_store(c, "train"));
  PretrainResult r = pretrain(train, c.encoder, c.projection, c.augmentation, c.pretrain);

  save_checkpoint(paths::encoder_ckpt(c), make_encoder_checkpoint(r, c.pretrain, config_hash(c)));

  CsvFile log(paths::loss_log_csv(c), {"epoch", "total", "similarity_part", "simclr_part"});
  for (std::size_t e = 0; e < r.loss_log.size(); ++e)
    log.row({csv_size(e + 1), csv_double(r.loss_log[e].total),
             csv_double(r.loss_log[e].similarity_part), csv_double(r.loss_log[e].simclr_part)});
  log.close();

  std::vector<std::string> artifacts{paths::encoder_ckpt(c), paths::loss_log_csv(c)};
  detail::finish_command(c, "pretrain", {c.pretrain.seed}, artifacts, timer);
  return artifacts;
}

/// extract: frozen-feature extraction for every split; writes both the
/// embedding stores (MIL inputs) and the projected stores (diagnostics).
inline std::vector<std::string> cmd_extract(const RunConfig& c) {
  WallTimer timer;
  detail::ensure_out_dir(c);
  EncoderCheckpoint enc = load_encoder_checkpoint(paths::encoder_ckpt(c), config_hash(c));
  std::vector<std::string> artifacts;
  for (const std::string split : {"train", "val", "test"}) {
    std::vector<Bag> bags = read_feature_store(paths::data_store(c, split));
    std::vector<Bag> h =
        extract_features(bags, enc.encoder_spec, enc.encoder, enc.projection, false);
    std::vector<Bag> z =
        extract_features(bags, enc.encoder_spec, enc.encoder, enc.projection, true);
    write_feature_store(paths::feature_store_path(c, split), h, enc.encoder_spec.embed_dim());
    write_feature_store(paths::projected_store_path(c, split), z,
                        enc.projection_spec.output_width);
    artifacts.push_back(paths::feature_store_path(c, split));
    artifacts.push_back(paths::projected_store_path(c, split));
  }
  detail::finish_command(c, "extract", {enc.seed}, artifacts, timer);
  return artifacts;
}

/// train-mil: one MIL head on frozen embeddings with validation-AUC model
/// selection; writes the selected checkpoint and the per-epoch validation log.
inline std::vector<std::string> cmd_train_mil(const RunConfig& c) {
  WallTimer timer;
  detail::ensure_out_dir(c);
  std::size_t dim = 0;
  std::vector<Bag> train = read_feature_store(paths::feature_store_path(c, "train"), &dim);
  std::vector<Bag> val = read_feature_store(paths::feature_store_path(c, "val"));
  MILModelSpec spec = c.mil;
  spec.input_dim = dim;  // the store, not the config, knows the frozen width
  MilTrainResult r = train_mil(train, val, spec, c.mil_train);

  save_checkpoint(paths::mil_ckpt(c), make_mil_checkpoint(r, c.mil_train.seed, config_hash(c)));
  CsvFile log(paths::mil_val_csv(c), {"epoch", "balanced_accuracy", "accuracy", "auc"});
  for (const MilValRow& row : r.val_log)
    log.row({csv_size(row.epoch), csv_double(row.balanced_accuracy), csv_double(row.accuracy),
             csv_double(row.auc)});
  log.close();

  std::vector<std::string> artifacts{paths::mil_ckpt(c), paths::mil_val_csv(c)};
  detail::finish_command(c, "train-mil", {c.mil_train.seed}, artifacts, timer);
  return artifacts;
}

struct EvalOutcome {
  std::vector<MetricsReport> per_seed;
  double mean_balanced_accuracy = 0.0, mean_accuracy = 0.0, mean_auc = 0.0;
  double std_balanced_accuracy = 0.0, std_accuracy = 0.0, std_auc = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};  // sample std (n-1)
}

}  // namespace detail

/// eval: train the configured MIL head `repeats` times (seeds mil.seed + r),
/// score the test split with each selected checkpoint, and write per-seed
/// rows plus mean and sample-std aggregate rows.
inline EvalOutcome cmd_eval(const RunConfig& c) {
  WallTimer timer;
  detail::ensure_out_dir(c);
  std::size_t dim = 0;
  std::vector<Bag> train = read_feature_store(paths::feature_store_path(c, "train"), &dim);
  std::vector<Bag> val = read_feature_store(paths::feature_store_path(c, "val"));
  std::vector<Bag> test = read_feature_store(paths::feature_store_path(c, "test"));
  MILModelSpec spec = c.mil;
  spec.input_dim = dim;
  std::vector<int> test_labels;
  for (const Bag& b : test) test_labels.push_back(b.label);

  EvalOutcome out;
  std::vector<std::uint64_t> seeds;
  std::vector<double> baccs, accs, aucs;
  CsvFile csv(paths::metrics_csv(c), {"model", "seed", "balanced_accuracy", "accuracy", "auc"});
  const std::string model = mil_kind_name(c.mil.kind);
  for (std::size_t rep = 0; rep < c.repeats; ++rep) {
    MilTrainConfig tc = c.mil_train;
    tc.seed = c.mil_train.seed + rep;
    seeds.push_back(tc.seed);
    MilTrainResult r = train_mil(train, val, spec, tc);
    const std::vector<double> scores = mil_scores(test, spec, r.params, tc.seed);
    MetricsReport m = evaluate_scores(scores, test_labels);
    out.per_seed.push_back(m);
    baccs.push_back(m.balanced_accuracy);
    accs.push_back(m.accuracy);
    aucs.push_back(m.auc);
    csv.row({model, csv_size(tc.seed), csv_double(m.balanced_accuracy), csv_double(m.accuracy),
             csv_double(m.auc)});
  }
  std::tie(out.mean_balanced_accuracy, out.std_balanced_accuracy) = detail::mean_std(baccs);
  std::tie(out.mean_accuracy, out.std_accuracy) = detail::mean_std(accs);
  std::tie(out.mean_auc, out.std_auc) = detail::mean_std(aucs);
  csv.row({model, "mean", csv_double(out.mean_balanced_accuracy), csv_double(out.mean_accuracy),
           csv_double(out.mean_auc)});
  csv.row({model, "std", csv_double(out.std_balanced_accuracy), csv_double(out.std_accuracy),
           csv_double(out.std_auc)});
  csv.close();

  detail::finish_command(c, "eval", seeds, {paths::metrics_csv(c)}, timer);
  return out;
}

/// analyze: densest-anchor cosine diagnostics and the pooled PCA projection
/// over one split's projected features, grouped by bag label.
inline std::vector<std::string> cmd_analyze(const RunConfig& c, const std::string& split = "train") {
  WallTimer timer;
  detail::ensure_out_dir(c);
  std::vector<Bag> bags = read_feature_store(paths::projected_store_path(c, split));

  std::size_t n_neg = 0, n_pos = 0, d = 0;
  for (const Bag& b : bags) {
    (b.label == 1 ? n_pos : n_neg) += b.size();
    d = b.instances.cols();
  }
  if (n_neg < 2 || n_pos < 1)
    fail(errc::invalid_argument, "analyze: need at least 2 negative-bag and 1 positive-bag features");
  Tensor neg = Tensor::zeros(n_neg, d), pos = Tensor::zeros(n_pos, d);
  Tensor pooled = Tensor::zeros(n_neg + n_pos, d);
  std::vector<int> group;
  std::size_t rn = 0, rp = 0, rall = 0;
  for (const Bag& b : bags)
    for (std::size_t i = 0; i < b.size(); ++i, ++rall) {
      for (std::size_t j = 0; j < d; ++j) {
        pooled.at(rall, j) = b.instances.at(i, j);
        if (b.label == 1)
          pos.at(rp, j) = b.instances.at(i, j);
        else
          neg.at(rn, j) = b.instances.at(i, j);
      }
      b.label == 1 ? ++rp : ++rn;
      group.push_back(b.label);
    }

  AnchorReport anchor = densest_anchor(neg);
  Tensor anchor_row = Tensor::zeros(1, d);
  for (std::size_t j = 0; j < d; ++j) anchor_row.v[j] = neg.at(anchor.anchor_index, j);
  std::vector<double> pos_cosines(n_pos);
  for (std::size_t i = 0; i < n_pos; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += pos.at(i, j) * anchor_row.v[j];
    pos_cosines[i] = std::clamp(s, -1.0, 1.0);
  }
  const std::vector<std::size_t> pos_hist = cosine_histogram(pos_cosines);

  const std::string anchor_path = paths::join(c.out_dir, "anchor.csv");
  CsvFile anchor_csv(anchor_path, {"group", "anchor_index", "neighbor_count", "threshold",
                                   "fraction_above_0.9", "fraction_above_0.999"});
  anchor_csv.row({"negative", csv_size(anchor.anchor_index), csv_size(anchor.neighbor_count),
                  csv_double(anchor.threshold), csv_double(anchor.fraction_above[0.9]),
                  csv_double(anchor.fraction_above[0.999])});
  anchor_csv.row({"positive", csv_size(anchor.anchor_index), csv_size(anchor.neighbor_count),
                  csv_double(anchor.threshold),
                  csv_double(fraction_above_anchor(pos, anchor_row, 0.9)),
                  csv_double(fraction_above_anchor(pos, anchor_row, 0.999))});
  anchor_csv.close();

  auto write_hist = [&](const std::string& path, const std::vector<std::size_t>& counts) {
    CsvFile f(path, {"bin_left", "bin_right", "count"});
    const double w = 2.0 / static_cast<double>(counts.size());
    for (std::size_t b = 0; b < counts.size(); ++b)
      f.row({csv_double(-1.0 + w * static_cast<double>(b)),
             csv_double(-1.0 + w * static_cast<double>(b + 1)), csv_size(counts[b])});
    f.close();
  };
  const std::string hist_neg_path = paths::join(c.out_dir, "histogram_negative.csv");
  const std::string hist_pos_path = paths::join(c.out_dir, "histogram_positive.csv");
  write_hist(hist_neg_path, anchor.histogram);
  write_hist(hist_pos_path, pos_hist);

  PcaSpreadResult spread = pca_spread(pooled, group);
  const std::string pca_path = paths::join(c.out_dir, "pca.csv");
  CsvFile pca_csv(pca_path, {"x", "y", "group"});
  for (std::size_t i = 0; i < pooled.rows(); ++i)
    pca_csv.row({csv_double(spread.pca.projected.at(i, 0)),
                 csv_double(spread.pca.projected.at(i, 1)),
                 group[i] == 1 ? "positive" : "negative"});
  pca_csv.close();

  std::vector<std::string> artifacts{anchor_path, hist_neg_path, hist_pos_path, pca_path};
  detail::finish_command(c, "analyze", {}, artifacts, timer);
  return artifacts;
}

/// ablate: the full pretrain/extract/eval chain for each similarity-loss
/// weight, tabulated into one row per weight.
inline std::vector<std::string> cmd_ablate(const RunConfig& c,
                                           const std::vector<double>& alphas = {0.25, 1.0, 4.0}) {
  WallTimer timer;
  detail::ensure_out_dir(c);
  const std::string ablation_path = paths::join(c.out_dir, "ablation.csv");
  CsvFile csv(ablation_path,
              {"alpha", "balanced_accuracy_mean", "balanced_accuracy_std", "accuracy_mean",
               "accuracy_std", "auc_mean", "auc_std"});
  for (double alpha : alphas) {
    RunConfig sub = c;
    sub.pretrain.mode = PretrainMode::weaksupcon;
    sub.pretrain.loss.alpha = alpha;
    sub.out_dir = paths::join(c.out_dir, "ablate_alpha_" + csv_double(alpha));
    cmd_gen_data(sub);
    cmd_pretrain(sub);
    cmd_extract(sub);
    EvalOutcome e = cmd_eval(sub);
    csv.row({csv_double(alpha), csv_double(e.mean_balanced_accuracy),
             csv_double(e.std_balanced_accuracy), csv_double(e.mean_accuracy),
             csv_double(e.std_accuracy), csv_double(e.mean_auc), csv_double(e.std_auc)});
  }
  csv.close();
  detail::finish_command(c, "ablate", {c.pretrain.seed, c.mil_train.seed}, {ablation_path}, timer);
  return {ablation_path};
}

}  // namespace wsc
