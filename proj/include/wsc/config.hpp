#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "wsc/bags.hpp"
#include "wsc/encoder.hpp"
#include "wsc/error.hpp"
#include "wsc/milmodels.hpp"
#include "wsc/pretrain.hpp"
#include "wsc/rng.hpp"

namespace wsc {

/// Everything one experiment needs, schema-validated with defaults for every
/// field. Unknown keys are rejected at every level.
struct RunConfig {
  std::string out_dir = "out";
  std::size_t repeats = 3;
  SyntheticSpec synthetic;
  EncoderSpec encoder;
  ProjectionSpec projection;
  AugmentationSpec augmentation;
  PretrainConfig pretrain;
  MILModelSpec mil;
  MilTrainConfig mil_train;

  void validate() const {
    synthetic.validate();
    encoder.validate();
    projection.validate();
    augmentation.validate();
    pretrain.validate();
    mil.validate();
    if (repeats < 1) fail(errc::config, "repeats must be >= 1");
  }
};

namespace cfg_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(errc::config, where + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || (it.key() == k);
    if (!ok) fail(errc::config, where + ": unknown key '" + it.key() + "'");
  }
}

inline double num(const json& obj, const std::string& where, const char* key, double def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number()) fail(errc::config, where + "." + key + ": expected a number");
  return obj[key].get<double>();
}

inline std::size_t uint_field(const json& obj, const std::string& where, const char* key,
                              std::size_t def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
    fail(errc::config, where + "." + key + ": expected a non-negative integer");
  const auto v = obj[key].get<long long>();
  if (v < 0) fail(errc::config, where + "." + key + ": expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

inline std::uint64_t u64_field(const json& obj, const std::string& where, const char* key,
                               std::uint64_t def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
    fail(errc::config, where + "." + key + ": expected a non-negative integer");
  return obj[key].get<std::uint64_t>();
}

inline bool bool_field(const json& obj, const std::string& where, const char* key, bool def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_boolean()) fail(errc::config, where + "." + key + ": expected a boolean");
  return obj[key].get<bool>();
}

inline std::string str_field(const json& obj, const std::string& where, const char* key,
                             const std::string& def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_string()) fail(errc::config, where + "." + key + ": expected a string");
  return obj[key].get<std::string>();
}

inline std::vector<std::size_t> uint_list(const json& obj, const std::string& where,
                                          const char* key, std::vector<std::size_t> def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_array()) fail(errc::config, where + "." + key + ": expected an array");
  std::vector<std::size_t> out;
  for (const auto& e : obj[key]) {
    if (!e.is_number_unsigned() && !e.is_number_integer())
      fail(errc::config, where + "." + key + ": expected integer entries");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

}  // namespace cfg_detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using namespace cfg_detail;
  RunConfig c;
  check_keys(j, "config",
             {"out_dir", "repeats", "synthetic", "encoder", "projection", "augmentation",
              "pretrain", "mil"});
  c.out_dir = str_field(j, "config", "out_dir", c.out_dir);
  c.repeats = uint_field(j, "config", "repeats", c.repeats);

  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    check_keys(s, "synthetic",
               {"d", "neg_clusters", "pos_clusters", "cluster_sigma", "cluster_separation",
                "witness_rate", "bag_size_min", "bag_size_max", "counts", "seed"});
    c.synthetic.d = uint_field(s, "synthetic", "d", c.synthetic.d);
    c.synthetic.neg_clusters = uint_field(s, "synthetic", "neg_clusters", c.synthetic.neg_clusters);
    c.synthetic.pos_clusters = uint_field(s, "synthetic", "pos_clusters", c.synthetic.pos_clusters);
    c.synthetic.cluster_sigma = num(s, "synthetic", "cluster_sigma", c.synthetic.cluster_sigma);
    c.synthetic.cluster_separation =
        num(s, "synthetic", "cluster_separation", c.synthetic.cluster_separation);
    c.synthetic.witness_rate = num(s, "synthetic", "witness_rate", c.synthetic.witness_rate);
    c.synthetic.bag_size_min = uint_field(s, "synthetic", "bag_size_min", c.synthetic.bag_size_min);
    c.synthetic.bag_size_max = uint_field(s, "synthetic", "bag_size_max", c.synthetic.bag_size_max);
    if (s.contains("counts")) {
      const auto counts = uint_list(s, "synthetic", "counts", {});
      if (counts.size() != 6)
        fail(errc::config,
             "synthetic.counts: expected 6 entries (train-,train+,val-,val+,test-,test+)");
      for (std::size_t i = 0; i < 6; ++i) c.synthetic.counts[i] = counts[i];
    }
    c.synthetic.seed = u64_field(s, "synthetic", "seed", c.synthetic.seed);
  }

  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    check_keys(e, "encoder", {"layer_widths", "activation"});
    c.encoder.layer_widths = uint_list(e, "encoder", "layer_widths", c.encoder.layer_widths);
    c.encoder.activation = activation_from_name(
        str_field(e, "encoder", "activation", activation_name(c.encoder.activation)));
  }

  if (j.contains("projection")) {
    const auto& p = j["projection"];
    check_keys(p, "projection", {"hidden_width", "output_width"});
    c.projection.hidden_width = uint_field(p, "projection", "hidden_width", c.projection.hidden_width);
    c.projection.output_width = uint_field(p, "projection", "output_width", c.projection.output_width);
  }

  if (j.contains("augmentation")) {
    const auto& a = j["augmentation"];
    check_keys(a, "augmentation", {"noise_sigma", "dropout_p"});
    c.augmentation.noise_sigma = num(a, "augmentation", "noise_sigma", c.augmentation.noise_sigma);
    c.augmentation.dropout_p = num(a, "augmentation", "dropout_p", c.augmentation.dropout_p);
  }

  if (j.contains("pretrain")) {
    const auto& p = j["pretrain"];
    check_keys(p, "pretrain",
               {"mode", "tau", "alpha", "normalize_inputs", "batch_n", "epochs", "learning_rate",
                "seed"});
    c.pretrain.mode = pretrain_mode_from_name(
        str_field(p, "pretrain", "mode", pretrain_mode_name(c.pretrain.mode)));
    c.pretrain.loss.tau = num(p, "pretrain", "tau", c.pretrain.loss.tau);
    c.pretrain.loss.alpha = num(p, "pretrain", "alpha", c.pretrain.loss.alpha);
    c.pretrain.loss.normalize_inputs =
        bool_field(p, "pretrain", "normalize_inputs", c.pretrain.loss.normalize_inputs);
    c.pretrain.batch_n = uint_field(p, "pretrain", "batch_n", c.pretrain.batch_n);
    c.pretrain.epochs = uint_field(p, "pretrain", "epochs", c.pretrain.epochs);
    c.pretrain.learning_rate = num(p, "pretrain", "learning_rate", c.pretrain.learning_rate);
    c.pretrain.seed = u64_field(p, "pretrain", "seed", c.pretrain.seed);
  }

  if (j.contains("mil")) {
    const auto& m = j["mil"];
    check_keys(m, "mil",
               {"kind", "attention_dim", "num_pseudo_bags", "classifier_widths", "epochs",
                "learning_rate", "seed"});
    c.mil.kind = mil_kind_from_name(str_field(m, "mil", "kind", mil_kind_name(c.mil.kind)));
    c.mil.attention_dim = uint_field(m, "mil", "attention_dim", c.mil.attention_dim);
    c.mil.num_pseudo_bags = uint_field(m, "mil", "num_pseudo_bags", c.mil.num_pseudo_bags);
    c.mil.classifier_widths = uint_list(m, "mil", "classifier_widths", c.mil.classifier_widths);
    c.mil_train.epochs = uint_field(m, "mil", "epochs", c.mil_train.epochs);
    c.mil_train.learning_rate = num(m, "mil", "learning_rate", c.mil_train.learning_rate);
    c.mil_train.seed = u64_field(m, "mil", "seed", c.mil_train.seed);
  }

  // MIL heads consume frozen encoder embeddings, so the width follows the encoder.
  c.mil.input_dim = c.encoder.embed_dim();

  c.validate();
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["out_dir"] = c.out_dir;
  j["repeats"] = c.repeats;
  j["synthetic"] = {
      {"d", c.synthetic.d},
      {"neg_clusters", c.synthetic.neg_clusters},
      {"pos_clusters", c.synthetic.pos_clusters},
      {"cluster_sigma", c.synthetic.cluster_sigma},
      {"cluster_separation", c.synthetic.cluster_separation},
      {"witness_rate", c.synthetic.witness_rate},
      {"bag_size_min", c.synthetic.bag_size_min},
      {"bag_size_max", c.synthetic.bag_size_max},
      {"counts", c.synthetic.counts},
      {"seed", c.synthetic.seed},
  };
  j["encoder"] = {{"layer_widths", c.encoder.layer_widths},
                  {"activation", activation_name(c.encoder.activation)}};
  j["projection"] = {{"hidden_width", c.projection.hidden_width},
                     {"output_width", c.projection.output_width}};
  j["augmentation"] = {{"noise_sigma", c.augmentation.noise_sigma},
                       {"dropout_p", c.augmentation.dropout_p}};
  j["pretrain"] = {
      {"mode", pretrain_mode_name(c.pretrain.mode)},
      {"tau", c.pretrain.loss.tau},
      {"alpha", c.pretrain.loss.alpha},
      {"normalize_inputs", c.pretrain.loss.normalize_inputs},
      {"batch_n", c.pretrain.batch_n},
      {"epochs", c.pretrain.epochs},
      {"learning_rate", c.pretrain.learning_rate},
      {"seed", c.pretrain.seed},
  };
  j["mil"] = {
      {"kind", mil_kind_name(c.mil.kind)},
      {"attention_dim", c.mil.attention_dim},
      {"num_pseudo_bags", c.mil.num_pseudo_bags},
      {"classifier_widths", c.mil.classifier_widths},
      {"epochs", c.mil_train.epochs},
      {"learning_rate", c.mil_train.learning_rate},
      {"seed", c.mil_train.seed},
  };
  return j;
}

/// FNV-1a over the canonical (sorted-key) JSON dump of the resolved config.
/// out_dir is excluded: artifacts are byte-identical wherever they are written.
inline std::string config_hash(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("out_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io, "cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::config, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace wsc
