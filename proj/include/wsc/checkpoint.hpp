#pragma once

#include <cstdint>
#include <cstring>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wsc/encoder.hpp"
#include "wsc/error.hpp"
#include "wsc/feature_store.hpp"
#include "wsc/milmodels.hpp"
#include "wsc/pretrain.hpp"
#include "wsc/tensor.hpp"

namespace wsc {

// Checkpoint file, little-endian:
//   magic "WSCK", version u8 = 1,
//   u32 length-prefixed UTF-8 JSON header (architecture, seed, epoch,
//   tensor name/shape manifest in order, config hash),
//   then each tensor's float32 values in manifest order.

inline constexpr char kCheckpointMagic[4] = {'W', 'S', 'C', 'K'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  nlohmann::json header = ck.header;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, t] : ck.tensors)
    manifest.push_back({{"name", name}, {"shape", t.shape}});
  header["tensors"] = manifest;

  std::string out;
  out.append(kCheckpointMagic, 4);
  detail::put_u8(out, kCheckpointVersion);
  const std::string hdr = header.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(hdr.size()));
  out.append(hdr);
  for (const auto& [name, t] : ck.tensors)
    for (double x : t.v) detail::put_f32(out, static_cast<float>(x));
  detail::write_file_bytes(path, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes, "checkpoint");
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    fail(errc::bad_format, "checkpoint: bad magic at byte offset 0");
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion)
    fail(errc::bad_format, "checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t hdr_len = r.u32();
  r.need(hdr_len, "JSON header");
  std::string hdr(bytes.data() + r.offset(), hdr_len);

  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(hdr);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::bad_format, std::string("checkpoint: header is not valid JSON: ") + e.what());
  }
  detail::ByteReader blob(bytes, "checkpoint");
  blob.raw(magic, 4, "magic");
  blob.u8();
  blob.u32();
  blob.raw(hdr.data(), hdr_len, "JSON header");

  static const char* known[] = {"arch", "seed", "epoch", "loss_mode", "config_hash", "tensors"};
  for (auto it = ck.header.begin(); it != ck.header.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || (it.key() == k);
    if (!ok)
      std::cerr << "warning: checkpoint header has unknown field '" << it.key()
                << "' (accepted)\n";
  }
  if (!ck.header.contains("tensors") || !ck.header["tensors"].is_array())
    fail(errc::bad_format, "checkpoint: header missing tensor manifest");

  std::size_t total = 0;
  for (const auto& entry : ck.header["tensors"]) {
    if (!entry.contains("name") || !entry.contains("shape"))
      fail(errc::bad_format, "checkpoint: malformed tensor manifest entry");
    std::size_t numel = 1;
    for (std::size_t d : entry["shape"].get<std::vector<std::size_t>>()) numel *= d;
    total += numel;
  }
  if (blob.remaining() != total * 4)
    fail(errc::bad_format, "checkpoint: manifest/blob length mismatch: manifest wants " +
                               std::to_string(total * 4) + " bytes, file has " +
                               std::to_string(blob.remaining()));

  for (const auto& entry : ck.header["tensors"]) {
    const auto shape = entry["shape"].get<std::vector<std::size_t>>();
    std::size_t numel = 1;
    for (std::size_t d : shape) numel *= d;
    std::vector<double> vals(numel);
    for (double& x : vals) x = static_cast<double>(blob.f32());
    ck.tensors.emplace_back(entry["name"].get<std::string>(), Tensor(shape, std::move(vals)));
  }
  return ck;
}

namespace detail {

inline const Tensor& find_tensor(const Checkpoint& ck, const std::string& name) {
  for (const auto& [n, t] : ck.tensors)
    if (n == name) return t;
  fail(errc::bad_format, "checkpoint: missing tensor '" + name + "'");
}

inline void append_mlp(Checkpoint& ck, const std::string& prefix, const MlpParams& p) {
  for (std::size_t l = 0; l < p.layers(); ++l) {
    ck.tensors.emplace_back(prefix + "." + std::to_string(l) + ".w", p.w[l]);
    ck.tensors.emplace_back(prefix + "." + std::to_string(l) + ".b", p.b[l]);
  }
}

inline MlpParams read_mlp(const Checkpoint& ck, const std::string& prefix, std::size_t layers) {
  MlpParams p;
  for (std::size_t l = 0; l < layers; ++l) {
    p.w.push_back(find_tensor(ck, prefix + "." + std::to_string(l) + ".w"));
    p.b.push_back(find_tensor(ck, prefix + "." + std::to_string(l) + ".b"));
  }
  return p;
}

inline void append_attention(Checkpoint& ck, const std::string& prefix,
                             const GatedAttentionParams& p) {
  ck.tensors.emplace_back(prefix + ".V", p.V);
  ck.tensors.emplace_back(prefix + ".U", p.U);
  ck.tensors.emplace_back(prefix + ".w", p.w);
}

inline GatedAttentionParams read_attention(const Checkpoint& ck, const std::string& prefix) {
  GatedAttentionParams p;
  p.V = find_tensor(ck, prefix + ".V");
  p.U = find_tensor(ck, prefix + ".U");
  p.w = find_tensor(ck, prefix + ".w");
  return p;
}

inline void warn_config_hash(const Checkpoint& ck, const std::string& expected_hash) {
  if (expected_hash.empty() || !ck.header.contains("config_hash")) return;
  const std::string have = ck.header["config_hash"].get<std::string>();
  if (have != expected_hash)
    std::cerr << "warning: checkpoint config hash " << have << " differs from current config "
              << expected_hash << "\n";
}

}  // namespace detail

struct EncoderCheckpoint {
  EncoderSpec encoder_spec;
  ProjectionSpec projection_spec;
  MlpParams encoder;
  MlpParams projection;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string loss_mode;
};

inline Checkpoint make_encoder_checkpoint(const PretrainResult& r, const PretrainConfig& cfg,
                                          const std::string& config_hash) {
  Checkpoint ck;
  ck.header["arch"] = {
      {"type", "encoder"},
      {"layer_widths", r.encoder_spec.layer_widths},
      {"activation", activation_name(r.encoder_spec.activation)},
      {"projection_hidden", r.projection_spec.hidden_width},
      {"projection_output", r.projection_spec.output_width},
  };
  ck.header["seed"] = cfg.seed;
  ck.header["epoch"] = cfg.epochs;
  ck.header["loss_mode"] = pretrain_mode_name(cfg.mode);
  ck.header["config_hash"] = config_hash;
  detail::append_mlp(ck, "enc", r.encoder);
  detail::append_mlp(ck, "proj", r.projection);
  return ck;
}

inline EncoderCheckpoint load_encoder_checkpoint(const std::string& path,
                                                 const std::string& expected_hash = "") {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.header.contains("arch") || ck.header["arch"].value("type", "") != "encoder")
    fail(errc::bad_format, "checkpoint: '" + path + "' is not an encoder checkpoint");
  detail::warn_config_hash(ck, expected_hash);
  const nlohmann::json& arch = ck.header["arch"];
  EncoderCheckpoint out;
  out.encoder_spec.layer_widths = arch["layer_widths"].get<std::vector<std::size_t>>();
  out.encoder_spec.activation = activation_from_name(arch["activation"].get<std::string>());
  out.projection_spec.hidden_width = arch["projection_hidden"].get<std::size_t>();
  out.projection_spec.output_width = arch["projection_output"].get<std::size_t>();
  out.encoder_spec.validate();
  out.projection_spec.validate();
  out.seed = ck.header.value("seed", std::uint64_t{0});
  out.epoch = ck.header.value("epoch", std::size_t{0});
  out.loss_mode = ck.header.value("loss_mode", "");
  out.encoder = detail::read_mlp(ck, "enc", out.encoder_spec.layer_widths.size() - 1);
  out.projection = detail::read_mlp(ck, "proj", 2);
  for (std::size_t l = 0; l + 1 < out.encoder_spec.layer_widths.size(); ++l) {
    if (out.encoder.w[l].rows() != out.encoder_spec.layer_widths[l] ||
        out.encoder.w[l].cols() != out.encoder_spec.layer_widths[l + 1])
      fail(errc::bad_format, "checkpoint: encoder layer " + std::to_string(l) +
                                 " shape disagrees with declared architecture");
  }
  return out;
}

struct MilCheckpoint {
  MILModelSpec spec;
  MilParams params;
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
};

inline Checkpoint make_mil_checkpoint(const MilTrainResult& r, std::uint64_t seed,
                                      const std::string& config_hash) {
  Checkpoint ck;
  ck.header["arch"] = {
      {"type", "mil"},
      {"kind", mil_kind_name(r.spec.kind)},
      {"input_dim", r.spec.input_dim},
      {"attention_dim", r.spec.attention_dim},
      {"num_pseudo_bags", r.spec.num_pseudo_bags},
      {"classifier_widths", r.spec.classifier_widths},
  };
  ck.header["seed"] = seed;
  ck.header["epoch"] = r.best_epoch;
  ck.header["loss_mode"] = "bce";
  ck.header["config_hash"] = config_hash;
  const MILModelSpec& s = r.spec;
  const MilParams& p = r.params;
  switch (s.kind) {
    case MilKind::mean:
    case MilKind::max:
      detail::append_mlp(ck, "cls1", p.cls1);
      break;
    case MilKind::abmil:
      detail::append_attention(ck, "att1", p.att1);
      detail::append_mlp(ck, "cls1", p.cls1);
      break;
    case MilKind::dtfd:
      detail::append_attention(ck, "att1", p.att1);
      detail::append_mlp(ck, "cls1", p.cls1);
      detail::append_attention(ck, "att2", p.att2);
      detail::append_mlp(ck, "cls2", p.cls2);
      break;
  }
  return ck;
}

inline MilCheckpoint load_mil_checkpoint(const std::string& path,
                                         const std::string& expected_hash = "") {
  Checkpoint ck = load_checkpoint(path);
  if (!ck.header.contains("arch") || ck.header["arch"].value("type", "") != "mil")
    fail(errc::bad_format, "checkpoint: '" + path + "' is not a MIL checkpoint");
  detail::warn_config_hash(ck, expected_hash);
  const nlohmann::json& arch = ck.header["arch"];
  MilCheckpoint out;
  out.spec.kind = mil_kind_from_name(arch["kind"].get<std::string>());
  out.spec.input_dim = arch["input_dim"].get<std::size_t>();
  out.spec.attention_dim = arch["attention_dim"].get<std::size_t>();
  out.spec.num_pseudo_bags = arch["num_pseudo_bags"].get<std::size_t>();
  out.spec.classifier_widths = arch["classifier_widths"].get<std::vector<std::size_t>>();
  out.spec.validate();
  out.seed = ck.header.value("seed", std::uint64_t{0});
  out.best_epoch = ck.header.value("epoch", std::size_t{0});
  const std::size_t cls_layers = out.spec.classifier_widths.size() + 1;
  switch (out.spec.kind) {
    case MilKind::mean:
    case MilKind::max:
      out.params.cls1 = detail::read_mlp(ck, "cls1", cls_layers);
      break;
    case MilKind::abmil:
      out.params.att1 = detail::read_attention(ck, "att1");
      out.params.cls1 = detail::read_mlp(ck, "cls1", cls_layers);
      break;
    case MilKind::dtfd:
      out.params.att1 = detail::read_attention(ck, "att1");
      out.params.cls1 = detail::read_mlp(ck, "cls1", cls_layers);
      out.params.att2 = detail::read_attention(ck, "att2");
      out.params.cls2 = detail::read_mlp(ck, "cls2", cls_layers);
      break;
  }
  if (out.params.cls1.w.front().rows() != out.spec.input_dim)
    fail(errc::bad_format, "checkpoint: classifier input width disagrees with input_dim");
  return out;
}

}  // namespace wsc
