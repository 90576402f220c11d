#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/graph.hpp"
#include "wsc/rng.hpp"
#include "wsc/tensor.hpp"

namespace wsc {

enum class Activation { relu, tanh };

inline std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
inline Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  fail(errc::config, "unknown activation '" + s + "'");
}

/// MLP encoder: input width, one or more hidden widths, embedding width.
/// Hidden layers are activated; the embedding layer is linear.
struct EncoderSpec {
  std::vector<std::size_t> layer_widths{32, 64, 32};
  Activation activation = Activation::relu;

  void validate() const {
    if (layer_widths.size() < 3)
      fail(errc::config, "EncoderSpec: need input, at least one hidden, and embedding width");
    for (std::size_t w : layer_widths)
      if (w < 1) fail(errc::config, "EncoderSpec: widths must be >= 1");
  }
  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t embed_dim() const { return layer_widths.back(); }
};

/// Two-layer projection head (hidden relu, linear output); outputs are
/// L2-normalized before any loss sees them.
struct ProjectionSpec {
  std::size_t hidden_width = 32;
  std::size_t output_width = 16;

  void validate() const {
    if (output_width < 2) fail(errc::config, "ProjectionSpec: output_width must be >= 2");
    if (hidden_width < 1) fail(errc::config, "ProjectionSpec: hidden_width must be >= 1");
  }
};

struct AugmentationSpec {
  double noise_sigma = 0.1;  // additive Gaussian noise std-dev
  double dropout_p = 0.1;    // per-coordinate zeroing probability

  void validate() const {
    if (noise_sigma < 0.0) fail(errc::config, "AugmentationSpec: noise_sigma must be >= 0");
    if (dropout_p < 0.0 || dropout_p > 0.5)
      fail(errc::config, "AugmentationSpec: dropout_p must be in [0, 0.5]");
  }
};

/// One weight matrix (in x out) and bias row per layer.
struct MlpParams {
  std::vector<Tensor> w;
  std::vector<Tensor> b;

  std::size_t layers() const { return w.size(); }
};

/// Scaled-uniform fan-in init: weights and biases ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)). Nonzero biases keep rows with fully dead relu units away
/// from the exact zero vector that l2_normalize rejects.
inline MlpParams init_mlp(const std::vector<std::size_t>& widths, Rng& rng) {
  MlpParams p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fin = widths[l], fout = widths[l + 1];
    const double s = 1.0 / std::sqrt(static_cast<double>(fin));
    Tensor w = Tensor::zeros(fin, fout);
    for (double& x : w.v) x = (2.0 * rng.next_double() - 1.0) * s;
    Tensor b = Tensor::zeros(1, fout);
    for (double& x : b.v) x = (2.0 * rng.next_double() - 1.0) * s;
    p.w.push_back(std::move(w));
    p.b.push_back(std::move(b));
  }
  return p;
}

inline std::vector<std::size_t> projection_widths(std::size_t embed_dim, const ProjectionSpec& s) {
  return {embed_dim, s.hidden_width, s.output_width};
}

/// Graph-bound MLP parameters for one forward/backward pass.
struct BoundMlp {
  std::vector<Value> w;
  std::vector<Value> b;
};

inline BoundMlp bind_mlp(Graph& g, MlpParams& p, std::vector<ParamBinding>& bindings) {
  BoundMlp bound;
  for (std::size_t l = 0; l < p.layers(); ++l) {
    Value wv = g.param(p.w[l]);
    Value bv = g.param(p.b[l]);
    bindings.push_back({&p.w[l], wv});
    bindings.push_back({&p.b[l], bv});
    bound.w.push_back(wv);
    bound.b.push_back(bv);
  }
  return bound;
}

inline Value apply_activation(Graph& g, Value x, Activation a) {
  return a == Activation::relu ? g.relu_fn(x) : g.tanh_fn(x);
}

/// x (n x in) through the layer stack; `activate_last` controls whether the
/// final layer output is passed through the activation.
inline Value mlp_forward(Graph& g, Value x, const BoundMlp& p, Activation act,
                         bool activate_last = false) {
  Value h = x;
  for (std::size_t l = 0; l < p.w.size(); ++l) {
    h = g.add_rowvec(g.matmul(h, p.w[l]), p.b[l]);
    if (l + 1 < p.w.size() || activate_last) h = apply_activation(g, h, act);
  }
  return h;
}

struct EncodeProjectNodes {
  Value h;  // encoder embeddings, pre-projection
  Value z;  // unit-norm projected features
};

/// Encoder then projection head then row normalization. Errors with the
/// input width when shapes disagree; a zero projection output raises the
/// zero_norm error from l2_normalize.
inline EncodeProjectNodes encode_project_node(Graph& g, Value x, const EncoderSpec& spec,
                                              const BoundMlp& enc, const BoundMlp& proj) {
  if (g.val(x).cols() != spec.input_dim())
    fail(errc::shape_mismatch, "encode_project: input width " +
                                   std::to_string(g.val(x).cols()) + " != encoder input " +
                                   std::to_string(spec.input_dim()));
  Value h = mlp_forward(g, x, enc, spec.activation);
  Value p = mlp_forward(g, h, proj, Activation::relu);
  return {h, g.l2norm_rows(p)};
}

/// Forward-only convenience over plain tensors.
struct EncodeProjectResult {
  Tensor h;
  Tensor z;
};

inline EncodeProjectResult encode_project(const Tensor& x, const EncoderSpec& spec,
                                          MlpParams& enc, MlpParams& proj) {
  Graph g;
  std::vector<ParamBinding> bindings;
  Value xv = g.input(x);
  BoundMlp be = bind_mlp(g, enc, bindings);
  BoundMlp bp = bind_mlp(g, proj, bindings);
  EncodeProjectNodes n = encode_project_node(g, xv, spec, be, bp);
  return {g.val(n.h), g.val(n.z)};
}

/// Two stochastic views of one instance: dropout(x + gaussian_noise), with
/// independent draws per view. Consumption order per view is fixed: d noise
/// draws, then d dropout draws.
inline std::pair<Tensor, Tensor> augment_two_views(const Tensor& x, const AugmentationSpec& spec,
                                                   Rng& rng) {
  spec.validate();
  auto one_view = [&]() {
    Tensor out = x;
    for (double& c : out.v) c += spec.noise_sigma * rng.gaussian();
    for (double& c : out.v)
      if (rng.next_double() < spec.dropout_p) c = 0.0;
    return out;
  };
  Tensor a = one_view();
  Tensor b = one_view();
  return {std::move(a), std::move(b)};
}

}  // namespace wsc
