#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/tensor.hpp"

namespace wsc {

/// Handle to a node on a Graph tape.
struct Value {
  std::size_t idx = static_cast<std::size_t>(-1);
  bool valid() const { return idx != static_cast<std::size_t>(-1); }
};

/// Reverse-mode autodiff over a define-by-run tape. Forward values are
/// computed eagerly as nodes are built, so creation order is a topological
/// order; backward() walks the tape once in reverse.
///
/// All reductions run in fixed left-to-right order: repeated runs over the
/// same inputs are bit-identical.
class Graph {
  enum class Op {
    leaf,
    matmul,
    transpose,
    add,
    add_rowvec,
    sub_colvec,
    mul,
    scale,
    tanh_fn,
    sigmoid_fn,
    relu_fn,
    exp_fn,
    log_fn,
    l2norm_rows,
    lse_rows,
    sum_rows,
    mean_rows,
    sum_all,
    mean_all,
    softmax_flat,
    max_flat,
    gather_rows,
    concat_rows,
    bce_logit,
    info_nce,
  };

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  struct Node {
    Op op;
    Tensor val;
    Tensor grad;                     // allocated lazily by backward()
    std::size_t a = npos, b = npos;  // parents
    std::vector<std::size_t> many;   // gather indices / concat parents
    double c = 0.0;                  // scale factor / bce target
    std::vector<double> aux;         // per-row norms, argmax, cached maxima
    bool trainable = false;
  };

 public:
  Value input(Tensor t) { return push(Op::leaf, std::move(t), npos, npos, false); }
  Value param(Tensor t) { return push(Op::leaf, std::move(t), npos, npos, true); }

  Value matmul(Value a, Value b) {
    const Tensor &A = val(a), &B = val(b);
    if (A.cols() != B.rows())
      fail(errc::shape_mismatch, "matmul: " + A.shape_str() + " x " + B.shape_str());
    Tensor C = Tensor::zeros(A.rows(), B.cols());
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A.v[i * k + p];
        if (aip == 0.0) continue;
        const double* brow = &B.v[p * m];
        double* crow = &C.v[i * m];
        for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
      }
    return push(Op::matmul, std::move(C), a.idx, b.idx);
  }

  Value transpose(Value a) {
    const Tensor& A = val(a);
    Tensor C = Tensor::zeros(A.cols(), A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C.at(j, i) = A.at(i, j);
    return push(Op::transpose, std::move(C), a.idx);
  }

  Value add(Value a, Value b) {
    const Tensor &A = val(a), &B = val(b);
    if (!A.same_shape(B))
      fail(errc::shape_mismatch, "add: " + A.shape_str() + " vs " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < C.numel(); ++i) C.v[i] += B.v[i];
    return push(Op::add, std::move(C), a.idx, b.idx);
  }

  /// a (n x m) + row vector (1 x m) broadcast over rows.
  Value add_rowvec(Value a, Value r) {
    const Tensor &A = val(a), &R = val(r);
    if (R.rows() != 1 || R.cols() != A.cols())
      fail(errc::shape_mismatch, "add_rowvec: " + A.shape_str() + " vs " + R.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C.at(i, j) += R.v[j];
    return push(Op::add_rowvec, std::move(C), a.idx, r.idx);
  }

  /// a (n x m) - column vector (n x 1) broadcast over columns.
  Value sub_colvec(Value a, Value c) {
    const Tensor &A = val(a), &Cv = val(c);
    if (Cv.cols() != 1 || Cv.rows() != A.rows())
      fail(errc::shape_mismatch, "sub_colvec: " + A.shape_str() + " vs " + Cv.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C.at(i, j) -= Cv.v[i];
    return push(Op::sub_colvec, std::move(C), a.idx, c.idx);
  }

  Value mul(Value a, Value b) {
    const Tensor &A = val(a), &B = val(b);
    if (!A.same_shape(B))
      fail(errc::shape_mismatch, "mul: " + A.shape_str() + " vs " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < C.numel(); ++i) C.v[i] *= B.v[i];
    return push(Op::mul, std::move(C), a.idx, b.idx);
  }

  Value scale(Value a, double s) {
    Tensor C = val(a);
    for (double& x : C.v) x *= s;
    Value out = push(Op::scale, std::move(C), a.idx);
    nodes_[out.idx].c = s;
    return out;
  }

  Value tanh_fn(Value a) {
    Tensor C = val(a);
    for (double& x : C.v) x = std::tanh(x);
    return push(Op::tanh_fn, std::move(C), a.idx);
  }

  Value sigmoid_fn(Value a) {
    Tensor C = val(a);
    for (double& x : C.v) x = stable_sigmoid(x);
    return push(Op::sigmoid_fn, std::move(C), a.idx);
  }

  Value relu_fn(Value a) {
    Tensor C = val(a);
    for (double& x : C.v) x = x > 0.0 ? x : 0.0;
    return push(Op::relu_fn, std::move(C), a.idx);
  }

  Value exp_fn(Value a) {
    Tensor C = val(a);
    for (double& x : C.v) {
      x = std::exp(x);
      if (!std::isfinite(x)) fail(errc::domain, "exp: overflow to non-finite value");
    }
    return push(Op::exp_fn, std::move(C), a.idx);
  }

  Value log_fn(Value a) {
    Tensor C = val(a);
    for (std::size_t i = 0; i < C.numel(); ++i) {
      if (C.v[i] <= 0.0)
        fail(errc::domain, "log: non-positive input at index " + std::to_string(i));
      C.v[i] = std::log(C.v[i]);
    }
    return push(Op::log_fn, std::move(C), a.idx);
  }

  /// Row-wise L2 normalization. Errors on rows with norm <= 1e-12.
  Value l2norm_rows(Value a) {
    const Tensor& A = val(a);
    Tensor C = A;
    std::vector<double> norms(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) s += A.at(i, j) * A.at(i, j);
      double nrm = std::sqrt(s);
      if (nrm <= 1e-12)
        fail(errc::zero_norm, "l2_normalize: zero-norm row " + std::to_string(i));
      norms[i] = nrm;
      for (std::size_t j = 0; j < A.cols(); ++j) C.at(i, j) /= nrm;
    }
    Value out = push(Op::l2norm_rows, std::move(C), a.idx);
    nodes_[out.idx].aux = std::move(norms);
    return out;
  }

  /// Row-wise log-sum-exp with the max-shift trick (n x m -> n x 1).
  Value lse_rows(Value a) {
    const Tensor& A = val(a);
    Tensor C = Tensor::zeros(A.rows(), 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double mx = A.at(i, 0);
      for (std::size_t j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
      double s = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) s += std::exp(A.at(i, j) - mx);
      C.v[i] = mx + std::log(s);
    }
    return push(Op::lse_rows, std::move(C), a.idx);
  }

  Value sum_rows(Value a) {
    const Tensor& A = val(a);
    Tensor C = Tensor::zeros(A.rows(), 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) s += A.at(i, j);
      C.v[i] = s;
    }
    return push(Op::sum_rows, std::move(C), a.idx);
  }

  /// Column means (n x m -> 1 x m).
  Value mean_rows(Value a) {
    const Tensor& A = val(a);
    Tensor C = Tensor::zeros(1, A.cols());
    for (std::size_t j = 0; j < A.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < A.rows(); ++i) s += A.at(i, j);
      C.v[j] = s / static_cast<double>(A.rows());
    }
    return push(Op::mean_rows, std::move(C), a.idx);
  }

  Value sum_all(Value a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (double x : A.v) s += x;
    return push(Op::sum_all, Tensor::scalar(s), a.idx);
  }

  Value mean_all(Value a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (double x : A.v) s += x;
    return push(Op::mean_all, Tensor::scalar(s / static_cast<double>(A.numel())), a.idx);
  }

  /// Softmax over all entries, shape preserved.
  Value softmax_flat(Value a) {
    const Tensor& A = val(a);
    Tensor C = A;
    double mx = A.v[0];
    for (double x : A.v) mx = std::max(mx, x);
    double s = 0.0;
    for (std::size_t i = 0; i < C.numel(); ++i) {
      C.v[i] = std::exp(A.v[i] - mx);
      s += C.v[i];
    }
    for (double& x : C.v) x /= s;
    return push(Op::softmax_flat, std::move(C), a.idx);
  }

  /// Max over all entries; ties resolved to the lowest flat index, and the
  /// gradient flows only to that entry.
  Value max_flat(Value a) {
    const Tensor& A = val(a);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < A.numel(); ++i)
      if (A.v[i] > A.v[arg]) arg = i;
    Value out = push(Op::max_flat, Tensor::scalar(A.v[arg]), a.idx);
    nodes_[out.idx].aux = {static_cast<double>(arg)};
    return out;
  }

  Value gather_rows(Value a, std::vector<std::size_t> idx) {
    const Tensor& A = val(a);
    Tensor C = Tensor::zeros(idx.size(), A.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] >= A.rows())
        fail(errc::invalid_argument, "gather_rows: index " + std::to_string(idx[r]) +
                                         " out of range for " + A.shape_str());
      for (std::size_t j = 0; j < A.cols(); ++j) C.at(r, j) = A.at(idx[r], j);
    }
    Value out = push(Op::gather_rows, std::move(C), a.idx);
    nodes_[out.idx].many = std::move(idx);
    return out;
  }

  Value concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) fail(errc::invalid_argument, "concat_rows: empty part list");
    std::size_t rows = 0, cols = val(parts[0]).cols();
    for (Value p : parts) {
      if (val(p).cols() != cols)
        fail(errc::shape_mismatch, "concat_rows: column mismatch " + val(p).shape_str());
      rows += val(p).rows();
    }
    Tensor C = Tensor::zeros(rows, cols);
    std::size_t r = 0;
    for (Value p : parts) {
      const Tensor& P = val(p);
      std::copy(P.v.begin(), P.v.end(), C.v.begin() + static_cast<std::ptrdiff_t>(r * cols));
      r += P.rows();
    }
    Value out = push(Op::concat_rows, std::move(C), npos, npos);
    for (Value p : parts) nodes_[out.idx].many.push_back(p.idx);
    return out;
  }

  /// Fused contrastive cross-entropy over one similarity block:
  ///   loss = sum_ij W_ij * ( lse_{k != i}(S_ik) - S_ij ),  S = z z^T / tau,
  /// with a per-row max-shifted log-sum-exp that always excludes the diagonal.
  /// Equivalent to composing matmul/mask/lse/mul/sum but stores only S, which
  /// matters at contrastive batch sizes.
  Value info_nce(Value z, const Tensor& weights, double tau) {
    const Tensor& Z = val(z);
    const std::size_t n = Z.rows(), d = Z.cols();
    if (n < 2) fail(errc::invalid_argument, "info_nce: need at least 2 rows");
    if (weights.rows() != n || weights.cols() != n)
      fail(errc::shape_mismatch,
           "info_nce: weights " + weights.shape_str() + " vs features " + Z.shape_str());
    for (std::size_t i = 0; i < n; ++i)
      if (weights.at(i, i) != 0.0)
        fail(errc::invalid_argument,
             "info_nce: weights must have a zero diagonal (row " + std::to_string(i) + ")");

    std::vector<double> sims(n * n, 0.0);  // S, kept for the backward pass
    const double inv_tau = 1.0 / tau;
    for (std::size_t i = 0; i < n; ++i) {
      const double* zi = &Z.v[i * d];
      for (std::size_t j = 0; j < n; ++j) {
        const double* zj = &Z.v[j * d];
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) s += zi[c] * zj[c];
        sims[i * n + j] = s * inv_tau;
      }
    }
    std::vector<double> lse(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) mx = std::max(mx, sims[i * n + j]);
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) acc += std::exp(sims[i * n + j] - mx);
      lse[i] = mx + std::log(acc);
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double w = weights.v[i * n + j];
        if (w != 0.0) loss += w * (lse[i] - sims[i * n + j]);
      }

    Value out = push(Op::info_nce, Tensor::scalar(loss), z.idx);
    Node& node = nodes_[out.idx];
    node.c = tau;
    node.aux = std::move(sims);
    node.aux.insert(node.aux.end(), lse.begin(), lse.end());
    node.aux.insert(node.aux.end(), weights.v.begin(), weights.v.end());
    return out;
  }

  /// Numerically stable binary cross-entropy from a scalar logit:
  /// softplus(l) - target * l. Backward is sigmoid(l) - target.
  Value bce_logit(Value logit, double target) {
    const Tensor& L = val(logit);
    if (!L.is_scalar()) fail(errc::shape_mismatch, "bce_logit: logit must be scalar");
    double l = L.v[0];
    double sp = std::max(l, 0.0) + std::log1p(std::exp(-std::fabs(l)));
    Value out = push(Op::bce_logit, Tensor::scalar(sp - target * l), logit.idx);
    nodes_[out.idx].c = target;
    return out;
  }

  const Tensor& val(Value v) const { return nodes_.at(v.idx).val; }
  const Tensor& grad(Value v) const {
    const Node& n = nodes_.at(v.idx);
    if (n.grad.numel() == 0) fail(errc::invalid_argument, "grad: backward() has not reached node");
    return n.grad;
  }
  /// Gradient, treating never-touched nodes as zero.
  Tensor grad_or_zero(Value v) const {
    const Node& n = nodes_.at(v.idx);
    if (n.grad.numel() == 0) return Tensor(n.val.shape, std::vector<double>(n.val.numel(), 0.0));
    return n.grad;
  }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse pass from a scalar loss. Visits each node at most once, in
  /// reverse creation order; leaves untouched by the loss keep zero grads.
  void backward(Value loss) {
    if (!loss.valid() || loss.idx >= nodes_.size())
      fail(errc::invalid_argument, "backward: invalid loss node");
    if (!nodes_[loss.idx].val.is_scalar())
      fail(errc::invalid_argument,
           "backward: loss must be scalar, got " + nodes_[loss.idx].val.shape_str());
    for (std::size_t i = 0; i <= loss.idx; ++i)
      nodes_[i].grad = Tensor(nodes_[i].val.shape,
                              std::vector<double>(nodes_[i].val.numel(), 0.0));
    nodes_[loss.idx].grad.v[0] = 1.0;
    for (std::size_t i = loss.idx + 1; i-- > 0;) propagate(i);
  }

 private:
  static double stable_sigmoid(double x) {
    if (x >= 0.0) {
      double e = std::exp(-x);
      return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
  }

  Value push(Op op, Tensor t, std::size_t a = npos, std::size_t b = npos, bool trainable = false) {
    Node n;
    n.op = op;
    n.val = std::move(t);
    n.a = a;
    n.b = b;
    n.trainable = trainable;
    nodes_.push_back(std::move(n));
    return Value{nodes_.size() - 1};
  }

  Tensor& g(std::size_t i) { return nodes_[i].grad; }

  void propagate(std::size_t i) {
    Node& n = nodes_[i];
    const Tensor& G = n.grad;
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::matmul: {
        const Tensor &A = nodes_[n.a].val, &B = nodes_[n.b].val;
        Tensor &dA = g(n.a), &dB = g(n.b);
        const std::size_t nr = A.rows(), k = A.cols(), m = B.cols();
        // dA = G . B^T: row-dot-row, both contiguous
        for (std::size_t i2 = 0; i2 < nr; ++i2) {
          const double* grow = &G.v[i2 * m];
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = &B.v[p * m];
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
            dA.v[i2 * k + p] += s;
          }
        }
        // dB = A^T . G: axpy rows of G into rows of dB
        for (std::size_t i2 = 0; i2 < nr; ++i2) {
          const double* grow = &G.v[i2 * m];
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A.v[i2 * k + p];
            if (aip == 0.0) continue;
            double* dbrow = &dB.v[p * m];
            for (std::size_t j = 0; j < m; ++j) dbrow[j] += aip * grow[j];
          }
        }
        break;
      }
      case Op::transpose: {
        Tensor& dA = g(n.a);
        for (std::size_t r = 0; r < n.val.rows(); ++r)
          for (std::size_t c = 0; c < n.val.cols(); ++c) dA.at(c, r) += G.at(r, c);
        break;
      }
      case Op::add: {
        Tensor &dA = g(n.a), &dB = g(n.b);
        for (std::size_t j = 0; j < G.numel(); ++j) {
          dA.v[j] += G.v[j];
          dB.v[j] += G.v[j];
        }
        break;
      }
      case Op::add_rowvec: {
        Tensor &dA = g(n.a), &dR = g(n.b);
        const std::size_t rws = n.val.rows(), cls = n.val.cols();
        for (std::size_t r = 0; r < rws; ++r)
          for (std::size_t c = 0; c < cls; ++c) {
            dA.at(r, c) += G.at(r, c);
            dR.v[c] += G.at(r, c);
          }
        break;
      }
      case Op::sub_colvec: {
        Tensor &dA = g(n.a), &dC = g(n.b);
        for (std::size_t r = 0; r < n.val.rows(); ++r)
          for (std::size_t c = 0; c < n.val.cols(); ++c) {
            dA.at(r, c) += G.at(r, c);
            dC.v[r] -= G.at(r, c);
          }
        break;
      }
      case Op::mul: {
        const Tensor &A = nodes_[n.a].val, &B = nodes_[n.b].val;
        Tensor &dA = g(n.a), &dB = g(n.b);
        for (std::size_t j = 0; j < G.numel(); ++j) {
          dA.v[j] += G.v[j] * B.v[j];
          dB.v[j] += G.v[j] * A.v[j];
        }
        break;
      }
      case Op::scale: {
        Tensor& dA = g(n.a);
        for (std::size_t j = 0; j < G.numel(); ++j) dA.v[j] += n.c * G.v[j];
        break;
      }
      case Op::tanh_fn: {
        Tensor& dA = g(n.a);
        for (std::size_t j = 0; j < G.numel(); ++j)
          dA.v[j] += G.v[j] * (1.0 - n.val.v[j] * n.val.v[j]);
        break;
      }
      case Op::sigmoid_fn: {
        Tensor& dA = g(n.a);
        for (std::size_t j = 0; j < G.numel(); ++j)
          dA.v[j] += G.v[j] * n.val.v[j] * (1.0 - n.val.v[j]);
        break;
      }
      case Op::relu_fn: {
        const Tensor& A = nodes_[n.a].val;
        Tensor& dA = g(n.a);
        for (std::size_t j = 0; j < G.numel(); ++j)
          if (A.v[j] > 0.0) dA.v[j] += G.v[j];
        break;
      }
      case Op::exp_fn: {
        Tensor& dA = g(n.a);
        for (std::size_t j = 0; j < G.numel(); ++j) dA.v[j] += G.v[j] * n.val.v[j];
        break;
      }
      case Op::log_fn: {
        const Tensor& A = nodes_[n.a].val;
        Tensor& dA = g(n.a);
        for (std::size_t j = 0; j < G.numel(); ++j) dA.v[j] += G.v[j] / A.v[j];
        break;
      }
      case Op::l2norm_rows: {
        const Tensor& Y = n.val;
        Tensor& dA = g(n.a);
        for (std::size_t r = 0; r < Y.rows(); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < Y.cols(); ++c) dot += G.at(r, c) * Y.at(r, c);
          const double inv = 1.0 / n.aux[r];
          for (std::size_t c = 0; c < Y.cols(); ++c)
            dA.at(r, c) += (G.at(r, c) - dot * Y.at(r, c)) * inv;
        }
        break;
      }
      case Op::lse_rows: {
        const Tensor& A = nodes_[n.a].val;
        Tensor& dA = g(n.a);
        for (std::size_t r = 0; r < A.rows(); ++r) {
          const double gr = G.v[r];
          if (gr == 0.0) continue;
          for (std::size_t c = 0; c < A.cols(); ++c)
            dA.at(r, c) += gr * std::exp(A.at(r, c) - n.val.v[r]);
        }
        break;
      }
      case Op::sum_rows: {
        Tensor& dA = g(n.a);
        for (std::size_t r = 0; r < dA.rows(); ++r)
          for (std::size_t c = 0; c < dA.cols(); ++c) dA.at(r, c) += G.v[r];
        break;
      }
      case Op::mean_rows: {
        Tensor& dA = g(n.a);
        const double inv = 1.0 / static_cast<double>(dA.rows());
        for (std::size_t r = 0; r < dA.rows(); ++r)
          for (std::size_t c = 0; c < dA.cols(); ++c) dA.at(r, c) += G.v[c] * inv;
        break;
      }
      case Op::sum_all: {
        Tensor& dA = g(n.a);
        for (double& x : dA.v) x += G.v[0];
        break;
      }
      case Op::mean_all: {
        Tensor& dA = g(n.a);
        const double inv = G.v[0] / static_cast<double>(dA.numel());
        for (double& x : dA.v) x += inv;
        break;
      }
      case Op::softmax_flat: {
        const Tensor& Y = n.val;
        Tensor& dA = g(n.a);
        double dot = 0.0;
        for (std::size_t j = 0; j < Y.numel(); ++j) dot += G.v[j] * Y.v[j];
        for (std::size_t j = 0; j < Y.numel(); ++j) dA.v[j] += Y.v[j] * (G.v[j] - dot);
        break;
      }
      case Op::max_flat: {
        Tensor& dA = g(n.a);
        dA.v[static_cast<std::size_t>(n.aux[0])] += G.v[0];
        break;
      }
      case Op::gather_rows: {
        Tensor& dA = g(n.a);
        for (std::size_t r = 0; r < n.many.size(); ++r)
          for (std::size_t c = 0; c < n.val.cols(); ++c)
            dA.at(n.many[r], c) += G.at(r, c);
        break;
      }
      case Op::concat_rows: {
        std::size_t r0 = 0;
        for (std::size_t p : n.many) {
          Tensor& dP = g(p);
          for (std::size_t r = 0; r < dP.rows(); ++r)
            for (std::size_t c = 0; c < dP.cols(); ++c) dP.at(r, c) += G.at(r0 + r, c);
          r0 += dP.rows();
        }
        break;
      }
      case Op::bce_logit: {
        const double l = nodes_[n.a].val.v[0];
        g(n.a).v[0] += G.v[0] * (stable_sigmoid(l) - n.c);
        break;
      }
      case Op::info_nce: {
        const Tensor& Z = nodes_[n.a].val;
        Tensor& dZ = g(n.a);
        const std::size_t nn = Z.rows(), d = Z.cols();
        const double* sims = n.aux.data();
        const double* lse = sims + nn * nn;
        const double* W = lse + nn;
        const double gout = G.v[0];
        if (gout == 0.0) break;
        // dS_ij = g * (R_i * softmax_ij - W_ij) off the diagonal, R_i = sum_j W_ij
        std::vector<double> dS(nn * nn, 0.0);
        for (std::size_t i = 0; i < nn; ++i) {
          double row_w = 0.0;
          for (std::size_t j = 0; j < nn; ++j) row_w += W[i * nn + j];
          for (std::size_t j = 0; j < nn; ++j) {
            if (j == i) continue;
            const double soft = std::exp(sims[i * nn + j] - lse[i]);
            dS[i * nn + j] = gout * (row_w * soft - W[i * nn + j]);
          }
        }
        // dZ = (dS + dS^T) Z / tau
        const double inv_tau = 1.0 / n.c;
        for (std::size_t i = 0; i < nn; ++i) {
          double* drow = &dZ.v[i * d];
          for (std::size_t j = 0; j < nn; ++j) {
            const double coeff = (dS[i * nn + j] + dS[j * nn + i]) * inv_tau;
            if (coeff == 0.0) continue;
            const double* zrow = &Z.v[j * d];
            for (std::size_t c = 0; c < d; ++c) drow[c] += coeff * zrow[c];
          }
        }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

/// A trainable tensor bound into a graph for one forward/backward pass.
struct ParamBinding {
  Tensor* tensor;
  Value node;
};

inline void sgd_step(const Graph& graph, const std::vector<ParamBinding>& params,
                     double learning_rate) {
  for (const ParamBinding& p : params) {
    Tensor grd = graph.grad_or_zero(p.node);
    for (std::size_t i = 0; i < p.tensor->numel(); ++i)
      p.tensor->v[i] -= learning_rate * grd.v[i];
  }
}

/// Scalar function of one tensor, expressed as a graph builder so the
/// analytic gradient can be read off the same tape.
using ScalarFn = std::function<Value(Graph&, Value)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
inline double finite_diff_check(const ScalarFn& f, const Tensor& x, double h) {
  if (!(h >= 1e-7 && h <= 1e-3))
    fail(errc::invalid_argument, "finite_diff_check: step h outside [1e-7, 1e-3]");
  Graph g;
  Value xv = g.param(x);
  Value loss = f(g, xv);
  if (!g.val(loss).is_scalar())
    fail(errc::invalid_argument, "finite_diff_check: f must produce a scalar");
  g.backward(loss);
  const Tensor analytic = g.grad(xv);

  auto eval = [&](const Tensor& pt) {
    Graph fg;
    Value pv = fg.input(pt);
    return fg.val(f(fg, pv)).v[0];
  };

  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    Tensor xp = x, xm = x;
    xp.v[i] += h;
    xm.v[i] -= h;
    const double fp = eval(xp), fm = eval(xm);
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(errc::domain, "finite_diff_check: non-finite value at coordinate " + std::to_string(i));
    const double central = (fp - fm) / (2.0 * h);
    const double rel = std::fabs(analytic.v[i] - central) /
                       std::max(1.0, std::fabs(analytic.v[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace wsc
