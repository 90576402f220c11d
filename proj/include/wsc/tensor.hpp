#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "wsc/error.hpp"

namespace wsc {

/// Dense row-major array of 64-bit floats. Everything in this codebase is
/// rank-2 (scalars are 1x1); the shape vector stays generic so file formats
/// can carry other ranks.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;

  Tensor(std::vector<std::size_t> s, std::vector<double> vals)
      : shape(std::move(s)), v(std::move(vals)) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
      if (d == 0) fail(errc::invalid_argument, "Tensor: zero dimension in shape");
      n *= d;
    }
    if (n != v.size())
      fail(errc::invalid_argument, "Tensor: shape/value size mismatch (" +
                                       std::to_string(n) + " vs " + std::to_string(v.size()) + ")");
  }

  static Tensor zeros(std::size_t r, std::size_t c) {
    return Tensor({r, c}, std::vector<double>(r * c, 0.0));
  }
  static Tensor full(std::size_t r, std::size_t c, double x) {
    return Tensor({r, c}, std::vector<double>(r * c, x));
  }
  static Tensor scalar(double x) { return Tensor({1, 1}, {x}); }
  static Tensor row(std::vector<double> vals) {
    std::size_t n = vals.size();
    return Tensor({1, n}, std::move(vals));
  }
  static Tensor col(std::vector<double> vals) {
    std::size_t n = vals.size();
    return Tensor({n, 1}, std::move(vals));
  }
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> vals) {
    return Tensor({r, c}, std::move(vals));
  }
  static Tensor identity(std::size_t n) {
    Tensor t = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) t.v[i * n + i] = 1.0;
    return t;
  }

  std::size_t numel() const { return v.size(); }
  bool is_scalar() const { return v.size() == 1; }
  bool is_matrix() const { return shape.size() == 2; }

  std::size_t rows() const {
    if (shape.size() != 2) fail(errc::shape_mismatch, "Tensor: rank-2 access on " + shape_str());
    return shape[0];
  }
  std::size_t cols() const {
    if (shape.size() != 2) fail(errc::shape_mismatch, "Tensor: rank-2 access on " + shape_str());
    return shape[1];
  }

  double& at(std::size_t r, std::size_t c) { return v[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * shape[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

}  // namespace wsc
