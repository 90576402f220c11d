#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "wsc/error.hpp"
#include "wsc/tensor.hpp"

namespace wsc {

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenpairs come
/// back sorted by descending eigenvalue; eigenvectors are the rows of `vectors`.
struct EigenResult {
  std::vector<double> values;
  Tensor vectors;  // d x d, row i is the eigenvector for values[i]
};

inline EigenResult jacobi_eigen(const Tensor& sym) {
  const std::size_t d = sym.rows();
  if (sym.cols() != d) fail(errc::shape_mismatch, "jacobi_eigen: matrix not square " + sym.shape_str());
  Tensor A = sym;
  Tensor V = Tensor::identity(d);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) s += A.at(p, q) * A.at(p, q);
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (double x : sym.v) scale = std::max(scale, std::fabs(x));
  const double tol = std::max(1e-300, 1e-14 * std::max(scale, 1.0));

  for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = A.at(p, q);
        if (std::fabs(apq) <= tol * 1e-2) continue;
        const double theta = (A.at(q, q) - A.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = A.at(k, p), akq = A.at(k, q);
          A.at(k, p) = c * akp - s * akq;
          A.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = A.at(p, k), aqk = A.at(q, k);
          A.at(p, k) = c * apk - s * aqk;
          A.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = V.at(k, p), vkq = V.at(k, q);
          V.at(k, p) = c * vkp - s * vkq;
          V.at(k, q) = s * vkp + c * vkq;
        }
      }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return A.at(a, a) > A.at(b, b); });

  EigenResult r;
  r.values.resize(d);
  r.vectors = Tensor::zeros(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    r.values[i] = A.at(order[i], order[i]);
    for (std::size_t k = 0; k < d; ++k) r.vectors.at(i, k) = V.at(k, order[i]);
  }
  return r;
}

struct PcaResult {
  Tensor components;       // 2 x d, orthonormal rows
  Tensor projected;        // n x 2, centered data onto components
  double explained[2];     // top-2 covariance eigenvalues, descending
};

/// Sign convention: the first coordinate of each component with magnitude
/// above 1e-12 is made positive.
inline void fix_sign(Tensor& components) {
  for (std::size_t r = 0; r < components.rows(); ++r) {
    double lead = 0.0;
    for (std::size_t c = 0; c < components.cols(); ++c) {
      if (std::fabs(components.at(r, c)) > 1e-12) {
        lead = components.at(r, c);
        break;
      }
    }
    if (lead < 0.0)
      for (std::size_t c = 0; c < components.cols(); ++c) components.at(r, c) = -components.at(r, c);
  }
}

/// Top-2 principal components of an n x d feature matrix via the sample
/// covariance (1/(n-1)) and a full Jacobi eigendecomposition.
inline PcaResult pca_top2(const Tensor& features) {
  const std::size_t n = features.rows(), d = features.cols();
  if (n < 2) fail(errc::invalid_argument, "pca_top2: need at least 2 rows, got " + std::to_string(n));
  if (d < 2) fail(errc::invalid_argument, "pca_top2: need at least 2 columns, got " + std::to_string(d));

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += features.at(i, j);
  for (double& m : mean) m /= static_cast<double>(n);

  Tensor cov = Tensor::zeros(d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = features.at(i, a) - mean[a];
      for (std::size_t b = a; b < d; ++b)
        cov.at(a, b) += xa * (features.at(i, b) - mean[b]);
    }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov.at(a, b) *= inv;
      cov.at(b, a) = cov.at(a, b);
    }

  EigenResult eig = jacobi_eigen(cov);

  PcaResult r;
  r.components = Tensor::zeros(2, d);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < d; ++j) r.components.at(k, j) = eig.vectors.at(k, j);
  fix_sign(r.components);
  r.explained[0] = std::max(0.0, eig.values[0]);
  r.explained[1] = std::max(0.0, eig.values[1]);

  r.projected = Tensor::zeros(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j)
        s += (features.at(i, j) - mean[j]) * r.components.at(k, j);
      r.projected.at(i, k) = s;
    }
  return r;
}

}  // namespace wsc
