#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "oracles.hpp"
#include "wsc/graph.hpp"
#include "wsc/pca.hpp"
#include "wsc/rng.hpp"
#include "wsc/tensor.hpp"

using namespace wsc;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(r, c);
  for (double& x : t.v) x = (2.0 * rng.next_double() - 1.0) * scale;
  return t;
}

}  // namespace

TEST_CASE("tensor shape/value invariant") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), Error);
  Tensor t = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(t.numel() == 4);
  CHECK(t.at(1, 0) == 3.0);
}

TEST_CASE("rng golden value for (seed 0, stream init)") {
  std::ifstream golden("tests/golden/rng_seed0_init_first_u64.txt");
  REQUIRE(golden.good());
  std::uint64_t expected;
  golden >> expected;
  Rng r = rng_stream(0, "init");
  CHECK(r.next_u64() == expected);
}

TEST_CASE("rng streams reproducible and name-separated") {
  Rng a = rng_stream(42, "init");
  Rng b = rng_stream(42, "init");
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c = rng_stream(42, "data");
  Rng d = rng_stream(42, "shuffle");
  Rng e = rng_stream(42, "augmentation");
  Rng f = rng_stream(42, "init");
  const std::uint64_t v0 = c.next_u64(), v1 = d.next_u64(), v2 = e.next_u64(), v3 = f.next_u64();
  CHECK(v0 != v1);
  CHECK(v0 != v2);
  CHECK(v0 != v3);
  CHECK(v1 != v2);
  CHECK(v1 != v3);
  CHECK(v2 != v3);
}

TEST_CASE("rng utility distributions") {
  Rng r(7);
  // below() stays in range and hits both ends eventually
  bool saw0 = false, saw9 = false;
  for (int i = 0; i < 2000; ++i) {
    const auto x = r.below(10);
    CHECK(x < 10);
    saw0 = saw0 || x == 0;
    saw9 = saw9 || x == 9;
  }
  CHECK(saw0);
  CHECK(saw9);
  // gaussian mean/var sanity
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    sum += g;
    sq += g * g;
  }
  CHECK(std::fabs(sum / n) < 0.05);
  CHECK(std::fabs(sq / n - 1.0) < 0.05);
}

TEST_CASE("matmul identity") {
  Graph g;
  Value a = g.input(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Value i2 = g.input(Tensor::identity(2));
  Value c = g.matmul(a, i2);
  CHECK(g.val(c).v == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("matmul shape error names both shapes") {
  Graph g;
  Value a = g.input(Tensor::zeros(2, 3));
  Value b = g.input(Tensor::zeros(4, 5));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), "shape_mismatch: matmul: [2x3] x [4x5]", Error);
}

TEST_CASE("l2 normalize: 3-4-5 triple and zero-norm error") {
  Graph g;
  Value v = g.l2norm_rows(g.input(Tensor::row({3, 4})));
  CHECK(g.val(v).v[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(g.val(v).v[1] == doctest::Approx(0.8).epsilon(1e-12));

  Graph g2;
  CHECK_THROWS_WITH_AS(g2.l2norm_rows(g2.input(Tensor::matrix(2, 2, {1, 1, 0, 0}))),
                       "zero_norm: l2_normalize: zero-norm row 1", Error);
}

TEST_CASE("l2 normalize rows have unit norm within 1e-12") {
  Rng rng(3);
  Graph g;
  Value v = g.l2norm_rows(g.input(random_tensor(20, 7, rng, 5.0)));
  for (std::size_t i = 0; i < 20; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 7; ++j) s += g.val(v).at(i, j) * g.val(v).at(i, j);
    CHECK(std::fabs(std::sqrt(s) - 1.0) < 1e-12);
  }
}

TEST_CASE("log_sum_exp max-shift handles large inputs") {
  Graph g;
  Value v = g.lse_rows(g.input(Tensor::row({1000.0, 1000.0})));
  CHECK(g.val(v).v[0] == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
  Graph g2;
  Value w = g2.lse_rows(g2.input(Tensor::row({700.0, -700.0})));
  CHECK(std::isfinite(g2.val(w).v[0]));
}

TEST_CASE("log domain error") {
  Graph g;
  CHECK_THROWS_AS(g.log_fn(g.input(Tensor::row({1.0, 0.0}))), Error);
}

TEST_CASE("backward: d/dx x^2 = 2x and d/dx tanh(0) = 1") {
  Graph g;
  Value x = g.param(Tensor::scalar(3.0));
  Value y = g.mul(x, x);
  g.backward(y);
  CHECK(g.grad(x).v[0] == doctest::Approx(6.0).epsilon(1e-12));

  Graph g2;
  Value x2 = g2.param(Tensor::scalar(0.0));
  Value y2 = g2.tanh_fn(x2);
  g2.backward(y2);
  CHECK(g2.grad(x2).v[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss and zeroes untouched leaves") {
  Graph g;
  Value x = g.param(Tensor::zeros(2, 2));
  CHECK_THROWS_AS(g.backward(x), Error);

  Graph g2;
  Value used = g2.param(Tensor::scalar(2.0));
  Value unused = g2.param(Tensor::scalar(5.0));
  Value loss = g2.mul(used, used);
  g2.backward(loss);
  CHECK(g2.grad(unused).v[0] == 0.0);
}

TEST_CASE("finite_diff_check: exact for quadratics") {
  auto sum_sq = [](Graph& g, Value x) { return g.sum_all(g.mul(x, x)); };
  const double err = finite_diff_check(sum_sq, Tensor::row({1, 2, 3}), 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("finite_diff_check validates step and scalar output") {
  auto f = [](Graph& g, Value x) { return g.sum_all(x); };
  CHECK_THROWS_AS(finite_diff_check(f, Tensor::row({1.0}), 1e-9), Error);
  auto vec = [](Graph& g, Value x) { return g.mul(x, x); };
  CHECK_THROWS_AS(finite_diff_check(vec, Tensor::row({1.0, 2.0}), 1e-5), Error);
}

TEST_CASE("gradients of every op match central differences") {
  Rng rng(11);
  const double tol = 1e-6;

  // composite through matmul/add/activations/normalize/lse/softmax
  auto composite = [](Graph& g, Value x) {
    Value t = g.tanh_fn(x);
    Value s = g.sigmoid_fn(x);
    Value m = g.matmul(t, g.transpose(s));
    Value n = g.l2norm_rows(g.add(m, g.input(Tensor::full(4, 4, 0.3))));
    Value l = g.lse_rows(n);
    return g.sum_all(l);
  };
  CHECK(finite_diff_check(composite, random_tensor(4, 3, rng), 1e-5) < tol);

  auto exp_log = [](Graph& g, Value x) {
    Value e = g.exp_fn(x);
    return g.mean_all(g.log_fn(e));
  };
  CHECK(finite_diff_check(exp_log, random_tensor(3, 3, rng), 1e-5) < tol);

  auto soft = [](Graph& g, Value x) {
    Value a = g.softmax_flat(x);
    Value w = g.input(Tensor::matrix(3, 1, {0.3, -1.2, 2.0}));
    return g.sum_all(g.mul(a, w));
  };
  CHECK(finite_diff_check(soft, random_tensor(3, 1, rng), 1e-5) < tol);

  auto gather_concat = [](Graph& g, Value x) {
    Value a = g.gather_rows(x, {2, 0});
    Value b = g.gather_rows(x, {1, 1});
    Value c = g.concat_rows({a, b});
    return g.sum_all(g.mul(c, c));
  };
  CHECK(finite_diff_check(gather_concat, random_tensor(3, 4, rng), 1e-5) < tol);

  auto broadcasts = [](Graph& g, Value x) {
    Value rows = g.gather_rows(x, {0, 1, 2});
    Value rv = g.gather_rows(x, {3});
    Value y = g.add_rowvec(rows, rv);
    Value cv = g.sum_rows(y);
    return g.sum_all(g.mul(g.sub_colvec(y, cv), y));
  };
  CHECK(finite_diff_check(broadcasts, random_tensor(4, 5, rng), 1e-5) < tol);

  auto mean_ops = [](Graph& g, Value x) {
    Value mr = g.mean_rows(x);
    return g.add(g.mean_all(x), g.sum_all(g.mul(mr, mr)));
  };
  CHECK(finite_diff_check(mean_ops, random_tensor(4, 3, rng), 1e-5) < tol);

  auto relu_path = [](Graph& g, Value x) { return g.sum_all(g.relu_fn(x)); };
  // offsets keep coordinates away from the relu kink
  Tensor xr = random_tensor(4, 4, rng);
  for (double& v : xr.v) v += (v >= 0 ? 0.5 : -0.5);
  CHECK(finite_diff_check(relu_path, xr, 1e-5) < tol);

  auto bce = [](Graph& g, Value x) { return g.bce_logit(g.sum_all(x), 1.0); };
  CHECK(finite_diff_check(bce, random_tensor(2, 2, rng), 1e-5) < tol);
}

TEST_CASE("max_flat: first-index tie rule and gradient routing") {
  Graph g;
  Value x = g.param(Tensor::col({1.0, 3.0, 3.0, 0.5}));
  Value m = g.max_flat(x);
  CHECK(g.val(m).v[0] == 3.0);
  g.backward(m);
  CHECK(g.grad(x).v == std::vector<double>{0.0, 1.0, 0.0, 0.0});

  // away from the tie, the gradient matches finite differences
  auto f = [](Graph& gg, Value v) { return gg.max_flat(v); };
  CHECK(finite_diff_check(f, Tensor::col({1.0, 3.0, 2.9, 0.5}), 1e-5) < 1e-9);
}

TEST_CASE("fixed summation order is bit-stable across runs") {
  Rng rng(5);
  Tensor t = random_tensor(50, 8, rng, 3.0);
  auto run = [&]() {
    Graph g;
    return g.val(g.sum_all(g.mul(g.input(t), g.input(t)))).v[0];
  };
  const double a = run(), b = run();
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("pca: axis-aligned points") {
  Tensor pts = Tensor::matrix(3, 2, {1, 0, -1, 0, 0, 0});
  PcaResult r = pca_top2(pts);
  CHECK(r.components.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.components.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.components.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.components.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.explained[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.explained[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pca: rejects single point") {
  CHECK_THROWS_AS(pca_top2(Tensor::zeros(1, 3)), Error);
}

TEST_CASE("pca: isotropic gaussian has near-equal explained variances") {
  Rng rng(17);
  Tensor x = Tensor::zeros(10000, 2);
  for (double& v : x.v) v = rng.gaussian();
  PcaResult r = pca_top2(x);
  CHECK(r.explained[0] >= r.explained[1]);
  CHECK((r.explained[0] - r.explained[1]) / r.explained[0] < 0.15);

  // cross-check against the closed-form 2x2 eigendecomposition
  double m0 = 0, m1 = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    m0 += x.at(i, 0);
    m1 += x.at(i, 1);
  }
  m0 /= 10000.0;
  m1 /= 10000.0;
  double a = 0, b = 0, c = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    a += (x.at(i, 0) - m0) * (x.at(i, 0) - m0);
    b += (x.at(i, 0) - m0) * (x.at(i, 1) - m1);
    c += (x.at(i, 1) - m1) * (x.at(i, 1) - m1);
  }
  auto [l0, l1] = oracle::eig2x2(a / 9999.0, b / 9999.0, c / 9999.0);
  CHECK(r.explained[0] == doctest::Approx(l0).epsilon(1e-10));
  CHECK(r.explained[1] == doctest::Approx(l1).epsilon(1e-10));
}

TEST_CASE("pca: matches independent eigensolver on random 50x8") {
  Rng rng(23);
  Tensor x = random_tensor(50, 8, rng, 2.0);
  PcaResult r = pca_top2(x);

  // orthonormality
  double n0 = 0, n1 = 0, d01 = 0;
  for (std::size_t j = 0; j < 8; ++j) {
    n0 += r.components.at(0, j) * r.components.at(0, j);
    n1 += r.components.at(1, j) * r.components.at(1, j);
    d01 += r.components.at(0, j) * r.components.at(1, j);
  }
  CHECK(std::fabs(n0 - 1.0) < 1e-10);
  CHECK(std::fabs(n1 - 1.0) < 1e-10);
  CHECK(std::fabs(d01) < 1e-10);

  // oracle covariance (independent accumulation) + classical Jacobi
  double mean[8] = {0};
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 8; ++j) mean[j] += x.at(i, j);
  for (double& m : mean) m /= 50.0;
  Tensor cov = Tensor::zeros(8, 8);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = 0; b < 8; ++b)
        cov.at(a, b) += (x.at(i, a) - mean[a]) * (x.at(i, b) - mean[b]) / 49.0;
  oracle::EigOracle eo = oracle::classical_jacobi(cov);

  CHECK(r.explained[0] == doctest::Approx(eo.values[0]).epsilon(1e-8));
  CHECK(r.explained[1] == doctest::Approx(eo.values[1]).epsilon(1e-8));
  for (std::size_t k = 0; k < 2; ++k) {
    // sign-align the oracle vector before comparing
    double dot = 0;
    for (std::size_t j = 0; j < 8; ++j) dot += eo.vectors.at(k, j) * r.components.at(k, j);
    const double sgn = dot >= 0 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(std::fabs(sgn * eo.vectors.at(k, j) - r.components.at(k, j)) < 1e-8);
  }
}
