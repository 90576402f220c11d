#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "wsc/losses.hpp"
#include "wsc/rng.hpp"

using namespace wsc;

namespace {

// n_origin paired views; bag label per origin; rows roughly unit-scale random.
ContrastiveBatch random_batch(std::size_t n_origin, std::size_t dim,
                              const std::vector<int>& origin_bag_label, Rng& rng,
                              bool with_pseudo = false) {
  ContrastiveBatch b;
  b.z = Tensor::zeros(2 * n_origin, dim);
  for (double& x : b.z.v) x = 2.0 * rng.next_double() - 1.0;
  for (std::size_t k = 0; k < n_origin; ++k) {
    b.origin.push_back(static_cast<int>(k));
    b.origin.push_back(static_cast<int>(k));
    b.bag_label.push_back(origin_bag_label[k]);
    b.bag_label.push_back(origin_bag_label[k]);
    if (with_pseudo) {
      b.pseudo_label.push_back(origin_bag_label[k]);
      b.pseudo_label.push_back(origin_bag_label[k]);
    }
  }
  b.validate();
  return b;
}

ContrastiveBatch constant_batch(std::size_t n_origin, const std::vector<double>& row,
                                int bag_label) {
  ContrastiveBatch b;
  b.z = Tensor::zeros(2 * n_origin, row.size());
  for (std::size_t i = 0; i < 2 * n_origin; ++i)
    for (std::size_t j = 0; j < row.size(); ++j) b.z.at(i, j) = row[j];
  for (std::size_t k = 0; k < n_origin; ++k) {
    b.origin.insert(b.origin.end(), {static_cast<int>(k), static_cast<int>(k)});
    b.bag_label.insert(b.bag_label.end(), {bag_label, bag_label});
  }
  return b;
}

}  // namespace

TEST_CASE("cosine_similarity closed forms") {
  CHECK(cosine_similarity(Tensor::row({1, 0}), Tensor::row({1, 0})) == doctest::Approx(1.0));
  CHECK(cosine_similarity(Tensor::row({1, 0}), Tensor::row({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine_similarity(Tensor::row({1, 1}), Tensor::row({1, 0})) ==
        doctest::Approx(0.70710678).epsilon(1e-8));
  CHECK_THROWS_AS(cosine_similarity(Tensor::row({0, 0}), Tensor::row({1, 0})), Error);
}

TEST_CASE("pair term: single pair is exactly zero") {
  Rng rng(1);
  ContrastiveBatch b = random_batch(1, 4, {1}, rng);
  LossConfig cfg;
  cfg.tau = 1.0;
  CHECK(simclr_pair_term(b, 0, 1, cfg) == 0.0);
}

TEST_CASE("pair term: four identical features give ln 3") {
  ContrastiveBatch b = constant_batch(2, {0.5, 0.5, 0.5, 0.5}, 1);
  LossConfig cfg;
  cfg.tau = 1.0;
  CHECK(simclr_pair_term(b, 0, 1, cfg) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("pair term: matches the naive exp/sum oracle") {
  Rng rng(2);
  ContrastiveBatch b = random_batch(2, 5, {1, 1}, rng);
  LossConfig cfg;
  cfg.tau = 0.5;
  const Tensor zn = oracle::normalize_rows(b.z);
  const double expect = oracle::pair_term(zn, {0, 1, 2, 3}, 0, 1, cfg.tau);
  CHECK(simclr_pair_term(b, 0, 1, cfg) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("pair term: precondition errors") {
  Rng rng(3);
  ContrastiveBatch b = random_batch(2, 3, {1, 1}, rng);
  LossConfig cfg;
  CHECK_THROWS_AS(simclr_pair_term(b, 1, 1, cfg), Error);
  CHECK_THROWS_AS(simclr_pair_term(b, 0, 2, cfg), Error);  // different origins
}

TEST_CASE("pair term is nonnegative") {
  Rng rng(4);
  LossConfig cfg;
  cfg.tau = 0.3;
  for (int rep = 0; rep < 20; ++rep) {
    ContrastiveBatch b = random_batch(4, 6, {1, 1, 1, 1}, rng);
    CHECK(simclr_pair_term(b, 2, 3, cfg) >= 0.0);
  }
}

TEST_CASE("simclr_loss: empty subset and single origin are zero") {
  Rng rng(5);
  ContrastiveBatch b = random_batch(3, 4, {1, 1, 1}, rng);
  LossConfig cfg;
  cfg.tau = 1.0;
  CHECK(simclr_loss(b, {}, cfg) == 0.0);
  CHECK(simclr_loss(b, {0, 1}, cfg) == 0.0);  // degenerate denominator
}

TEST_CASE("simclr_loss: orphan subset rejected with origin list") {
  Rng rng(6);
  ContrastiveBatch b = random_batch(3, 4, {1, 1, 1}, rng);
  LossConfig cfg;
  CHECK_THROWS_WITH_AS(simclr_loss(b, {0, 1, 2}, cfg),
                       "invalid_argument: simclr_loss: subset not closed under view pairing; "
                       "orphan origins: 1",
                       Error);
}

TEST_CASE("simclr_loss: matches the double-loop oracle on 3 origins") {
  Rng rng(7);
  ContrastiveBatch b = random_batch(3, 5, {1, 1, 1}, rng);
  LossConfig cfg;
  cfg.tau = 0.5;
  const Tensor zn = oracle::normalize_rows(b.z);
  const double expect = oracle::simclr_loss(zn, b.origin, {0, 1, 2, 3, 4, 5}, cfg.tau);
  CHECK(simclr_loss(b, b.all_views(), cfg) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("supcon: unique pseudo-labels reduce to full-batch simclr") {
  Rng rng(8);
  ContrastiveBatch b = random_batch(4, 6, {1, 0, 1, 0}, rng);
  b.pseudo_label = {100, 100, 101, 101, 102, 102, 103, 103};
  LossConfig cfg;
  cfg.tau = 0.7;
  const double sup = supcon_loss(b, cfg);
  const double sim = simclr_loss(b, b.all_views(), cfg);
  CHECK(sup == sim);  // identical code path, bit-for-bit
}

TEST_CASE("supcon: identical features give 2N ln(2N-1)") {
  ContrastiveBatch b = constant_batch(4, {1.0, 0.0, 0.0}, 1);
  b.pseudo_label = {0, 0, 0, 0, 1, 1, 1, 1};  // two classes of two origins each
  LossConfig cfg;
  cfg.tau = 1.0;
  const double expect = 8.0 * std::log(7.0);
  CHECK(supcon_loss(b, cfg) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("supcon: matches the triple-loop oracle") {
  Rng rng(9);
  ContrastiveBatch b = random_batch(4, 5, {1, 0, 1, 0}, rng, true);
  LossConfig cfg;
  cfg.tau = 0.5;
  const Tensor zn = oracle::normalize_rows(b.z);
  CHECK(supcon_loss(b, cfg) ==
        doctest::Approx(oracle::supcon_loss(zn, b.pseudo_label, cfg.tau)).epsilon(1e-10));
}

TEST_CASE("supcon: singleton class rejected by name") {
  Rng rng(10);
  ContrastiveBatch b = random_batch(2, 4, {1, 1}, rng);
  b.pseudo_label = {7, 8, 8, 8};  // class 7 appears once (invalid pairing, bypasses validate)
  LossConfig cfg;
  CHECK_THROWS_WITH_AS(supcon_loss(b, cfg), "invalid_argument: supcon_loss: singleton class 7",
                       Error);
  ContrastiveBatch c = random_batch(2, 4, {1, 1}, rng);
  CHECK_THROWS_AS(supcon_loss(c, cfg), Error);  // missing pseudo_label array
}

TEST_CASE("supcon decomposition: quotient and expanded forms agree") {
  Rng rng(11);
  LossConfig cfg;
  cfg.tau = 0.5;
  ContrastiveBatch ident = constant_batch(3, {0.0, 1.0}, 1);
  ident.pseudo_label = {0, 0, 1, 1, 0, 0};
  CHECK(supcon_decomposition_check(ident, cfg) < 1e-9);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.index(4);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.index(2));
    // bag-label pseudo labels guarantee no singleton class (views come in pairs)
    ContrastiveBatch b = random_batch(n, 4, labels, rng, true);
    CHECK(supcon_decomposition_check(b, cfg) < 1e-9);
  }
}

TEST_CASE("similarity loss closed forms") {
  LossConfig cfg;
  cfg.tau = 0.5;
  ContrastiveBatch identical = constant_batch(2, {0.0, 1.0, 0.0}, 0);  // |Neg| = 4
  CHECK(similarity_loss(identical, cfg) == doctest::Approx(-6.0).epsilon(1e-12));

  // |Neg| = 3 mutually orthogonal unit vectors (no pairing needed by the loss)
  ContrastiveBatch ortho;
  ortho.z = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  ortho.origin = {0, 1, 2};
  ortho.bag_label = {0, 0, 0};
  LossConfig cfg1;
  cfg1.tau = 1.0;
  CHECK(similarity_loss(ortho, cfg1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("similarity loss: degenerate negative subsets contribute zero") {
  Rng rng(12);
  LossConfig cfg;
  ContrastiveBatch all_pos = random_batch(3, 4, {1, 1, 1}, rng);
  CHECK(similarity_loss(all_pos, cfg) == 0.0);

  ContrastiveBatch one_neg;
  one_neg.z = Tensor::matrix(2, 3, {1, 0, 0, 0, 1, 0});
  one_neg.origin = {0, 1};
  one_neg.bag_label = {0, 1};
  CHECK(similarity_loss(one_neg, cfg) == 0.0);
}

TEST_CASE("similarity loss: matches oracle and respects the lower bound") {
  Rng rng(13);
  LossConfig cfg;
  cfg.tau = 1.0;
  ContrastiveBatch b = random_batch(3, 6, {0, 0, 0}, rng);  // |Neg| = 6
  const Tensor zn = oracle::normalize_rows(b.z);
  const double expect = oracle::similarity_loss(zn, {0, 1, 2, 3, 4, 5}, cfg.tau);
  CHECK(similarity_loss(b, cfg) == doctest::Approx(expect).epsilon(1e-10));
  const double bound = -(6.0 - 1.0) / cfg.tau;
  CHECK(similarity_loss(b, cfg) > bound);  // equality only for coincident features
}

TEST_CASE("weaksupcon: total is the alpha-weighted sum of parts") {
  Rng rng(14);
  LossConfig cfg;
  cfg.tau = 0.5;
  cfg.alpha = 1.0;
  ContrastiveBatch b = random_batch(5, 6, {0, 0, 1, 1, 1}, rng);
  WeakSupConResult r = weaksupcon_loss(b, cfg);
  CHECK(r.total == doctest::Approx(cfg.alpha * r.similarity_part + r.simclr_part).epsilon(1e-12));

  cfg.alpha = 0.0;
  WeakSupConResult r0 = weaksupcon_loss(b, cfg);
  const double pos_only = simclr_loss(b, b.views_with_label(kPositiveBag), cfg);
  CHECK(r0.total == doctest::Approx(pos_only).epsilon(1e-12));
}

TEST_CASE("weaksupcon: affine in alpha with slope equal to the similarity part") {
  Rng rng(15);
  ContrastiveBatch b = random_batch(6, 5, {0, 0, 0, 1, 1, 1}, rng);
  LossConfig cfg;
  cfg.tau = 0.5;
  std::vector<double> alphas{0.25, 1.0, 4.0};
  std::vector<double> totals;
  double sim_part = 0.0;
  for (double a : alphas) {
    cfg.alpha = a;
    WeakSupConResult r = weaksupcon_loss(b, cfg);
    totals.push_back(r.total);
    sim_part = r.similarity_part;
  }
  const double slope01 = (totals[1] - totals[0]) / (alphas[1] - alphas[0]);
  const double slope12 = (totals[2] - totals[1]) / (alphas[2] - alphas[1]);
  CHECK(std::fabs(slope01 - sim_part) < 1e-9);
  CHECK(std::fabs(slope12 - sim_part) < 1e-9);
}

TEST_CASE("weaksupcon: degenerate subsets degrade gracefully") {
  Rng rng(16);
  LossConfig cfg;
  ContrastiveBatch all_neg = random_batch(3, 4, {0, 0, 0}, rng);
  WeakSupConResult r = weaksupcon_loss(all_neg, cfg);
  CHECK(r.simclr_part == 0.0);
  CHECK(r.total == doctest::Approx(cfg.alpha * r.similarity_part));

  ContrastiveBatch all_pos = random_batch(3, 4, {1, 1, 1}, rng);
  WeakSupConResult r2 = weaksupcon_loss(all_pos, cfg);
  CHECK(r2.similarity_part == 0.0);
  CHECK(r2.total == doctest::Approx(r2.simclr_part));
}

TEST_CASE("losses are invariant under consistent batch permutation") {
  Rng rng(17);
  LossConfig cfg;
  cfg.tau = 0.4;
  ContrastiveBatch b = random_batch(5, 6, {0, 1, 0, 1, 1}, rng, true);

  std::vector<std::size_t> perm(b.views());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  ContrastiveBatch p;
  p.z = Tensor::zeros(b.views(), b.z.cols());
  p.origin.resize(b.views());
  p.bag_label.resize(b.views());
  p.pseudo_label.resize(b.views());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    for (std::size_t j = 0; j < b.z.cols(); ++j) p.z.at(i, j) = b.z.at(perm[i], j);
    p.origin[i] = b.origin[perm[i]];
    p.bag_label[i] = b.bag_label[perm[i]];
    p.pseudo_label[i] = b.pseudo_label[perm[i]];
  }

  CHECK(similarity_loss(p, cfg) == doctest::Approx(similarity_loss(b, cfg)).epsilon(1e-9));
  CHECK(supcon_loss(p, cfg) == doctest::Approx(supcon_loss(b, cfg)).epsilon(1e-9));
  CHECK(simclr_loss(p, p.all_views(), cfg) ==
        doctest::Approx(simclr_loss(b, b.all_views(), cfg)).epsilon(1e-9));
  WeakSupConResult wb = weaksupcon_loss(b, cfg), wp = weaksupcon_loss(p, cfg);
  CHECK(wp.total == doctest::Approx(wb.total).epsilon(1e-9));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(18);
  LossConfig cfg;
  cfg.tau = 0.5;
  ContrastiveBatch b = random_batch(4, 5, {0, 0, 1, 1}, rng, true);

  auto check_loss_grad = [&](auto&& builder) {
    auto f = [&](Graph& g, Value x) { return builder(g, x); };
    CHECK(finite_diff_check(f, b.z, 1e-5) < 1e-6);
  };
  check_loss_grad([&](Graph& g, Value x) { return simclr_pair_term_node(g, x, b, 0, 1, cfg); });
  check_loss_grad(
      [&](Graph& g, Value x) { return simclr_loss_node(g, x, b, b.all_views(), cfg); });
  check_loss_grad([&](Graph& g, Value x) { return supcon_loss_node(g, x, b, cfg); });
  check_loss_grad([&](Graph& g, Value x) { return similarity_loss_node(g, x, b, cfg); });
  check_loss_grad([&](Graph& g, Value x) { return weaksupcon_loss_node(g, x, b, cfg).total; });
}

TEST_CASE("normalize_inputs=false uses raw dot products") {
  LossConfig raw;
  raw.tau = 1.0;
  raw.normalize_inputs = false;
  ContrastiveBatch b;
  b.z = Tensor::matrix(2, 2, {2, 0, 2, 0});  // norm 2 rows
  b.origin = {0, 0};
  b.bag_label = {0, 0};
  // raw dots are 4, so the loss is -(1/2) * (4 + 4) / 1 = -4
  CHECK(similarity_loss(b, raw) == doctest::Approx(-4.0).epsilon(1e-12));
  LossConfig norm;
  norm.tau = 1.0;
  CHECK(similarity_loss(b, norm) == doctest::Approx(-1.0).epsilon(1e-12));
}
