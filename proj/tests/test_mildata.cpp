#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "wsc/bags.hpp"
#include "wsc/feature_store.hpp"

using namespace wsc;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("standard benchmark fixture constants") {
  SyntheticSpec s = standard_benchmark();
  CHECK(s.d == 32);
  CHECK(s.neg_clusters == 3);
  CHECK(s.pos_clusters == 2);
  CHECK(s.cluster_sigma == 0.5);
  CHECK(s.cluster_separation == 3.0);
  CHECK(s.witness_rate == 0.1);
  CHECK(s.bag_size_min == 40);
  CHECK(s.bag_size_max == 60);
  CHECK(s.counts == std::array<std::size_t, 6>{30, 30, 10, 10, 15, 15});
  CHECK(s.seed == 7);
}

TEST_CASE("standard benchmark: counts, sizes, witnesses, MIL assumption") {
  DatasetSplit split = generate_synthetic(standard_benchmark());
  CHECK(split.train.size() == 60);
  CHECK(split.val.size() == 20);
  CHECK(split.test.size() == 30);

  std::set<std::uint32_t> ids;
  auto scan = [&](const std::vector<Bag>& bags) {
    for (const Bag& b : bags) {
      CHECK(ids.insert(b.id).second);  // ids unique across the whole split
      CHECK(b.size() >= 40);
      CHECK(b.size() <= 60);
      b.check_mil_assumption();
      std::size_t witnesses = 0;
      for (std::uint8_t w : b.witness_mask) witnesses += w;
      if (b.label == 1) {
        CHECK(witnesses ==
              static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(b.size()))));
        CHECK(witnesses >= 4);
        CHECK(witnesses <= 6);
      } else {
        CHECK(witnesses == 0);
      }
    }
  };
  scan(split.train);
  scan(split.val);
  scan(split.test);
}

TEST_CASE("generator: witness_rate 1.0 makes every positive instance a witness") {
  SyntheticSpec s;
  s.d = 4;
  s.witness_rate = 1.0;
  s.counts = {2, 2, 1, 1, 1, 1};
  s.bag_size_min = 5;
  s.bag_size_max = 8;
  DatasetSplit split = generate_synthetic(s);
  for (const Bag& b : split.train)
    if (b.label == 1)
      for (std::uint8_t w : b.witness_mask) CHECK(w == 1);
}

TEST_CASE("generator: identical seed gives a bit-identical dataset") {
  SyntheticSpec s;
  s.counts = {4, 4, 2, 2, 2, 2};
  s.d = 6;
  DatasetSplit a = generate_synthetic(s);
  DatasetSplit b = generate_synthetic(s);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].instances.v == b.train[i].instances.v);
    CHECK(a.train[i].witness_mask == b.train[i].witness_mask);
  }
}

TEST_CASE("generator: custom counts and the invariant scan") {
  SyntheticSpec s;
  s.d = 5;
  s.counts = {10, 10, 4, 4, 6, 6};
  s.bag_size_min = 30;
  s.bag_size_max = 60;
  DatasetSplit split = generate_synthetic(s);
  CHECK(split.train.size() + split.val.size() + split.test.size() == 40);
  for (const std::vector<Bag>* bags : {&split.train, &split.val, &split.test})
    for (const Bag& b : *bags) {
      CHECK(b.size() >= 30);
      CHECK(b.size() <= 60);
      b.check_mil_assumption();
    }
}

TEST_CASE("generator: unattainable separation suggests a smaller value") {
  SyntheticSpec s;
  s.d = 2;
  s.cluster_separation = 1e9;
  CHECK_THROWS_WITH_AS(generate_synthetic(s),
                       doctest::Contains("reduce cluster_separation"), Error);
}

TEST_CASE("pseudo labels inherit bag labels everywhere") {
  SyntheticSpec s;
  s.d = 4;
  s.counts = {3, 3, 1, 1, 1, 1};
  DatasetSplit split = generate_synthetic(s);
  std::vector<int> pseudo = assign_pseudo_labels(split.train);
  std::size_t total = 0, idx = 0, disagreements = 0, positive_instances = 0;
  for (const Bag& b : split.train) total += b.size();
  CHECK(pseudo.size() == total);
  for (const Bag& b : split.train) {
    std::size_t bag_disagreements = 0;
    for (std::size_t i = 0; i < b.size(); ++i, ++idx) {
      CHECK(pseudo[idx] == b.label);
      if (b.label == 1) {
        ++positive_instances;
        if (b.witness_mask[i] == 0) {
          ++disagreements;  // noisy by construction
          ++bag_disagreements;
        }
      }
    }
    // per bag the noise is exactly the non-witness count: n - ceil(rate * n)
    if (b.label == 1) {
      const auto witnesses =
          static_cast<std::size_t>(std::ceil(s.witness_rate * static_cast<double>(b.size())));
      CHECK(bag_disagreements == b.size() - witnesses);
    }
  }
  // most pseudo labels in positive bags disagree with the ground truth
  CHECK(disagreements > positive_instances / 2);
}

TEST_CASE("feature store round-trip is exact at 32-bit precision") {
  SyntheticSpec s;
  s.d = 6;
  s.counts = {2, 2, 1, 1, 1, 1};
  DatasetSplit split = generate_synthetic(s);
  const std::string path = temp_path("wsc_store_test.wscf");
  write_feature_store(path, split.train, s.d);
  std::size_t dim = 0;
  std::vector<Bag> back = read_feature_store(path, &dim);
  CHECK(dim == 6);
  REQUIRE(back.size() == split.train.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].id == split.train[k].id);
    CHECK(back[k].label == split.train[k].label);
    CHECK(back[k].witness_mask == split.train[k].witness_mask);
    REQUIRE(back[k].instances.shape == split.train[k].instances.shape);
    for (std::size_t i = 0; i < back[k].instances.numel(); ++i)
      CHECK(static_cast<float>(back[k].instances.v[i]) ==
            static_cast<float>(split.train[k].instances.v[i]));
  }
  std::filesystem::remove(path);
}

TEST_CASE("feature store: empty bag list round-trips") {
  const std::string path = temp_path("wsc_store_empty.wscf");
  write_feature_store(path, {}, 4);
  CHECK(read_feature_store(path).empty());
  std::filesystem::remove(path);
}

TEST_CASE("feature store: truncation names expected and actual byte counts") {
  SyntheticSpec s;
  s.d = 4;
  s.counts = {1, 1, 1, 1, 1, 1};
  DatasetSplit split = generate_synthetic(s);
  std::string bytes = encode_feature_store(split.train, s.d);
  std::string cut = bytes.substr(0, bytes.size() - 7);  // chop mid-blob
  CHECK_THROWS_WITH_AS(decode_feature_store(cut), doctest::Contains("truncated"), Error);
}

TEST_CASE("feature store: bad magic is rejected with its offset") {
  std::string bytes = encode_feature_store({}, 4);
  bytes[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_feature_store(bytes),
                       "bad_format: feature store: bad magic at byte offset 0", Error);
}

TEST_CASE("feature store: trailing garbage is rejected") {
  std::string bytes = encode_feature_store({}, 4);
  bytes += "junk";
  CHECK_THROWS_WITH_AS(decode_feature_store(bytes), doctest::Contains("trailing"), Error);
}
