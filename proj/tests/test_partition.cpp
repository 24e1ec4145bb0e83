#include <doctest.h>

#include <algorithm>

#include "rectidistill/error.hpp"
#include "rectidistill/partition.hpp"
#include "rectidistill/rng.hpp"
#include "test_support.hpp"

using namespace rectidistill;

TEST_CASE("mask flags right predictions, ties go to the lowest index") {
  const std::vector<ProbVector> t{{0.7, 0.2, 0.1}, {0.1, 0.7, 0.2}, {0.4, 0.4, 0.2}, {0.4, 0.4, 0.2}};
  const std::vector<OneHotLabel> y{{0}, {0}, {0}, {1}};
  const auto mask = build_mask(t, y);
  CHECK(mask.flags == std::vector<bool>{true, false, true, false});
  CHECK(mask.count_right() == 2);

  const auto split = split_batch(mask);
  CHECK(split.right_indices == std::vector<std::size_t>{0, 2});
  CHECK(split.bias_indices == std::vector<std::size_t>{1, 3});
}

TEST_CASE("partition is complete, disjoint and deterministic") {
  Xoshiro256 rng(3);
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + rng.below(64);
    const std::size_t c = 2 + rng.below(6);
    std::vector<ProbVector> t;
    std::vector<OneHotLabel> y;
    std::size_t right = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t.emplace_back(rd_test::random_simplex(rng, c));
      y.push_back({static_cast<std::size_t>(rng.below(c))});
      if (argmax(t.back().values()) == y.back().class_index) ++right;
    }
    const auto mask = build_mask(t, y);
    CHECK(mask.flags == build_mask(t, y).flags);
    CHECK(mask.count_right() == right);

    const auto split = split_batch(mask);
    CHECK(split.right_indices.size() + split.bias_indices.size() == n);
    std::vector<std::size_t> all = split.right_indices;
    all.insert(all.end(), split.bias_indices.begin(), split.bias_indices.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);
  }
}

TEST_CASE("mask rejects malformed batches") {
  const std::vector<ProbVector> t{{0.5, 0.5}};
  const std::vector<OneHotLabel> two{{0}, {1}};
  const std::vector<OneHotLabel> bad{{2}};
  CHECK_THROWS_AS(build_mask(t, two), Error);
  try {
    build_mask(t, bad);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_batch);
  }
  CHECK(build_mask({}, {}).size() == 0);
}
