#include <doctest.h>

#include <cmath>

#include "rectidistill/error.hpp"
#include "rectidistill/schedule.hpp"
#include "test_support.hpp"

using namespace rectidistill;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no rectidistill::Error thrown");
  return ErrorCode::io;
}

// Two samples, three classes, both labelled 0; the teacher gets the first
// right and the second wrong.
rd_test::OwnedBatch hand_batch() {
  rd_test::OwnedBatch b;
  b.z = {LogitVector{1.0, -0.5, 0.25}, LogitVector{0.2, 0.4, -0.3}};
  b.t = {ProbVector{0.7, 0.2, 0.1}, ProbVector{0.1, 0.7, 0.2}};
  b.y = {{0}, {0}};
  return b;
}

double identity_gap(const LossBreakdown& l) {
  return std::abs(l.l_all - ((1.0 - l.gamma) * (l.l_ce + l.l_easy) + l.gamma * l.l_hard));
}

}  // namespace

TEST_CASE("gamma follows e / E and rejects bad schedules") {
  CHECK(gamma({0, 10}) == 0.0);
  CHECK(gamma({5, 10}) == 0.5);
  CHECK(gamma({9, 10}) == 0.9);
  for (long total : {1L, 7L, 60L, 300L}) {
    for (long e = 1; e < total; ++e) CHECK(gamma({e, total}) > gamma({e - 1, total}));
  }
  CHECK(code_of([] { gamma({10, 10}); }) == ErrorCode::invalid_schedule);
  CHECK(code_of([] { gamma({-1, 10}); }) == ErrorCode::invalid_schedule);
  CHECK(code_of([] { gamma({0, 0}); }) == ErrorCode::invalid_schedule);
}

TEST_CASE("mode spellings round-trip") {
  for (const auto& m : rd_test::all_modes()) CHECK(DistillMode::parse(m.name()) == m);
  CHECK(DistillMode::parse("fixed-gamma=0.25").fixed_gamma == 0.25);
  CHECK(code_of([] { DistillMode::parse("fixed-gamma=1.5"); }) == ErrorCode::config);
  CHECK(code_of([] { DistillMode::parse("fixed-gamma=abc"); }) == ErrorCode::config);
  CHECK(code_of([] { DistillMode::parse("ours"); }) == ErrorCode::config);
  CHECK(parse_reduction("subset") == KdReduction::subset_mean);
  CHECK(to_string(parse_reduction("batch")) == "batch");
  CHECK(code_of([] { parse_reduction("mean"); }) == ErrorCode::config);
}

TEST_CASE("effective gamma per mode") {
  const EpochSchedule s{3, 4};
  CHECK(effective_gamma(DistillMode::full(), s) == 0.75);
  CHECK(effective_gamma(DistillMode::step_b_ablation(), s) == 0.75);
  CHECK(effective_gamma(DistillMode::with_fixed_gamma(0.5), s) == 0.5);
  CHECK(effective_gamma(DistillMode::eliminate_only(), s) == 0.0);
  CHECK(effective_gamma(DistillMode::rectify_only(), s) == 0.0);
  CHECK(effective_gamma(DistillMode::vanilla_kd(), s) == 0.0);
  CHECK(code_of([] { effective_gamma(DistillMode::vanilla_kd(), {4, 4}); }) == ErrorCode::invalid_schedule);
}

TEST_CASE("hand batch matches reference losses") {
  // 40-digit reference values, computed offline.
  const auto b = hand_batch();
  const auto batch = compute_batch_loss(b.inputs(DistillMode::full(), {1, 2}));
  CHECK(batch.n_right == 1);
  CHECK(batch.n_bias == 1);
  CHECK(batch.gamma == 0.5);
  CHECK(batch.l_ce == doctest::Approx(0.78376097386012741774).epsilon(1e-14));
  CHECK(batch.l_easy == doctest::Approx(0.050578595655986241824).epsilon(1e-14));
  CHECK(batch.l_hard == doctest::Approx(0.021161387986452018775).epsilon(1e-14));
  CHECK(batch.l_all == doctest::Approx(0.42775047875128283917).epsilon(1e-14));

  const auto subset =
      compute_batch_loss(b.inputs(DistillMode::full(), {1, 2}, 1.0, KdReduction::subset_mean));
  CHECK(subset.l_ce == doctest::Approx(0.78376097386012741774).epsilon(1e-14));
  CHECK(subset.l_easy == doctest::Approx(0.10115719131197248365).epsilon(1e-14));
  CHECK(subset.l_hard == doctest::Approx(0.04232277597290403755).epsilon(1e-14));
  CHECK(subset.l_all == doctest::Approx(0.46362047057250196947).epsilon(1e-14));
}

TEST_CASE("loss identity holds for every emitted breakdown") {
  Xoshiro256 rng(31);
  for (int k = 0; k < 300; ++k) {
    const auto b = rd_test::random_batch(rng, 1 + rng.below(16), 2 + rng.below(6));
    for (const auto& mode : rd_test::all_modes()) {
      for (auto r : {KdReduction::batch_mean, KdReduction::subset_mean}) {
        const auto l = compute_batch_loss(b.inputs(mode, {static_cast<long>(k % 10), 10}, 1.5, r));
        CHECK(identity_gap(l) <= 1e-12);
        CHECK(l.n_right + l.n_bias == b.z.size());
        if (l.n_bias == 0) CHECK(l.l_hard == 0.0);
      }
    }
  }
}

TEST_CASE("assembled gradient matches finite differences in every mode") {
  Xoshiro256 rng(41);
  double worst = 0.0;
  for (int k = 0; k < 40; ++k) {
    const std::size_t n = 1 + rng.below(4);
    const std::size_t c = 2 + rng.below(4);
    auto b = rd_test::random_batch(rng, n, c);
    const double tau = std::array{0.5, 1.0, 2.0}[k % 3];
    for (const auto& mode : rd_test::all_modes()) {
      for (auto r : {KdReduction::batch_mean, KdReduction::subset_mean}) {
        const EpochSchedule sched{static_cast<long>(k % 5), 5};
        const auto grads = batch_loss_gradient(b.inputs(mode, sched, tau, r));
        for (std::size_t i = 0; i < n; ++i) {
          const std::vector<double> z0(b.z[i].values().begin(), b.z[i].values().end());
          const auto fd = finite_difference_gradient(
              [&](std::span<const double> x) {
                auto moved = b;
                moved.z[i] = LogitVector(std::vector<double>(x.begin(), x.end()));
                return compute_batch_loss(moved.inputs(mode, sched, tau, r)).l_all;
              },
              z0);
          worst = std::max(worst, rd_test::max_abs_diff(grads[i].values, fd.values));
        }
      }
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("eliminate equals full at gamma 0") {
  Xoshiro256 rng(43);
  for (int k = 0; k < 200; ++k) {
    const auto b = rd_test::random_batch(rng, 1 + rng.below(12), 2 + rng.below(5));
    for (auto r : {KdReduction::batch_mean, KdReduction::subset_mean}) {
      const auto full = batch_objective(b.inputs(DistillMode::full(), {0, 10}, 1.0, r));
      const auto elim = batch_objective(b.inputs(DistillMode::eliminate_only(), {6, 10}, 1.0, r));
      CHECK(std::abs(full.loss.l_all - elim.loss.l_all) <= 1e-12);
      CHECK(std::abs(full.loss.l_easy - elim.loss.l_easy) <= 1e-12);
      CHECK(elim.loss.l_hard == 0.0);
      for (std::size_t i = 0; i < b.z.size(); ++i) {
        CHECK(rd_test::max_abs_diff(full.gradients[i].values, elim.gradients[i].values) <= 1e-12);
      }
    }
  }
}

TEST_CASE("eliminate's KD term equals full on the bias-free sub-batch") {
  Xoshiro256 rng(47);
  for (int k = 0; k < 200; ++k) {
    const auto b = rd_test::random_batch(rng, 2 + rng.below(12), 2 + rng.below(3));
    rd_test::OwnedBatch right;
    for (std::size_t i = 0; i < b.z.size(); ++i) {
      if (argmax(b.t[i].values()) != b.y[i].class_index) continue;
      right.z.push_back(b.z[i]);
      right.t.push_back(b.t[i]);
      right.y.push_back(b.y[i]);
    }
    if (right.z.empty()) continue;
    const auto elim =
        compute_batch_loss(b.inputs(DistillMode::eliminate_only(), {0, 1}, 1.0, KdReduction::subset_mean));
    const auto dropped =
        compute_batch_loss(right.inputs(DistillMode::full(), {0, 1}, 1.0, KdReduction::subset_mean));
    CHECK(std::abs(elim.l_easy - dropped.l_easy) <= 1e-12);
    CHECK(dropped.n_bias == 0);
    CHECK(dropped.l_hard == 0.0);
  }
}

TEST_CASE("vanilla KD with a perfect teacher collapses to full at gamma 0") {
  Xoshiro256 rng(53);
  for (int k = 0; k < 200; ++k) {
    auto b = rd_test::random_batch(rng, 1 + rng.below(12), 2 + rng.below(5));
    for (std::size_t i = 0; i < b.z.size(); ++i) b.y[i] = {argmax(b.t[i].values())};
    const auto van = batch_objective(b.inputs(DistillMode::vanilla_kd(), {7, 10}));
    const auto full = batch_objective(b.inputs(DistillMode::full(), {0, 10}));
    const auto rect = batch_objective(b.inputs(DistillMode::rectify_only(), {7, 10}));
    CHECK(van.loss.n_bias == 0);
    CHECK(std::abs(van.loss.l_all - full.loss.l_all) <= 1e-12);
    CHECK(std::abs(rect.loss.l_all - full.loss.l_all) <= 1e-12);
    for (std::size_t i = 0; i < b.z.size(); ++i) {
      CHECK(rd_test::max_abs_diff(van.gradients[i].values, full.gradients[i].values) <= 1e-12);
    }
  }
}

TEST_CASE("an all-biased batch has no easy term") {
  rd_test::OwnedBatch b;
  b.z = {LogitVector{0.0, 1.0}, LogitVector{0.5, -0.5}};
  b.t = {ProbVector{0.2, 0.8}, ProbVector{0.9, 0.1}};
  b.y = {{0}, {1}};
  const auto l = compute_batch_loss(b.inputs(DistillMode::full(), {1, 2}, 1.0, KdReduction::subset_mean));
  CHECK(l.n_right == 0);
  CHECK(l.l_easy == 0.0);
  CHECK(l.l_hard > 0.0);
}

TEST_CASE("batch validation") {
  auto b = hand_batch();
  CHECK(code_of([&] { compute_batch_loss(b.inputs(DistillMode::full(), {2, 2})); }) ==
        ErrorCode::invalid_schedule);
  CHECK(code_of([&] { compute_batch_loss(b.inputs(DistillMode::full(), {0, 2}, 0.0)); }) ==
        ErrorCode::invalid_parameter);
  rd_test::OwnedBatch empty;
  CHECK(code_of([&] { compute_batch_loss(empty.inputs(DistillMode::full(), {0, 2})); }) ==
        ErrorCode::invalid_batch);
  b.y.pop_back();
  CHECK(code_of([&] { compute_batch_loss(b.inputs(DistillMode::full(), {0, 2})); }) ==
        ErrorCode::invalid_batch);
  b = hand_batch();
  b.t[1] = ProbVector{0.5, 0.5};
  CHECK(code_of([&] { compute_batch_loss(b.inputs(DistillMode::full(), {0, 2})); }) ==
        ErrorCode::invalid_batch);
}
