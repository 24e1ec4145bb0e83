#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rectidistill/error.hpp"
#include "rectidistill/kernels.hpp"
#include "rectidistill/rectify.hpp"
#include "rectidistill/rng.hpp"
#include "test_support.hpp"

using namespace rectidistill;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no rectidistill::Error thrown");
  return ErrorCode::io;
}

// A random teacher vector whose argmax is not `a`.
std::vector<double> wrong_teacher(Xoshiro256& rng, std::size_t n, std::size_t& a) {
  for (;;) {
    auto t = rd_test::random_simplex(rng, n);
    a = rng.below(n);
    if (argmax(t) != a) return t;
  }
}

}  // namespace

TEST_CASE("step b and step c on a worked example") {
  const ProbVector t{0.0, 0.5, 0.45, 0.05};
  const auto b = rectify_step_b(t, 0, 1);
  CHECK(b.values == std::vector<double>{0.5, 0.25, 0.45, 0.05});
  CHECK(b.stage == RectifyStage::step_b);

  const auto c = rectify_step_c(b, 0.0, 0.5);
  CHECK(c.values[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(c.values[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(c.values[2] == 0.45);
  CHECK(c.values[3] == 0.05);
  CHECK(c.stage == RectifyStage::step_c);
}

TEST_CASE("step c reference value") {
  const auto r = rectify(ProbVector{0.1, 0.7, 0.2}, {0}, RectifyStage::step_c);
  CHECK(r.a == 0);
  CHECK(r.b == 1);
  CHECK(r.values[0] == doctest::Approx(0.48888888888888888889).epsilon(1e-15));
  CHECK(r.values[1] == doctest::Approx(0.31111111111111111111).epsilon(1e-15));
  CHECK(r.values[2] == 0.2);
}

TEST_CASE("rectification invariants over random wrong predictions") {
  Xoshiro256 rng(23);
  for (int k = 0; k < 10000; ++k) {
    const std::size_t n = 2 + rng.below(19);
    std::size_t a = 0;
    const auto raw = wrong_teacher(rng, n, a);
    const ProbVector t(raw);
    const std::size_t b = argmax(raw);
    const double ta = raw[a];
    const double tb = raw[b];

    const auto sb = rectify(t, {a}, RectifyStage::step_b);
    CHECK(std::abs(sum(sb.values) - 1.0 - (1.0 - ta - tb) / 2.0) <= 1e-12);

    const auto sc = rectify(t, {a}, RectifyStage::step_c);
    CHECK(std::abs(sum(sc.values) - 1.0) <= 1e-12);
    CHECK(std::abs(sc.values[a] + sc.values[b] - ta - tb) <= 1e-12);
    CHECK(sc.values[a] > sc.values[b]);
    CHECK(sc.values[a] / sc.values[b] == doctest::Approx((ta + 1.0) / tb).epsilon(1e-12));
    for (std::size_t i = 0; i < n; ++i) {
      if (i == a || i == b) continue;
      CHECK(sb.values[i] == raw[i]);
      CHECK(sc.values[i] == raw[i]);
    }
  }
}

TEST_CASE("rectification refuses correct predictions and bad partners") {
  const ProbVector t{0.6, 0.3, 0.1};
  CHECK(code_of([&] { rectify(t, {0}, RectifyStage::step_c); }) == ErrorCode::rectify_not_applicable);
  CHECK(code_of([&] { rectify_step_b(t, 0, 0); }) == ErrorCode::rectify_not_applicable);
  CHECK(code_of([&] { rectify_step_b(t, 1, 2); }) == ErrorCode::invalid_partner);
  CHECK(code_of([&] { rectify_step_b(t, 5, 0); }) == ErrorCode::invalid_input);

  // The only zero-mass pair: t_a = t_b = 0 cannot happen for a valid argmax,
  // so feed step c a doctored step-b result.
  RectifiedTarget fake{{0.0, 0.0, 1.0}, RectifyStage::step_b, 0, 1};
  CHECK(code_of([&] { rectify_step_c(fake, 0.0, 0.0); }) == ErrorCode::degenerate_pair);
}

TEST_CASE("batch rectification keeps order and matches the serial kernel") {
  Xoshiro256 rng(8);
  std::vector<ProbVector> t;
  std::vector<OneHotLabel> y;
  for (int i = 0; i < 300; ++i) {
    std::size_t a = 0;
    t.emplace_back(wrong_teacher(rng, 2 + rng.below(7), a));
    y.push_back({a});
  }
  for (auto stage : {RectifyStage::step_b, RectifyStage::step_c}) {
    const auto par = rectify_batch(t, y, stage);
    const auto ser = kernels::serial::rectify_batch(t, y, stage);
    REQUIRE(par.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(par[i].values == ser[i].values);
      CHECK(par[i].values == rectify(t[i], y[i], stage).values);
    }
  }

  y[123] = {argmax(t[123].values())};
  try {
    rectify_batch(t, y, RectifyStage::step_c);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_subset);
    CHECK(std::string(e.what()).find("123") != std::string::npos);
  }
}

TEST_CASE("a third class can stay the global argmax after step c") {
  // Only the pair (a, b) is reordered; classes outside it are untouched.
  const auto r = rectify(ProbVector{0.0, 0.5, 0.45, 0.05}, {0}, RectifyStage::step_c);
  CHECK(r.values[0] > r.values[1]);
  CHECK(argmax(r.values) == 2);
}
