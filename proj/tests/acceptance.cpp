// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rectidistill/analysis.hpp"
#include "rectidistill/error.hpp"
#include "rectidistill/experiment.hpp"
#include "rectidistill/rectify.hpp"
#include "test_support.hpp"

using namespace rectidistill;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kGradTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr double kKlFloor = -1e-12;
constexpr double kSelfKlTol = 1e-12;
constexpr double kRectTol = 1e-12;
constexpr double kSweepTol = 1e-4;
constexpr double kWorkedTol = 1e-4;
constexpr double kOrderSlack = 0.005;  // 0.5 percentage points
constexpr double kE2eGradTol = 1e-5;
constexpr double kTeacherMinAcc = 0.90;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < limit_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s [%2d] %-34s %s (%.2fs, limit %.0fs%s)\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              limit_s, in_time ? "" : ", too slow");
  std::fflush(stdout);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// 1-D grid search over s in (0, 1) at 1e-6 resolution.
double grid_optimum(double target_a) {
  double best_s = 0.0;
  double best = 1e300;
  for (int k = 1; k < 1000000; ++k) {
    const double s = k * 1e-6;
    double f = -std::log(s);
    if (target_a > 0.0) f += target_a * std::log(target_a / s);
    if (target_a < 1.0) f += (1.0 - target_a) * std::log((1.0 - target_a) / (1.0 - s));
    if (f < best) {
      best = f;
      best_s = s;
    }
  }
  return best_s;
}

Outcome gradient_fidelity() {
  Xoshiro256 rng(1001);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + rng.below(9);
    const auto z = rd_test::random_logits(rng, n);
    const OneHotLabel y{static_cast<std::size_t>(rng.below(n))};
    const double tau = std::array{0.5, 1.0, 2.0}[k % 3];
    const ProbVector t(rd_test::random_simplex(rng, n, 1e-3));
    const auto as_logits = [](std::span<const double> x) { return LogitVector(std::vector<double>(x.begin(), x.end())); };
    const auto ce_fd = finite_difference_gradient(
        [&](std::span<const double> x) { return cross_entropy_logits(y, as_logits(x), tau); }, z, kFdStep);
    const auto kl_fd = finite_difference_gradient(
        [&](std::span<const double> x) { return kl_to_logits(t.values(), as_logits(x), tau); }, z, kFdStep);
    worst = std::max({worst, rd_test::max_abs_diff(ce_softmax_gradient(LogitVector(z), y, tau).values, ce_fd.values),
                      rd_test::max_abs_diff(kl_softmax_gradient(t, LogitVector(z), tau).values, kl_fd.values)});
  }
  return {worst <= kGradTol, fmt("max |analytic - fd| = %.2e", worst)};
}

Outcome kl_nonnegative() {
  Xoshiro256 rng(1002);
  double lowest = 1e300;
  double self_max = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const std::size_t n = 2 + rng.below(19);
    const ProbVector t(rd_test::random_simplex(rng, n, 1e-6));
    const ProbVector s(rd_test::random_simplex(rng, n, 1e-6));
    lowest = std::min(lowest, kl_divergence(t, s));
    self_max = std::max(self_max, std::abs(kl_divergence(t, t)));
  }
  return {lowest >= kKlFloor && self_max <= kSelfKlTol, fmt("min KL = %.3e, max KL(p,p) = %.1e", lowest, self_max)};
}

Outcome rectification_invariants() {
  Xoshiro256 rng(1003);
  double sum_c = 0.0;
  double sum_b = 0.0;
  double pair = 0.0;
  std::size_t changed_others = 0;
  std::size_t misordered = 0;
  for (int k = 0; k < 10000; ++k) {
    const std::size_t n = 2 + rng.below(19);
    std::vector<double> raw;
    std::size_t a = 0;
    do {
      raw = rd_test::random_simplex(rng, n);
      a = rng.below(n);
    } while (argmax(raw) == a);
    const std::size_t b = argmax(raw);
    const ProbVector t(raw);
    const auto sb = rectify(t, {a}, RectifyStage::step_b);
    const auto sc = rectify(t, {a}, RectifyStage::step_c);
    const double mass_b = std::accumulate(sb.values.begin(), sb.values.end(), 0.0);
    const double mass_c = std::accumulate(sc.values.begin(), sc.values.end(), 0.0);
    sum_b = std::max(sum_b, std::abs(mass_b - 1.0 - (1.0 - raw[a] - raw[b]) / 2.0));
    sum_c = std::max(sum_c, std::abs(mass_c - 1.0));
    pair = std::max(pair, std::abs(sc.values[a] + sc.values[b] - raw[a] - raw[b]));
    misordered += !(sc.values[a] > sc.values[b]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i != a && i != b) changed_others += (sb.values[i] != raw[i]) + (sc.values[i] != raw[i]);
    }
  }
  const bool ok = sum_c <= kRectTol && sum_b <= kRectTol && pair <= kRectTol && changed_others == 0 && misordered == 0;
  std::string detail = fmt("step-c sum err %.1e, step-b excess err %.1e, pair err %.1e", sum_c, sum_b, pair);
  detail += ", others changed " + std::to_string(changed_others) + ", misordered " + std::to_string(misordered);
  return {ok, detail};
}

Outcome two_class_sweep() {
  const auto grid = default_sweep_grid();
  const auto rows = run_sweep(grid, {});
  double worst = 0.0;
  bool ordered = true;
  bool dominated = true;
  for (const auto& row : rows) {
    worst = std::max(worst, std::abs(row.s_unrect - grid_optimum(row.t_a)));
    if (row.t_a > 0.5) ordered = ordered && row.t_a < row.s_unrect && row.s_unrect < 1.0;
    if (row.t_a < 0.5) dominated = dominated && row.s_rect > row.s_unrect;
  }
  const auto problems = check_sweep(rows);
  const bool ok = rows.size() == 19 && worst <= kSweepTol && ordered && dominated && problems.empty();
  return {ok, fmt("19 points, max |descent - grid| = %.2e", worst) + (ordered ? ", ordered" : ", ORDER BROKEN") +
                  (dominated ? ", rectified > unrectified" : ", DOMINANCE BROKEN")};
}

Outcome worked_optimum() {
  const double descent = run_dynamics({.t_a = 0.3}).s_converged;
  const double grid = grid_optimum(0.3);
  const bool ok = std::abs(descent - 0.65) <= kWorkedTol && std::abs(grid - 0.65) <= kWorkedTol;
  return {ok, fmt("s* = %.8f (grid %.6f)", descent, grid)};
}

// Shared blobs setup for the ablation criteria.
struct Blobs {
  Dataset train = make_blobs(4, 200, 2, 1.2, 1, 0);
  Dataset val = make_blobs(4, 200, 2, 1.2, 1, 1);
  MlpParams teacher;
  double teacher_acc = 0.0;
  std::vector<std::size_t> student{2, 8, 4};
  TrainConfig base;  // E = 60, lr 0.01, batch-mean KD

  Blobs() {
    const std::vector<std::size_t> dims{2, 64, 4};
    const auto run = train_teacher(train, val, dims, TrainConfig::teacher_defaults());
    teacher = run.params;
    teacher_acc = run.metrics.back().train_acc;
  }

  std::vector<AblationSummary> medians(const std::vector<DistillMode>& modes) const {
    const long probe = static_cast<long>(std::ceil(0.1 * static_cast<double>(base.epochs)));
    const auto rows = run_ablation(teacher, train, val, student, base, modes, 5, probe);
    return summarize_ablation(rows, modes);
  }
};

Outcome teacher_gate(const Blobs& b) {
  if (b.teacher_acc >= kTeacherMinAcc) return {true, ""};
  return {false, fmt("teacher train acc %.4f below %.2f", b.teacher_acc, kTeacherMinAcc)};
}

Outcome step_c_vs_step_b(const Blobs& b) {
  if (auto gate = teacher_gate(b); !gate.pass) return gate;
  const auto m = b.medians({DistillMode::step_b_ablation(), DistillMode::full()});
  const double sb = m[0].median_val_acc;
  const double sc = m[1].median_val_acc;
  return {sc >= sb, fmt("teacher %.4f; median val step-c %.4f vs step-b %.4f", b.teacher_acc, sc, sb)};
}

Outcome module_ordering(const Blobs& b) {
  if (auto gate = teacher_gate(b); !gate.pass) return gate;
  const auto m = b.medians({DistillMode::full(), DistillMode::eliminate_only(), DistillMode::vanilla_kd()});
  const double full = m[0].median_val_acc;
  const double elim = m[1].median_val_acc;
  const double van = m[2].median_val_acc;
  const bool ok = full >= elim - kOrderSlack && elim >= van - kOrderSlack;
  return {ok, fmt("median val full %.4f, eliminate %.4f, vanilla %.4f", full, elim, van)};
}

Outcome dynamic_schedule(const Blobs& b) {
  if (auto gate = teacher_gate(b); !gate.pass) return gate;
  const auto m = b.medians({DistillMode::full(), DistillMode::with_fixed_gamma(0.5)});
  const double dyn = m[0].median_val_acc_probe;
  const double fixed = m[1].median_val_acc_probe;
  return {dyn >= fixed, fmt("median val @epoch 6: gamma=e/E %.4f vs fixed 0.5 %.4f", dyn, fixed)};
}

Outcome end_to_end_gradient() {
  double worst = 0.0;
  for (std::uint64_t seed : {11u, 12u}) {
    const auto p = rd_test::gradient_problem(seed);
    for (const auto& mode : rd_test::all_modes()) {
      worst = std::max(worst, rd_test::param_gradient_error(p.student, p.ds, p.targets, mode, {3, 5}, 1.0, kFdStep));
    }
  }
  return {worst <= kE2eGradTol, fmt("6 modes, 2-4-3 net, max |analytic - fd| = %.2e", worst)};
}

int cli(const std::string& args) {
  const std::string cmd = std::string(RECTIDISTILL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism(const fs::path& work) {
  const fs::path data = work / "data";
  const std::string inputs = " --train " + (data / "train.csv").string() + " --val " + (data / "val.csv").string() +
                             " --teacher " + (data / "teacher.ckpt").string();
  for (const char* run : {"run1", "run2"}) {
    if (int rc = cli("distill" + inputs + " --out " + (work / run).string()); rc != 0) {
      return {false, "distill exited with " + std::to_string(rc)};
    }
  }
  bool ok = true;
  std::string detail;
  for (const char* f : {"metrics.csv", "student.ckpt", "summary.json"}) {
    const std::string a = slurp(work / "run1" / f);
    const bool same = !a.empty() && a == slurp(work / "run2" / f);
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : ", ") + f + (same ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  report(1, "gradient fidelity", 5, gradient_fidelity);
  report(2, "KL non-negativity", 2, kl_nonnegative);
  report(3, "rectification invariants", 5, rectification_invariants);
  report(4, "two-class sweep", 10, two_class_sweep);
  report(5, "worked optimum t_a=0.3", 10, worked_optimum);

  const auto setup_start = std::chrono::steady_clock::now();
  const Blobs blobs;
  const double setup = std::chrono::duration<double>(std::chrono::steady_clock::now() - setup_start).count();
  std::printf("     teacher 2-64-4: train acc %.4f (%.2fs)\n", blobs.teacher_acc, setup);
  report(6, "step-c >= step-b", 180, [&] { return step_c_vs_step_b(blobs); });
  report(7, "full >= eliminate >= vanilla", 300, [&] { return module_ordering(blobs); });
  report(8, "dynamic gamma >= fixed 0.5", 300, [&] { return dynamic_schedule(blobs); });
  report(9, "end-to-end gradient", 10, end_to_end_gradient);

  // The CLI needs a dataset and teacher on disk; build them untimed.
  const fs::path work = fs::temp_directory_path() / "rectidistill_acceptance";
  fs::remove_all(work);
  const std::string data = (work / "data").string();
  const bool staged = cli("gen-data --out " + data) == 0 && cli("train-teacher --out " + data) == 0;
  report(10, "distill determinism", 60, [&] {
    return staged ? cli_determinism(work) : Outcome{false, "could not stage data and teacher"};
  });

  fs::remove_all(work);
  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
