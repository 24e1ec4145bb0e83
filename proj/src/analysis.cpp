#include "rectidistill/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>

#include "rectidistill/error.hpp"
#include "rectidistill/numerics.hpp"
#include "rectidistill/rectify.hpp"

namespace rectidistill {

namespace {

constexpr double kGoldenTolerance = 1e-10;
constexpr double kClosedFormTolerance = 1e-6;
constexpr double kGradientTolerance = 1e-13;
constexpr double kAgreementTolerance = 1e-4;

double objective(double s, double target_a, double w_kl, double w_ce) {
  const double target_b = 1.0 - target_a;
  double kl = 0.0;
  if (target_a > 0.0) kl += target_a * std::log(target_a / s);
  if (target_b > 0.0) kl += target_b * std::log(target_b / (1.0 - s));
  return w_kl * kl - w_ce * std::log(s);
}

void check_weights(double w_kl, double w_ce) {
  if (!std::isfinite(w_kl) || !std::isfinite(w_ce) || w_kl < 0.0 || w_ce < 0.0 || (w_kl == 0.0 && w_ce == 0.0)) {
    fail(ErrorCode::invalid_setup, "loss weights must be >= 0 and not both 0");
  }
}

DynamicsReport descend(const TwoClassSetup& setup, double target_a, bool teacher_correct) {
  DynamicsReport report;
  report.kl_target_a = target_a;
  report.s_kl_only = target_a;
  report.s_ce_only = 1.0;
  report.s_optimum = two_class_optimum_for_target(target_a, setup.w_kl, setup.w_ce);
  report.s_trajectory.reserve(setup.steps);

  const std::vector<double> target{target_a, 1.0 - target_a};
  double z_a = 0.0;
  double z_b = 0.0;
  for (std::size_t step = 0; step < setup.steps; ++step) {
    const LogitVector z{z_a, z_b};
    const GradientVector g_ce = ce_softmax_gradient(z, OneHotLabel{0});
    const GradientVector g_kl = kl_softmax_gradient(target, z);
    const double g_a = setup.w_kl * g_kl[0] + setup.w_ce * g_ce[0];
    const double g_b = setup.w_kl * g_kl[1] + setup.w_ce * g_ce[1];
    z_a -= setup.learning_rate * g_a;
    z_b -= setup.learning_rate * g_b;
    report.s_trajectory.push_back(softmax(LogitVector{z_a, z_b})[0]);
    report.steps_taken = step + 1;
    if (std::abs(g_a) < kGradientTolerance && std::abs(g_b) < kGradientTolerance) {
      report.converged = true;
      break;
    }
  }
  report.s_converged = report.s_trajectory.empty() ? 0.5 : report.s_trajectory.back();

  const double s = report.s_converged;
  if (teacher_correct) {
    report.verdict = (setup.t_a < s && s < 1.0) ? OrderingVerdict::between_teacher_and_label
                                                 : OrderingVerdict::violated;
  } else {
    report.verdict = s < report.s_ce_only ? OrderingVerdict::pulled_below_ce : OrderingVerdict::violated;
  }
  return report;
}

bool teacher_is_correct(double t_a) {
  const std::vector<double> t{t_a, 1.0 - t_a};
  return argmax(t) == 0;
}

}  // namespace

void TwoClassSetup::validate() const {
  if (!(t_a > 0.0 && t_a < 1.0)) fail(ErrorCode::invalid_setup, "t_a must lie in (0, 1)");
  check_weights(w_kl, w_ce);
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
    fail(ErrorCode::invalid_setup, "learning rate must be > 0");
  }
  if (steps == 0) fail(ErrorCode::invalid_setup, "steps must be >= 1");
}

std::string_view to_string(OrderingVerdict v) {
  switch (v) {
    case OrderingVerdict::between_teacher_and_label: return "between";
    case OrderingVerdict::pulled_below_ce: return "pulled_below_ce";
    case OrderingVerdict::violated: return "violated";
  }
  return "violated";
}

double two_class_optimum_for_target(double target_a, double w_kl, double w_ce) {
  check_weights(w_kl, w_ce);
  if (!(target_a >= 0.0 && target_a <= 1.0)) fail(ErrorCode::invalid_setup, "target must lie in [0, 1]");
  if (w_kl == 0.0) return 1.0;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0;
  double hi = 1.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = objective(c, target_a, w_kl, w_ce);
  double fd = objective(d, target_a, w_kl, w_ce);
  while (hi - lo > kGoldenTolerance) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = objective(c, target_a, w_kl, w_ce);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = objective(d, target_a, w_kl, w_ce);
    }
  }
  const double found = 0.5 * (lo + hi);
  const double closed_form = (w_kl * target_a + w_ce) / (w_kl + w_ce);
  if (std::abs(found - closed_form) > kClosedFormTolerance) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "golden-section optimum %.12g disagrees with stationary point %.12g", found,
                  closed_form);
    fail(ErrorCode::oracle_failure, buf);
  }
  return found;
}

double two_class_optimum(const TwoClassSetup& setup) {
  setup.validate();
  return two_class_optimum_for_target(setup.t_a, setup.w_kl, setup.w_ce);
}

DynamicsReport run_dynamics(const TwoClassSetup& setup) {
  setup.validate();
  return descend(setup, setup.t_a, teacher_is_correct(setup.t_a));
}

DynamicsReport rectified_dynamics(const TwoClassSetup& setup, bool rectify_target) {
  setup.validate();
  const ProbVector teacher{setup.t_a, 1.0 - setup.t_a};
  // Throws rectify_not_applicable for t_a >= 0.5 even on the control run.
  const RectifiedTarget rectified = rectify(teacher, OneHotLabel{0}, RectifyStage::step_c);
  const double target_a = rectify_target ? rectified.values[0] : setup.t_a;
  return descend(setup, target_a, false);
}

RectificationPair compare_rectification(const TwoClassSetup& setup) {
  return {rectified_dynamics(setup, false), rectified_dynamics(setup, true)};
}

std::vector<double> default_sweep_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(0.05 * k);
  return grid;
}

std::vector<SweepRow> run_sweep(std::span<const double> grid, const TwoClassSetup& base) {
  std::vector<SweepRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      TwoClassSetup setup = base;
      setup.t_a = grid[i];
      SweepRow row;
      row.t_a = setup.t_a;
      const DynamicsReport plain = run_dynamics(setup);
      row.s_unrect = plain.s_converged;
      row.s_optimum = plain.s_optimum;
      row.s_ce_only = plain.s_ce_only;
      row.verdict = plain.verdict;
      row.converged = plain.converged;
      if (teacher_is_correct(setup.t_a)) {
        row.s_rect = row.s_unrect;
        row.s_rect_optimum = row.s_optimum;
      } else {
        const DynamicsReport fixed = rectified_dynamics(setup, true);
        row.s_rect = fixed.s_converged;
        row.s_rect_optimum = fixed.s_optimum;
        row.converged = row.converged && fixed.converged;
      }
      rows[i] = row;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::vector<std::string> check_sweep(std::span<const SweepRow> rows) {
  std::vector<std::string> failures;
  char buf[200];
  const auto report = [&](const char* what, double t_a, double value) {
    std::snprintf(buf, sizeof buf, "t_a=%.4g: %s (%.10g)", t_a, what, value);
    failures.emplace_back(buf);
  };
  for (const auto& row : rows) {
    if (std::abs(row.s_unrect - row.s_optimum) > kAgreementTolerance) {
      report("descent disagrees with the optimum", row.t_a, row.s_unrect - row.s_optimum);
    }
    if (std::abs(row.s_rect - row.s_rect_optimum) > kAgreementTolerance) {
      report("rectified descent disagrees with the optimum", row.t_a, row.s_rect - row.s_rect_optimum);
    }
    if (row.verdict == OrderingVerdict::violated) report("ordering violated", row.t_a, row.s_unrect);
    if (row.t_a > 0.5 && !(row.t_a < row.s_unrect && row.s_unrect < 1.0)) {
      report("correct teacher but s* not in (t_a, 1)", row.t_a, row.s_unrect);
    }
    if (row.t_a < 0.5) {
      if (!(row.s_unrect < row.s_ce_only)) report("wrong teacher did not pull s* below 1", row.t_a, row.s_unrect);
      if (!(row.s_rect > row.s_unrect)) report("rectified s* not above unrectified", row.t_a, row.s_rect);
    }
  }
  // Monotone in t_a: for any two wrong-teacher points, smaller t_a gives smaller s*.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[i].t_a < rows[j].t_a && rows[j].t_a < 0.5 && !(rows[i].s_unrect < rows[j].s_unrect)) {
        report("s* not decreasing as t_a decreases", rows[i].t_a, rows[i].s_unrect);
      }
    }
  }
  return failures;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "t_a,s_unrect,s_rect,s_ce_only,verdict\n";
  char buf[200];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,", row.t_a, row.s_unrect, row.s_rect, row.s_ce_only);
    out << buf << to_string(row.verdict) << '\n';
  }
}

}  // namespace rectidistill
