#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rectidistill {

/// Two classes a (true, y_a = 1) and b (y_b = 0) with teacher t = [t_a, 1 - t_a].
/// The student is a single logit pair, s = softmax(z_a, z_b), trained on
/// w_kl * KL(t || s) + w_ce * CE(y, s).
struct TwoClassSetup {
  double t_a = 0.5;
  double w_kl = 1.0;
  double w_ce = 1.0;
  double learning_rate = 1.0;
  std::size_t steps = 20000;

  /// Throws invalid_setup.
  void validate() const;
};

enum class OrderingVerdict {
  between_teacher_and_label,  // correct teacher: t_a < s_a < 1
  pulled_below_ce,            // wrong teacher: s_a held below the CE-only optimum
  violated,
};

std::string_view to_string(OrderingVerdict v);

struct DynamicsReport {
  std::vector<double> s_trajectory;  // s_a after each step
  double s_converged = 0.0;
  double s_optimum = 0.0;  // two_class_optimum for the same objective
  double s_ce_only = 1.0;  // supremum, never attained
  double s_kl_only = 0.0;  // the KL target's class-a mass
  double kl_target_a = 0.0;
  bool converged = false;
  std::size_t steps_taken = 0;
  OrderingVerdict verdict = OrderingVerdict::violated;
};

/// argmin over s in (0, 1) of
///   w_kl * [t_a ln(t_a / s) + t_b ln(t_b / (1 - s))] - w_ce ln s
/// by golden-section search; cross-checked against the stationary point
/// (w_kl t_a + w_ce) / (w_kl + w_ce). Returns 1 (the supremum) when w_kl = 0.
double two_class_optimum(const TwoClassSetup& setup);

/// Same minimisation for an arbitrary two-class KL target [target_a, 1 - target_a].
double two_class_optimum_for_target(double target_a, double w_kl, double w_ce);

/// Gradient descent on the logit pair from z = 0 using the closed-form CE and
/// KL softmax gradients. Non-convergence is reported, not thrown.
DynamicsReport run_dynamics(const TwoClassSetup& setup);

/// Wrong-teacher run (t_a < 0.5). With rectify the KL target is the two-step
/// rectified teacher; otherwise the raw teacher. Throws rectify_not_applicable
/// when t_a >= 0.5.
DynamicsReport rectified_dynamics(const TwoClassSetup& setup, bool rectify);

struct RectificationPair {
  DynamicsReport unrectified;
  DynamicsReport rectified;
};

RectificationPair compare_rectification(const TwoClassSetup& setup);

struct SweepRow {
  double t_a = 0.0;
  double s_unrect = 0.0;
  double s_rect = 0.0;  // equals s_unrect for correct teachers (nothing to rectify)
  double s_ce_only = 1.0;
  double s_optimum = 0.0;
  double s_rect_optimum = 0.0;
  bool converged = false;
  OrderingVerdict verdict = OrderingVerdict::violated;
};

/// {0.05, 0.10, ..., 0.95}.
std::vector<double> default_sweep_grid();

/// One row per grid point, ordered as the grid. Points run in parallel.
std::vector<SweepRow> run_sweep(std::span<const double> grid, const TwoClassSetup& base);

/// Human-readable descriptions of every violated invariant; empty on PASS.
/// Checks descent-vs-optimum agreement (1e-4), correct-teacher ordering,
/// wrong-teacher pull with monotone decrease in t_a, and rectification
/// dominance.
std::vector<std::string> check_sweep(std::span<const SweepRow> rows);

/// `t_a,s_unrect,s_rect,s_ce_only,verdict`
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

}  // namespace rectidistill
