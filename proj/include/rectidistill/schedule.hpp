#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rectidistill/numerics.hpp"

namespace rectidistill {

struct EpochSchedule {
  long epoch = 0;
  long total_epochs = 1;
};

/// gamma = e / E for 0 <= e < E; never reaches 1.
double gamma(const EpochSchedule& sched);

enum class DistillKind {
  full,             // mask + step-c rectification + gamma = e/E
  eliminate_only,   // mask only: biased samples leave the KD term, gamma = 0
  rectify_only,     // unmasked KD against rectified targets, gamma = 0
  vanilla_kd,       // plain CE + KL over the whole batch
  step_b_ablation,  // full, but hard targets stop after step b
  fixed_gamma,      // full with a constant gamma
};

struct DistillMode {
  DistillKind kind = DistillKind::full;
  double fixed_gamma = 0.5;

  static DistillMode full() { return {DistillKind::full, 0.0}; }
  static DistillMode eliminate_only() { return {DistillKind::eliminate_only, 0.0}; }
  static DistillMode rectify_only() { return {DistillKind::rectify_only, 0.0}; }
  static DistillMode vanilla_kd() { return {DistillKind::vanilla_kd, 0.0}; }
  static DistillMode step_b_ablation() { return {DistillKind::step_b_ablation, 0.0}; }
  static DistillMode with_fixed_gamma(double g) { return {DistillKind::fixed_gamma, g}; }

  /// Accepts the CLI spellings: full, eliminate, rectify, vanilla, step-b,
  /// fixed-gamma=G with G in [0, 1].
  static DistillMode parse(std::string_view text);
  std::string name() const;

  friend bool operator==(const DistillMode&, const DistillMode&) = default;
};

/// Divisor for the KD sums. batch_mean divides both the easy and the hard
/// sum by the full batch size, which is what masking the teacher and student
/// distributions inside one batch-averaged KL gives. subset_mean divides each
/// sum by its own subset size.
enum class KdReduction { batch_mean, subset_mean };

KdReduction parse_reduction(std::string_view text);
std::string_view to_string(KdReduction r);

/// The gamma a mode actually applies at this point of the schedule.
double effective_gamma(const DistillMode& mode, const EpochSchedule& sched);

/// l_all = (1 - gamma) * (l_ce + l_easy) + gamma * l_hard.
///
/// l_ce averages over the whole batch. l_easy sums KL over the right subset
/// and l_hard over the bias subset, each divided per KdReduction; an empty
/// subset contributes 0. In vanilla_kd and rectify_only the single unmasked
/// KD term is reported in l_easy.
struct LossBreakdown {
  double l_ce = 0.0;
  double l_easy = 0.0;
  double l_hard = 0.0;
  double gamma = 0.0;
  double l_all = 0.0;
  std::size_t n_right = 0;
  std::size_t n_bias = 0;
};

struct BatchObjective {
  LossBreakdown loss;
  std::vector<GradientVector> gradients;  // w.r.t. student logits, one per sample
};

/// Inputs shared by the loss and gradient entry points. Teacher
/// probabilities are softmax(teacher_logits / tau) and are treated as
/// constants. The CE term uses the student's tau = 1 prediction; KD terms use
/// softmax(student_logits / tau).
struct BatchInputs {
  std::span<const LogitVector> student_logits;
  std::span<const ProbVector> teacher_probs;
  std::span<const OneHotLabel> labels;
  EpochSchedule sched;
  double tau = 1.0;
  DistillMode mode;
  KdReduction reduction = KdReduction::batch_mean;
};

LossBreakdown compute_batch_loss(const BatchInputs& in);
std::vector<GradientVector> batch_loss_gradient(const BatchInputs& in);
BatchObjective batch_objective(const BatchInputs& in);

}  // namespace rectidistill
