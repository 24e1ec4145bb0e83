#include "rectidistill/schedule.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "rectidistill/error.hpp"
#include "rectidistill/kernels.hpp"

namespace rectidistill {

double gamma(const EpochSchedule& sched) {
  if (sched.total_epochs <= 0 || sched.epoch < 0 || sched.epoch >= sched.total_epochs) {
    fail(ErrorCode::invalid_schedule, "epoch " + std::to_string(sched.epoch) + " outside [0, " +
                                          std::to_string(sched.total_epochs) + ")");
  }
  return static_cast<double>(sched.epoch) / static_cast<double>(sched.total_epochs);
}

DistillMode DistillMode::parse(std::string_view text) {
  if (text == "full") return full();
  if (text == "eliminate") return eliminate_only();
  if (text == "rectify") return rectify_only();
  if (text == "vanilla") return vanilla_kd();
  if (text == "step-b") return step_b_ablation();
  constexpr std::string_view prefix = "fixed-gamma=";
  if (text.starts_with(prefix)) {
    const std::string value(text.substr(prefix.size()));
    double g = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), g);
    if (ec == std::errc() && ptr == value.data() + value.size() && g >= 0.0 && g <= 1.0) {
      return with_fixed_gamma(g);
    }
    fail(ErrorCode::config, "fixed-gamma needs a value in [0, 1], got '" + value + "'");
  }
  fail(ErrorCode::config, "unknown mode '" + std::string(text) +
                              "' (expected full|eliminate|rectify|vanilla|step-b|fixed-gamma=G)");
}

std::string DistillMode::name() const {
  switch (kind) {
    case DistillKind::full: return "full";
    case DistillKind::eliminate_only: return "eliminate";
    case DistillKind::rectify_only: return "rectify";
    case DistillKind::vanilla_kd: return "vanilla";
    case DistillKind::step_b_ablation: return "step-b";
    case DistillKind::fixed_gamma: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "fixed-gamma=%.17g", fixed_gamma);
      return buf;
    }
  }
  return "unknown";
}

KdReduction parse_reduction(std::string_view text) {
  if (text == "batch") return KdReduction::batch_mean;
  if (text == "subset") return KdReduction::subset_mean;
  fail(ErrorCode::config, "unknown KD reduction '" + std::string(text) + "' (expected batch|subset)");
}

std::string_view to_string(KdReduction r) { return r == KdReduction::batch_mean ? "batch" : "subset"; }

double effective_gamma(const DistillMode& mode, const EpochSchedule& sched) {
  const double scheduled = gamma(sched);
  switch (mode.kind) {
    case DistillKind::full:
    case DistillKind::step_b_ablation:
      return scheduled;
    case DistillKind::fixed_gamma:
      if (!(mode.fixed_gamma >= 0.0 && mode.fixed_gamma <= 1.0)) {
        fail(ErrorCode::invalid_parameter, "fixed gamma outside [0, 1]");
      }
      return mode.fixed_gamma;
    case DistillKind::eliminate_only:
    case DistillKind::rectify_only:
    case DistillKind::vanilla_kd:
      return 0.0;
  }
  return scheduled;
}

LossBreakdown compute_batch_loss(const BatchInputs& in) {
  return kernels::omp::batch_objective(in).loss;
}

std::vector<GradientVector> batch_loss_gradient(const BatchInputs& in) {
  return kernels::omp::batch_objective(in).gradients;
}

BatchObjective batch_objective(const BatchInputs& in) { return kernels::omp::batch_objective(in); }

}  // namespace rectidistill
