#pragma once

// Per-sample pieces of the distillation objective, shared by the serial and
// OpenMP kernels.

#include <cstddef>
#include <vector>

#include "rectidistill/kernels.hpp"

namespace rectidistill::kernels::detail {

enum class Role : unsigned char { easy, hard, none };

/// Which KD term a sample feeds, given the mode and its mask flag.
inline Role role_for(DistillKind kind, bool right) {
  switch (kind) {
    case DistillKind::vanilla_kd:
    case DistillKind::rectify_only:
      return Role::easy;
    case DistillKind::eliminate_only:
      return right ? Role::easy : Role::none;
    case DistillKind::full:
    case DistillKind::step_b_ablation:
    case DistillKind::fixed_gamma:
      return right ? Role::easy : Role::hard;
  }
  return Role::none;
}

struct SampleTerms {
  Role role = Role::none;
  double ce = 0.0;
  double kl = 0.0;
  std::vector<double> g_ce;
  std::vector<double> g_kl;
};

struct BatchPlan {
  double gamma = 0.0;
  std::vector<unsigned char> right;
  std::vector<Role> roles;
  std::size_t n_right = 0;
  std::size_t n_easy = 0;
  std::size_t n_hard = 0;
  double easy_norm = 1.0;
  double hard_norm = 1.0;
};

void set_normalizers(BatchPlan& plan, KdReduction reduction, std::size_t n);

SampleTerms sample_terms(const BatchInputs& in, std::size_t i, Role role);

/// (1 - gamma) * (g_ce / n + [easy] g_kl / easy_norm) + gamma * [hard] g_kl / hard_norm
std::vector<double> combine_gradient(const SampleTerms& terms, const BatchPlan& plan, std::size_t n);

LossBreakdown finish_loss(double sum_ce, double sum_easy, double sum_hard, const BatchPlan& plan,
                          std::size_t n);

}  // namespace rectidistill::kernels::detail
