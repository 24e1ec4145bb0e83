#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rectidistill/numerics.hpp"

namespace rectidistill {

enum class RectifyStage { step_b, step_c };

/// A corrected teacher target for one biased sample.
///
/// Step b averages the pair (a, b) with the one-hot label:
///   t'_a = (t_a + 1) / 2,  t'_b = t_b / 2,  t'_o = t_o.
/// Its mass exceeds 1 by (1 - t_a - t_b) / 2. Step c rescales only the pair
/// by (t_a + t_b) / (t'_a + t'_b), which restores unit mass while leaving every
/// other class bit-identical to the teacher.
struct RectifiedTarget {
  std::vector<double> values;
  RectifyStage stage = RectifyStage::step_b;
  std::size_t a = 0;  // true class
  std::size_t b = 0;  // teacher argmax
};

/// Throws rectify_not_applicable if a == b and invalid_partner unless b is the
/// (lowest-index) argmax of t.
RectifiedTarget rectify_step_b(const ProbVector& t, std::size_t a, std::size_t b);

/// t_a, t_b are the teacher's original pair values. Throws degenerate_pair
/// when t_a + t_b == 0.
RectifiedTarget rectify_step_c(const RectifiedTarget& step_b_result, double t_a, double t_b);

/// Both steps for a single biased sample, a = label, b = argmax(t).
RectifiedTarget rectify(const ProbVector& t, OneHotLabel label, RectifyStage stage);

/// Per-sample rectification of a bias subset. Every sample must be
/// mispredicted, otherwise invalid_subset names the offending index.
/// Runs on the OpenMP kernel; output order matches input order.
std::vector<RectifiedTarget> rectify_batch(std::span<const ProbVector> teacher_probs,
                                           std::span<const OneHotLabel> labels, RectifyStage mode);

}  // namespace rectidistill
