#include "rectidistill/rectify.hpp"

#include <string>

#include "rectidistill/error.hpp"
#include "rectidistill/kernels.hpp"

namespace rectidistill {

RectifiedTarget rectify_step_b(const ProbVector& t, std::size_t a, std::size_t b) {
  if (a >= t.size() || b >= t.size()) fail(ErrorCode::invalid_input, "class index out of range");
  if (a == b) fail(ErrorCode::rectify_not_applicable, "teacher argmax already equals the label");
  if (argmax(t.values()) != b) {
    fail(ErrorCode::invalid_partner, "class " + std::to_string(b) + " is not the teacher argmax");
  }
  RectifiedTarget out;
  out.values.assign(t.values().begin(), t.values().end());
  out.stage = RectifyStage::step_b;
  out.a = a;
  out.b = b;
  out.values[a] = (t[a] + 1.0) / 2.0;
  out.values[b] = t[b] / 2.0;
  return out;
}

RectifiedTarget rectify_step_c(const RectifiedTarget& step_b_result, double t_a, double t_b) {
  if (step_b_result.stage != RectifyStage::step_b) {
    fail(ErrorCode::invalid_input, "step c expects a step-b target");
  }
  const double pair = t_a + t_b;
  if (!(pair > 0.0)) fail(ErrorCode::degenerate_pair, "t_a + t_b must be positive");
  RectifiedTarget out = step_b_result;
  const double scale = pair / (out.values[out.a] + out.values[out.b]);
  out.values[out.a] *= scale;
  out.values[out.b] *= scale;
  out.stage = RectifyStage::step_c;
  return out;
}

RectifiedTarget rectify(const ProbVector& t, OneHotLabel label, RectifyStage stage) {
  const std::size_t a = label.class_index;
  const std::size_t b = argmax(t.values());
  RectifiedTarget step_b = rectify_step_b(t, a, b);
  if (stage == RectifyStage::step_b) return step_b;
  return rectify_step_c(step_b, t[a], t[b]);
}

std::vector<RectifiedTarget> rectify_batch(std::span<const ProbVector> teacher_probs,
                                           std::span<const OneHotLabel> labels, RectifyStage mode) {
  return kernels::omp::rectify_batch(teacher_probs, labels, mode);
}

}  // namespace rectidistill
