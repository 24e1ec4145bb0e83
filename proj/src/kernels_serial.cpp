#include <exception>
#include <string>

#include "kernel_terms.hpp"
#include "rectidistill/error.hpp"

namespace rectidistill::kernels {

namespace detail {

void check_batch(const BatchInputs& in) {
  const std::size_t n = in.labels.size();
  if (n == 0) fail(ErrorCode::invalid_batch, "empty batch");
  if (in.student_logits.size() != n || in.teacher_probs.size() != n) {
    fail(ErrorCode::invalid_batch, "student, teacher and label batches differ in size");
  }
  check_temperature(in.tau);
  effective_gamma(in.mode, in.sched);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t classes = in.student_logits[i].size();
    if (in.teacher_probs[i].size() != classes) {
      fail(ErrorCode::invalid_batch, "sample " + std::to_string(i) + ": teacher and student class counts differ");
    }
    if (in.labels[i].class_index >= classes) {
      fail(ErrorCode::invalid_batch, "sample " + std::to_string(i) + ": label out of range");
    }
  }
}

void rethrow_with_sample(std::size_t i) {
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), "sample " + std::to_string(i) + ": " + e.detail());
  }
}

SampleTerms sample_terms(const BatchInputs& in, std::size_t i, Role role) {
  const LogitVector& z = in.student_logits[i];
  const OneHotLabel y = in.labels[i];
  const ProbVector& t = in.teacher_probs[i];

  SampleTerms terms;
  terms.role = role;
  terms.ce = cross_entropy_logits(y, z, 1.0);
  terms.g_ce = ce_softmax_gradient(z, y, 1.0).values;
  if (role == Role::none) return terms;

  const bool teacher_right = argmax(t.values()) == y.class_index;
  if (teacher_right || in.mode.kind == DistillKind::vanilla_kd) {
    terms.kl = kl_to_logits(t.values(), z, in.tau);
    terms.g_kl = kl_softmax_gradient(t.values(), z, in.tau).values;
  } else {
    const RectifyStage stage = in.mode.kind == DistillKind::step_b_ablation ? RectifyStage::step_b
                                                                            : RectifyStage::step_c;
    const RectifiedTarget target = rectify(t, y, stage);
    terms.kl = kl_to_logits(target.values, z, in.tau);
    terms.g_kl = kl_softmax_gradient(target.values, z, in.tau).values;
  }
  return terms;
}

std::vector<double> combine_gradient(const SampleTerms& terms, const BatchPlan& plan, std::size_t n) {
  const double keep = 1.0 - plan.gamma;
  std::vector<double> g(terms.g_ce.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double easy_part = terms.g_ce[k] / static_cast<double>(n);
    if (terms.role == Role::easy) easy_part += terms.g_kl[k] / plan.easy_norm;
    g[k] = keep * easy_part;
    if (terms.role == Role::hard) g[k] += plan.gamma * (terms.g_kl[k] / plan.hard_norm);
  }
  return g;
}

LossBreakdown finish_loss(double sum_ce, double sum_easy, double sum_hard, const BatchPlan& plan,
                          std::size_t n) {
  LossBreakdown out;
  out.gamma = plan.gamma;
  out.l_ce = sum_ce / static_cast<double>(n);
  out.l_easy = plan.n_easy ? sum_easy / plan.easy_norm : 0.0;
  out.l_hard = plan.n_hard ? sum_hard / plan.hard_norm : 0.0;
  out.l_all = (1.0 - out.gamma) * (out.l_ce + out.l_easy) + out.gamma * out.l_hard;
  out.n_right = plan.n_right;
  out.n_bias = n - plan.n_right;
  return out;
}

void set_normalizers(BatchPlan& plan, KdReduction reduction, std::size_t n) {
  if (reduction == KdReduction::batch_mean) {
    plan.easy_norm = static_cast<double>(n);
    plan.hard_norm = static_cast<double>(n);
  } else {
    plan.easy_norm = static_cast<double>(plan.n_easy ? plan.n_easy : 1);
    plan.hard_norm = static_cast<double>(plan.n_hard ? plan.n_hard : 1);
  }
}

double mean_ce_from_logits(const LogitMatrix& logits, const Dataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    total += cross_entropy_logits(ds.label(i), LogitVector(std::vector<double>(logits.row(i).begin(), logits.row(i).end())));
  }
  return total / static_cast<double>(ds.size());
}

}  // namespace detail

namespace serial {

BatchObjective batch_objective(const BatchInputs& in) {
  detail::check_batch(in);
  const std::size_t n = in.labels.size();

  detail::BatchPlan plan;
  plan.gamma = effective_gamma(in.mode, in.sched);
  plan.right.resize(n);
  plan.roles.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool right = argmax(in.teacher_probs[i].values()) == in.labels[i].class_index;
    plan.right[i] = right;
    plan.roles[i] = detail::role_for(in.mode.kind, right);
    plan.n_right += right;
    plan.n_easy += plan.roles[i] == detail::Role::easy;
    plan.n_hard += plan.roles[i] == detail::Role::hard;
  }
  detail::set_normalizers(plan, in.reduction, n);

  BatchObjective out;
  out.gradients.resize(n);
  double sum_ce = 0.0;
  double sum_easy = 0.0;
  double sum_hard = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const detail::SampleTerms terms = detail::sample_terms(in, i, plan.roles[i]);
      sum_ce += terms.ce;
      if (terms.role == detail::Role::easy) sum_easy += terms.kl;
      if (terms.role == detail::Role::hard) sum_hard += terms.kl;
      out.gradients[i].values = detail::combine_gradient(terms, plan, n);
    } catch (const Error&) {
      detail::rethrow_with_sample(i);
    }
  }
  out.loss = detail::finish_loss(sum_ce, sum_easy, sum_hard, plan, n);
  return out;
}

std::vector<RectifiedTarget> rectify_batch(std::span<const ProbVector> teacher_probs,
                                           std::span<const OneHotLabel> labels, RectifyStage mode) {
  if (teacher_probs.size() != labels.size()) fail(ErrorCode::invalid_batch, "batch sizes differ");
  std::vector<RectifiedTarget> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].class_index >= teacher_probs[i].size()) {
      fail(ErrorCode::invalid_batch, "sample " + std::to_string(i) + ": label out of range");
    }
    if (argmax(teacher_probs[i].values()) == labels[i].class_index) {
      fail(ErrorCode::invalid_subset, "sample " + std::to_string(i) + " is not a biased prediction");
    }
    out.push_back(rectify(teacher_probs[i], labels[i], mode));
  }
  return out;
}

LogitMatrix forward_rows(const MlpParams& p, const Dataset& ds) {
  if (ds.dim != p.input_width()) fail(ErrorCode::invalid_input, "dataset width does not match the model");
  LogitMatrix out{p.output_width(), std::vector<double>(ds.size() * p.output_width())};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    forward_into(p, ds.row(i), {out.values.data() + i * out.n_classes, out.n_classes});
  }
  return out;
}

EvalResult evaluate(const MlpParams& p, const Dataset& ds) {
  if (ds.size() == 0) fail(ErrorCode::invalid_input, "cannot evaluate on an empty dataset");
  const LogitMatrix logits = forward_rows(p, ds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) hits += argmax(logits.row(i)) == ds.labels[i];
  return {static_cast<double>(hits) / static_cast<double>(ds.size()),
          detail::mean_ce_from_logits(logits, ds)};
}

}  // namespace serial

}  // namespace rectidistill::kernels
