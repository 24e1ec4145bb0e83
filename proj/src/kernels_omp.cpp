#include <omp.h>

#include <exception>
#include <string>

#include "kernel_terms.hpp"
#include "rectidistill/error.hpp"

namespace rectidistill::kernels::omp {

namespace {

// Small batches are not worth waking the thread team for.
constexpr std::ptrdiff_t kParallelThreshold = 64;

// Exceptions may not cross an OpenMP region boundary: park them per sample
// and rethrow the lowest-index one afterwards.
void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

}  // namespace

BatchObjective batch_objective(const BatchInputs& in) {
  detail::check_batch(in);
  const auto n = static_cast<std::ptrdiff_t>(in.labels.size());
  const auto count = in.labels.size();

  detail::BatchPlan plan;
  plan.gamma = effective_gamma(in.mode, in.sched);
  plan.right.resize(count);
  plan.roles.resize(count);
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const bool right = argmax(in.teacher_probs[i].values()) == in.labels[i].class_index;
    plan.right[i] = right;
    plan.roles[i] = detail::role_for(in.mode.kind, right);
  }
  for (std::size_t i = 0; i < count; ++i) {
    plan.n_right += plan.right[i];
    plan.n_easy += plan.roles[i] == detail::Role::easy;
    plan.n_hard += plan.roles[i] == detail::Role::hard;
  }
  detail::set_normalizers(plan, in.reduction, count);

  std::vector<double> ce(count, 0.0);
  std::vector<double> kl(count, 0.0);
  std::vector<std::exception_ptr> errors(count);
  BatchObjective out;
  out.gradients.resize(count);

#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      try {
        const detail::SampleTerms terms = detail::sample_terms(in, i, plan.roles[i]);
        ce[i] = terms.ce;
        kl[i] = terms.kl;
        out.gradients[i].values = detail::combine_gradient(terms, plan, count);
      } catch (const Error&) {
        detail::rethrow_with_sample(i);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);

  double sum_ce = 0.0;
  double sum_easy = 0.0;
  double sum_hard = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    sum_ce += ce[i];
    if (plan.roles[i] == detail::Role::easy) sum_easy += kl[i];
    if (plan.roles[i] == detail::Role::hard) sum_hard += kl[i];
  }
  out.loss = detail::finish_loss(sum_ce, sum_easy, sum_hard, plan, count);
  return out;
}

std::vector<RectifiedTarget> rectify_batch(std::span<const ProbVector> teacher_probs,
                                           std::span<const OneHotLabel> labels, RectifyStage mode) {
  if (teacher_probs.size() != labels.size()) fail(ErrorCode::invalid_batch, "batch sizes differ");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].class_index >= teacher_probs[i].size()) {
      fail(ErrorCode::invalid_batch, "sample " + std::to_string(i) + ": label out of range");
    }
    if (argmax(teacher_probs[i].values()) == labels[i].class_index) {
      fail(ErrorCode::invalid_subset, "sample " + std::to_string(i) + " is not a biased prediction");
    }
  }
  const auto n = static_cast<std::ptrdiff_t>(labels.size());
  std::vector<RectifiedTarget> out(labels.size());
  std::vector<std::exception_ptr> errors(labels.size());
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = rectify(teacher_probs[i], labels[i], mode);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return out;
}

LogitMatrix forward_rows(const MlpParams& p, const Dataset& ds) {
  if (ds.dim != p.input_width()) fail(ErrorCode::invalid_input, "dataset width does not match the model");
  LogitMatrix out{p.output_width(), std::vector<double>(ds.size() * p.output_width())};
  const auto n = static_cast<std::ptrdiff_t>(ds.size());
  const std::size_t width = out.n_classes;
#pragma omp parallel for schedule(static) if (n >= kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    forward_into(p, ds.row(i), {out.values.data() + i * width, width});
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

}  // namespace rectidistill::kernels::omp
