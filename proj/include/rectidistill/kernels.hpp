#pragma once

// Data-parallel kernels. Each kernel exists twice: a plain serial reference
// and an OpenMP version. Per-sample work is independent and every reduction
// runs afterwards in fixed index order, so both produce bit-identical
// results regardless of thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "rectidistill/data.hpp"
#include "rectidistill/model.hpp"
#include "rectidistill/rectify.hpp"
#include "rectidistill/schedule.hpp"

namespace rectidistill::kernels {

/// Row-major logits for a set of sample rows.
struct LogitMatrix {
  std::size_t n_classes = 0;
  std::vector<double> values;

  std::size_t rows() const noexcept { return n_classes ? values.size() / n_classes : 0; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * n_classes, n_classes}; }
};

namespace serial {

BatchObjective batch_objective(const BatchInputs& in);
std::vector<RectifiedTarget> rectify_batch(std::span<const ProbVector> teacher_probs,
                                           std::span<const OneHotLabel> labels, RectifyStage mode);
LogitMatrix forward_rows(const MlpParams& p, const Dataset& ds);
EvalResult evaluate(const MlpParams& p, const Dataset& ds);

}  // namespace serial

namespace omp {

BatchObjective batch_objective(const BatchInputs& in);
std::vector<RectifiedTarget> rectify_batch(std::span<const ProbVector> teacher_probs,
                                           std::span<const OneHotLabel> labels, RectifyStage mode);
LogitMatrix forward_rows(const MlpParams& p, const Dataset& ds);
EvalResult evaluate(const MlpParams& p, const Dataset& ds);

}  // namespace omp

/// Helpers shared by both variants.
namespace detail {

void check_batch(const BatchInputs& in);
/// Rethrows an error raised while handling sample i with the index attached.
[[noreturn]] void rethrow_with_sample(std::size_t i);
double mean_ce_from_logits(const LogitMatrix& logits, const Dataset& ds);

}  // namespace detail

}  // namespace rectidistill::kernels
