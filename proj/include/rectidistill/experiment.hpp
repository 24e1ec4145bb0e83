#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rectidistill/data.hpp"
#include "rectidistill/model.hpp"
#include "rectidistill/schedule.hpp"

namespace rectidistill {

/// Defaults are the student settings used by the ablation experiments: plain
/// SGD slow enough that early-epoch accuracy still differs between schedules.
struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.0;
  long epochs = 60;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double tau = 1.0;
  DistillMode mode = DistillMode::full();
  KdReduction reduction = KdReduction::batch_mean;

  /// Teacher settings: SGD with momentum 0.9 at lr 0.05.
  static TrainConfig teacher_defaults();

  /// Throws invalid_parameter.
  void validate() const;
};

/// One row per epoch. gamma is the coefficient the mode actually applied.
struct MetricsRow {
  long epoch = 0;
  double gamma = 0.0;
  double loss_total = 0.0;
  double loss_ce = 0.0;
  double loss_easy = 0.0;
  double loss_hard = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double teacher_right_fraction = 0.0;
};

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out);

struct TrainResult {
  MlpParams params;
  std::vector<MetricsRow> metrics;
};

/// Plain cross-entropy training. teacher_right_fraction holds the model's own
/// training accuracy.
TrainResult train_teacher(const Dataset& train, const Dataset& val, std::span<const std::size_t> dims,
                          const TrainConfig& cfg);

/// Teacher probabilities softmax(teacher(x) / tau) for every row.
std::vector<ProbVector> teacher_targets(const MlpParams& teacher, const Dataset& ds, double tau);

/// Distils a student of shape `student_dims` from a frozen teacher.
TrainResult distill(const MlpParams& teacher, const Dataset& train, const Dataset& val,
                    std::span<const std::size_t> student_dims, const TrainConfig& cfg);

struct AblationRow {
  std::uint64_t seed = 0;
  std::string mode;
  double val_acc = 0.0;        // after the last epoch
  double val_acc_probe = 0.0;  // after `probe_epochs` epochs
};

struct AblationSummary {
  std::string mode;
  double median_val_acc = 0.0;
  double median_val_acc_probe = 0.0;
};

/// Runs every mode for seeds base_seed .. base_seed + n_seeds - 1, in that
/// order (seed-major). probe_epochs counts completed epochs (1-based).
std::vector<AblationRow> run_ablation(const MlpParams& teacher, const Dataset& train, const Dataset& val,
                                      std::span<const std::size_t> student_dims, const TrainConfig& base,
                                      std::span<const DistillMode> modes, std::size_t n_seeds,
                                      long probe_epochs);

std::vector<AblationSummary> summarize_ablation(std::span<const AblationRow> rows,
                                                std::span<const DistillMode> modes);

double median(std::vector<double> values);

}  // namespace rectidistill
