#include "rectidistill/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "rectidistill/error.hpp"
#include "rectidistill/kernels.hpp"
#include "rectidistill/partition.hpp"
#include "rectidistill/rng.hpp"

namespace rectidistill {

namespace {

// Stream id separating student initialisation from batch shuffling.
constexpr std::uint64_t kInitStream = 0x696e6974ULL;

void check_dims(std::span<const std::size_t> dims, const Dataset& train, const char* who) {
  if (dims.size() < 2) fail(ErrorCode::invalid_architecture, std::string(who) + " needs at least two widths");
  if (dims.front() != train.dim) {
    fail(ErrorCode::config, std::string(who) + " input width " + std::to_string(dims.front()) +
                                " does not match dataset width " + std::to_string(train.dim));
  }
  if (dims.back() < train.n_classes) {
    fail(ErrorCode::config, std::string(who) + " has " + std::to_string(dims.back()) +
                                " outputs but the data has " + std::to_string(train.n_classes) + " classes");
  }
}

std::vector<LogitVector> logits_for(const MlpParams& p, const Dataset& ds, std::span<const std::size_t> rows) {
  std::vector<LogitVector> out;
  out.reserve(rows.size());
  for (std::size_t i : rows) {
    try {
      out.push_back(forward(p, ds.row(i)));
    } catch (const Error& e) {
      fail(ErrorCode::training_diverged, "non-finite logits: " + e.detail());
    }
  }
  return out;
}

}  // namespace

TrainConfig TrainConfig::teacher_defaults() {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  return cfg;
}

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) fail(ErrorCode::invalid_parameter, "learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::invalid_parameter, "momentum must be in [0, 1)");
  if (epochs < 1) fail(ErrorCode::invalid_parameter, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::invalid_parameter, "batch size must be >= 1");
  check_temperature(tau);
  if (mode.kind == DistillKind::fixed_gamma && !(mode.fixed_gamma >= 0.0 && mode.fixed_gamma <= 1.0)) {
    fail(ErrorCode::invalid_parameter, "fixed gamma must be in [0, 1]");
  }
}

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out) {
  out << "epoch,gamma,loss_total,loss_ce,loss_easy,loss_hard,train_acc,val_acc,teacher_right_fraction\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.gamma,
                  r.loss_total, r.loss_ce, r.loss_easy, r.loss_hard, r.train_acc, r.val_acc,
                  r.teacher_right_fraction);
    out << buf;
  }
}

TrainResult train_teacher(const Dataset& train, const Dataset& val, std::span<const std::size_t> dims,
                          const TrainConfig& cfg) {
  cfg.validate();
  train.validate();
  val.validate();
  check_dims(dims, train, "teacher");

  TrainResult result;
  result.params = init_mlp(dims, derive_seed(cfg.seed, kInitStream));
  MlpParams velocity = result.params.zeros_like();
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    double ce_sum = 0.0;
    std::size_t batches = 0;
    for (const auto& batch : batch_iter(train, cfg.batch_size, cfg.seed, static_cast<std::uint64_t>(epoch))) {
      ParamGradients grads = result.params.zeros_like();
      const auto logits = logits_for(result.params, train, batch);
      double batch_ce = 0.0;
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const OneHotLabel y = train.label(batch[k]);
        batch_ce += cross_entropy_logits(y, logits[k]);
        GradientVector g = ce_softmax_gradient(logits[k], y);
        for (auto& v : g.values) v /= static_cast<double>(batch.size());
        accumulate_backward(result.params, train.row(batch[k]), g.values, grads);
      }
      sgd_step(result.params, grads, velocity, cfg.learning_rate, cfg.momentum);
      ce_sum += batch_ce / static_cast<double>(batch.size());
      ++batches;
    }
    MetricsRow row;
    row.epoch = epoch;
    row.loss_ce = ce_sum / static_cast<double>(batches);
    row.loss_total = row.loss_ce;
    row.train_acc = evaluate(result.params, train).accuracy;
    row.val_acc = evaluate(result.params, val).accuracy;
    row.teacher_right_fraction = row.train_acc;
    result.metrics.push_back(row);
  }
  return result;
}

std::vector<ProbVector> teacher_targets(const MlpParams& teacher, const Dataset& ds, double tau) {
  const kernels::LogitMatrix logits = kernels::omp::forward_rows(teacher, ds);
  std::vector<ProbVector> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back(softmax(LogitVector(std::vector<double>(logits.row(i).begin(), logits.row(i).end())), tau));
  }
  return out;
}

TrainResult distill(const MlpParams& teacher, const Dataset& train, const Dataset& val,
                    std::span<const std::size_t> student_dims, const TrainConfig& cfg) {
  cfg.validate();
  train.validate();
  val.validate();
  teacher.validate();
  check_dims(student_dims, train, "student");
  if (teacher.input_width() != train.dim) fail(ErrorCode::config, "teacher input width does not match the data");
  if (teacher.output_width() != student_dims.back()) {
    fail(ErrorCode::config, "teacher has " + std::to_string(teacher.output_width()) + " classes, student has " +
                                std::to_string(student_dims.back()));
  }

  const std::vector<ProbVector> targets = teacher_targets(teacher, train, cfg.tau);
  std::vector<OneHotLabel> all_labels;
  all_labels.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) all_labels.push_back(train.label(i));
  const double right_fraction =
      static_cast<double>(build_mask(targets, all_labels).count_right()) / static_cast<double>(train.size());

  TrainResult result;
  result.params = init_mlp(student_dims, derive_seed(cfg.seed, kInitStream));
  MlpParams velocity = result.params.zeros_like();
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EpochSchedule sched{epoch, cfg.epochs};
    MetricsRow row;
    row.epoch = epoch;
    row.gamma = effective_gamma(cfg.mode, sched);
    std::size_t batches = 0;
    for (const auto& batch : batch_iter(train, cfg.batch_size, cfg.seed, static_cast<std::uint64_t>(epoch))) {
      const auto logits = logits_for(result.params, train, batch);
      std::vector<ProbVector> batch_targets;
      std::vector<OneHotLabel> labels;
      batch_targets.reserve(batch.size());
      labels.reserve(batch.size());
      for (std::size_t i : batch) {
        batch_targets.push_back(targets[i]);
        labels.push_back(all_labels[i]);
      }
      const BatchInputs in{logits, batch_targets, labels, sched, cfg.tau, cfg.mode, cfg.reduction};
      const BatchObjective obj = batch_objective(in);

      ParamGradients grads = result.params.zeros_like();
      for (std::size_t k = 0; k < batch.size(); ++k) {
        accumulate_backward(result.params, train.row(batch[k]), obj.gradients[k].values, grads);
      }
      sgd_step(result.params, grads, velocity, cfg.learning_rate, cfg.momentum);

      row.loss_total += obj.loss.l_all;
      row.loss_ce += obj.loss.l_ce;
      row.loss_easy += obj.loss.l_easy;
      row.loss_hard += obj.loss.l_hard;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    row.loss_total /= nb;
    row.loss_ce /= nb;
    row.loss_easy /= nb;
    row.loss_hard /= nb;
    row.train_acc = evaluate(result.params, train).accuracy;
    row.val_acc = evaluate(result.params, val).accuracy;
    row.teacher_right_fraction = right_fraction;
    result.metrics.push_back(row);
  }
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::invalid_input, "median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<AblationRow> run_ablation(const MlpParams& teacher, const Dataset& train, const Dataset& val,
                                      std::span<const std::size_t> student_dims, const TrainConfig& base,
                                      std::span<const DistillMode> modes, std::size_t n_seeds,
                                      long probe_epochs) {
  if (n_seeds == 0) fail(ErrorCode::invalid_parameter, "need at least one seed");
  if (probe_epochs < 1 || probe_epochs > base.epochs) {
    fail(ErrorCode::invalid_parameter, "probe epoch must be in [1, epochs]");
  }
  std::vector<AblationRow> rows;
  for (std::size_t k = 0; k < n_seeds; ++k) {
    for (const DistillMode& mode : modes) {
      TrainConfig cfg = base;
      cfg.seed = base.seed + k;
      cfg.mode = mode;
      const TrainResult run = distill(teacher, train, val, student_dims, cfg);
      rows.push_back({cfg.seed, mode.name(), run.metrics.back().val_acc,
                      run.metrics[static_cast<std::size_t>(probe_epochs - 1)].val_acc});
    }
  }
  return rows;
}

std::vector<AblationSummary> summarize_ablation(std::span<const AblationRow> rows,
                                                std::span<const DistillMode> modes) {
  std::vector<AblationSummary> out;
  for (const DistillMode& mode : modes) {
    std::vector<double> finals;
    std::vector<double> probes;
    for (const auto& row : rows) {
      if (row.mode != mode.name()) continue;
      finals.push_back(row.val_acc);
      probes.push_back(row.val_acc_probe);
    }
    if (finals.empty()) continue;
    out.push_back({mode.name(), median(finals), median(probes)});
  }
  return out;
}

}  // namespace rectidistill
