#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace rectidistill {

/// Raw class scores z. Finite, at least two classes.
class LogitVector {
 public:
  explicit LogitVector(std::vector<double> values);
  LogitVector(std::initializer_list<double> values) : LogitVector(std::vector<double>(values)) {}

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

/// A point on the probability simplex: entries >= 0 summing to 1 within 1e-9.
class ProbVector {
 public:
  static constexpr double sum_tolerance = 1e-9;

  explicit ProbVector(std::vector<double> values);
  ProbVector(std::initializer_list<double> values) : ProbVector(std::vector<double>(values)) {}

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

struct OneHotLabel {
  std::size_t class_index = 0;

  friend bool operator==(const OneHotLabel&, const OneHotLabel&) = default;
};

struct GradientVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Throws invalid_parameter unless tau is finite and > 0.
void check_temperature(double tau);

ProbVector softmax(const LogitVector& z, double tau = 1.0);

/// log softmax(z / tau) via log-sum-exp; never produces -inf for finite z.
std::vector<double> log_softmax(std::span<const double> z, double tau = 1.0);

/// Forward KL, sum t_i ln(t_i / s_i). Terms with t_i = 0 are exactly 0.
double kl_divergence(const ProbVector& t, const ProbVector& s);

/// Same sum over raw vectors. The target need not be normalized, which is
/// what the step-b ablation feeds in.
double kl_divergence(std::span<const double> target, std::span<const double> s);

/// KL(target || softmax(z / tau)) evaluated through log_softmax.
double kl_to_logits(std::span<const double> target, const LogitVector& z, double tau = 1.0);

/// -ln s_c for the true class c.
double cross_entropy(OneHotLabel y, const ProbVector& s);

/// CE(y, softmax(z / tau)) = logsumexp(z / tau) - z_c / tau.
double cross_entropy_logits(OneHotLabel y, const LogitVector& z, double tau = 1.0);

/// d CE(y, softmax(z/tau)) / dz = (s - onehot(y)) / tau.
GradientVector ce_softmax_gradient(const LogitVector& z, OneHotLabel y, double tau = 1.0);

/// d KL(t || softmax(z/tau)) / dz = (s - t) / tau.
GradientVector kl_softmax_gradient(const ProbVector& t, const LogitVector& z, double tau = 1.0);

/// General form for a target of arbitrary mass m = sum(target):
/// (m * s - target) / tau. Reduces to the overload above when m = 1.
GradientVector kl_softmax_gradient(std::span<const double> target, const LogitVector& z,
                                   double tau = 1.0);

using ScalarField = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
GradientVector finite_difference_gradient(const ScalarField& f, std::span<const double> x,
                                          double h = 1e-5);

}  // namespace rectidistill
