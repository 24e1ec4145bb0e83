#include "rectidistill/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rectidistill/error.hpp"

namespace rectidistill {

namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorCode::invalid_input, std::string(what) + " entry " + std::to_string(i) + " is not finite");
    }
  }
}

void check_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    fail(ErrorCode::invalid_input,
         "length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

void check_label(OneHotLabel y, std::size_t n_classes) {
  if (y.class_index >= n_classes) {
    fail(ErrorCode::invalid_input, "label " + std::to_string(y.class_index) + " out of range for " +
                                       std::to_string(n_classes) + " classes");
  }
}

// Shifted, scaled logits and their log normalizer.
double scaled_shift(std::span<const double> z, double tau, std::vector<double>& shifted) {
  const double top = *std::max_element(z.begin(), z.end());
  shifted.resize(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    shifted[i] = (z[i] - top) / tau;
    total += std::exp(shifted[i]);
  }
  return std::log(total);
}

}  // namespace

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) fail(ErrorCode::invalid_input, "logit vector needs at least 2 classes");
  check_finite(values_, "logit");
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) fail(ErrorCode::invalid_input, "probability vector needs at least 2 classes");
  double total = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double p = values_[i];
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      fail(ErrorCode::invalid_input, "probability entry " + std::to_string(i) + " outside [0, 1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > sum_tolerance) {
    fail(ErrorCode::invalid_input, "probabilities sum to " + std::to_string(total));
  }
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::invalid_input, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void check_temperature(double tau) {
  if (!std::isfinite(tau) || tau <= 0.0) {
    fail(ErrorCode::invalid_parameter, "temperature must be finite and > 0, got " + std::to_string(tau));
  }
}

ProbVector softmax(const LogitVector& z, double tau) {
  check_temperature(tau);
  const auto values = z.values();
  const double top = *std::max_element(values.begin(), values.end());
  std::vector<double> out(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - top) / tau);
    total += out[i];
  }
  for (auto& p : out) p /= total;
  return ProbVector(std::move(out));
}

std::vector<double> log_softmax(std::span<const double> z, double tau) {
  check_temperature(tau);
  if (z.size() < 2) fail(ErrorCode::invalid_input, "logit vector needs at least 2 classes");
  check_finite(z, "logit");
  std::vector<double> shifted;
  const double log_norm = scaled_shift(z, tau, shifted);
  for (auto& v : shifted) v -= log_norm;
  return shifted;
}

double kl_divergence(const ProbVector& t, const ProbVector& s) {
  return kl_divergence(t.values(), s.values());
}

double kl_divergence(std::span<const double> target, std::span<const double> s) {
  check_same_length(target.size(), s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target[i];
    if (t < 0.0) fail(ErrorCode::invalid_input, "negative target entry " + std::to_string(i));
    if (t == 0.0) continue;
    if (s[i] <= 0.0) {
      fail(ErrorCode::divergence_infinite,
           "target mass on class " + std::to_string(i) + " where the model has none");
    }
    total += t * std::log(t / s[i]);
  }
  return total;
}

double kl_to_logits(std::span<const double> target, const LogitVector& z, double tau) {
  check_same_length(target.size(), z.size());
  const auto log_s = log_softmax(z.values(), tau);
  double total = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double t = target[i];
    if (t < 0.0) fail(ErrorCode::invalid_input, "negative target entry " + std::to_string(i));
    if (t == 0.0) continue;
    total += t * (std::log(t) - log_s[i]);
  }
  return total;
}

double cross_entropy(OneHotLabel y, const ProbVector& s) {
  check_label(y, s.size());
  const double p = s[y.class_index];
  if (p <= 0.0) fail(ErrorCode::divergence_infinite, "zero probability at the true class");
  return -std::log(p);
}

double cross_entropy_logits(OneHotLabel y, const LogitVector& z, double tau) {
  check_label(y, z.size());
  return -log_softmax(z.values(), tau)[y.class_index];
}

GradientVector ce_softmax_gradient(const LogitVector& z, OneHotLabel y, double tau) {
  check_label(y, z.size());
  const ProbVector s = softmax(z, tau);
  GradientVector g{std::vector<double>(s.values().begin(), s.values().end())};
  g.values[y.class_index] -= 1.0;
  for (auto& v : g.values) v /= tau;
  return g;
}

GradientVector kl_softmax_gradient(const ProbVector& t, const LogitVector& z, double tau) {
  check_same_length(t.size(), z.size());
  const ProbVector s = softmax(z, tau);
  GradientVector g{std::vector<double>(z.size())};
  for (std::size_t i = 0; i < z.size(); ++i) g.values[i] = (s[i] - t[i]) / tau;
  return g;
}

GradientVector kl_softmax_gradient(std::span<const double> target, const LogitVector& z,
                                   double tau) {
  check_same_length(target.size(), z.size());
  check_finite(target, "target");
  const ProbVector s = softmax(z, tau);
  double mass = 0.0;
  for (double t : target) mass += t;
  GradientVector g{std::vector<double>(z.size())};
  for (std::size_t i = 0; i < z.size(); ++i) g.values[i] = (mass * s[i] - target[i]) / tau;
  return g;
}

GradientVector finite_difference_gradient(const ScalarField& f, std::span<const double> x,
                                          double h) {
  if (!std::isfinite(h) || h <= 0.0) fail(ErrorCode::invalid_parameter, "step h must be > 0");
  std::vector<double> probe(x.begin(), x.end());
  GradientVector g{std::vector<double>(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(ErrorCode::oracle_failure, "function not finite around coordinate " + std::to_string(i));
    }
    g.values[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace rectidistill
