#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "rectidistill/numerics.hpp"

namespace rectidistill {

/// Row-major n x dim feature matrix with one class index per row.
struct Dataset {
  std::size_t dim = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
  OneHotLabel label(std::size_t i) const { return {labels[i]}; }

  /// Throws invalid_input on an empty set, shape mismatch, non-finite feature
  /// or out-of-range label.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Gaussian blobs. For dim == 2 class c is centred at radius 3 on angle
/// 2*pi*c/n_classes; for dim > 2 the centres are 3 * (seeded random unit
/// direction). Noise is isotropic with std = spread and drawn from stream
/// `noise_stream` of the seed, so train/val splits share centres but not
/// samples. Rows are class-major.
Dataset make_blobs(std::size_t n_classes, std::size_t per_class, std::size_t dim, double spread,
                   std::uint64_t seed, std::uint64_t noise_stream = 0);

/// Centres used by make_blobs, row-major n_classes x dim.
std::vector<double> blob_centers(std::size_t n_classes, std::size_t dim, std::uint64_t seed);

/// CSV with header `label,f0,f1,...`. n_classes = max label + 1.
Dataset read_csv(std::istream& in);
Dataset load_csv(const std::filesystem::path& path);
void write_csv(const Dataset& ds, std::ostream& out);
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Fisher-Yates permutation of [0, n) seeded from (seed, epoch), cut into
/// consecutive batches. The last batch may be short.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size,
                                                 std::uint64_t seed, std::uint64_t epoch);

inline std::vector<std::vector<std::size_t>> batch_iter(const Dataset& ds, std::size_t batch_size,
                                                        std::uint64_t seed, std::uint64_t epoch) {
  return batch_iter(ds.size(), batch_size, seed, epoch);
}

}  // namespace rectidistill
