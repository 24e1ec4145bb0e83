#include "rectidistill/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "rectidistill/error.hpp"
#include "rectidistill/rng.hpp"

namespace rectidistill {

namespace {

// Stream id for the centre directions when dim > 2.
constexpr std::uint64_t kCenterStream = 0x63656e7465727300ULL;

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

[[noreturn]] void csv_error(std::size_t line_no, const std::string& message) {
  fail(ErrorCode::csv_parse, "row " + std::to_string(line_no) + ": " + message);
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) fail(ErrorCode::invalid_input, "dataset is empty");
  if (dim == 0) fail(ErrorCode::invalid_input, "dataset has zero features");
  if (features.size() != labels.size() * dim) fail(ErrorCode::invalid_input, "feature matrix shape mismatch");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) fail(ErrorCode::invalid_input, "label out of range at row " + std::to_string(i));
  }
  for (double v : features) {
    if (!std::isfinite(v)) fail(ErrorCode::invalid_input, "non-finite feature");
  }
}

std::vector<double> blob_centers(std::size_t n_classes, std::size_t dim, std::uint64_t seed) {
  std::vector<double> centers(n_classes * dim, 0.0);
  constexpr double radius = 3.0;
  if (dim == 1) {
    for (std::size_t c = 0; c < n_classes; ++c) centers[c] = radius * static_cast<double>(c);
    return centers;
  }
  if (dim == 2) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_classes);
      centers[c * 2] = radius * std::cos(angle);
      centers[c * 2 + 1] = radius * std::sin(angle);
    }
    return centers;
  }
  Xoshiro256 rng(derive_seed(seed, kCenterStream));
  for (std::size_t c = 0; c < n_classes; ++c) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        centers[c * dim + k] = rng.normal();
        norm += centers[c * dim + k] * centers[c * dim + k];
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < dim; ++k) centers[c * dim + k] *= radius / norm;
  }
  return centers;
}

Dataset make_blobs(std::size_t n_classes, std::size_t per_class, std::size_t dim, double spread,
                   std::uint64_t seed, std::uint64_t noise_stream) {
  if (n_classes < 2) fail(ErrorCode::invalid_parameter, "need at least 2 classes");
  if (per_class == 0 || dim == 0) fail(ErrorCode::invalid_parameter, "per_class and dim must be >= 1");
  if (!std::isfinite(spread) || spread <= 0.0) fail(ErrorCode::invalid_parameter, "spread must be > 0");

  const std::vector<double> centers = blob_centers(n_classes, dim, seed);
  Xoshiro256 rng(derive_seed(seed, noise_stream));
  Dataset ds;
  ds.dim = dim;
  ds.n_classes = n_classes;
  ds.features.reserve(n_classes * per_class * dim);
  ds.labels.reserve(n_classes * per_class);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t k = 0; k < dim; ++k) ds.features.push_back(centers[c * dim + k] + spread * rng.normal());
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail(ErrorCode::invalid_input, "CSV has no header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 2 || header[0] != "label") csv_error(line_no, "header must be label,f0,f1,...");

  Dataset ds;
  ds.dim = header.size() - 1;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      csv_error(line_no, "expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    long long label = 0;
    {
      const auto& cell = cells[0];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) csv_error(line_no, "label '" + cell + "' is not an integer");
      if (label < 0) csv_error(line_no, "label " + cell + " out of range");
    }
    for (std::size_t k = 1; k < cells.size(); ++k) {
      double v = 0.0;
      const auto& cell = cells[k];
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        csv_error(line_no, "cell " + std::to_string(k) + " '" + cell + "' is not a finite number");
      }
      ds.features.push_back(v);
    }
    ds.labels.push_back(static_cast<std::size_t>(label));
    max_label = std::max(max_label, static_cast<std::size_t>(label));
  }
  if (ds.labels.empty()) fail(ErrorCode::invalid_input, "CSV has no data rows");
  ds.n_classes = max_label + 1;
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  return read_csv(in);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  out << "label";
  for (std::size_t k = 0; k < ds.dim; ++k) out << ",f" << k;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (double v : ds.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
      out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path.string() + " for writing");
  write_csv(ds, out);
  if (!out) fail(ErrorCode::io, "failed writing " + path.string());
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size,
                                                 std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size == 0) fail(ErrorCode::invalid_parameter, "batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(derive_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

}  // namespace rectidistill
