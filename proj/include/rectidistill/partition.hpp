#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rectidistill/numerics.hpp"

namespace rectidistill {

/// One flag per sample: true when the teacher's argmax matches the label.
struct MaskTable {
  std::vector<bool> flags;

  std::size_t size() const noexcept { return flags.size(); }
  std::size_t count_right() const noexcept;
};

/// Sample indices of right knowledge and of biased knowledge, in batch order.
struct BatchSplit {
  std::vector<std::size_t> right_indices;
  std::vector<std::size_t> bias_indices;
};

MaskTable build_mask(std::span<const ProbVector> teacher_probs, std::span<const OneHotLabel> labels);

BatchSplit split_batch(const MaskTable& mask);

}  // namespace rectidistill
