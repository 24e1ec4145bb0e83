#include "rectidistill/partition.hpp"

#include <algorithm>
#include <string>

#include "rectidistill/error.hpp"

namespace rectidistill {

std::size_t MaskTable::count_right() const noexcept {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
}

MaskTable build_mask(std::span<const ProbVector> teacher_probs, std::span<const OneHotLabel> labels) {
  if (teacher_probs.size() != labels.size()) {
    fail(ErrorCode::invalid_batch, "teacher batch has " + std::to_string(teacher_probs.size()) +
                                       " samples but " + std::to_string(labels.size()) + " labels");
  }
  MaskTable mask;
  mask.flags.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].class_index >= teacher_probs[i].size()) {
      fail(ErrorCode::invalid_batch, "label out of range at sample " + std::to_string(i));
    }
    mask.flags[i] = argmax(teacher_probs[i].values()) == labels[i].class_index;
  }
  return mask;
}

BatchSplit split_batch(const MaskTable& mask) {
  BatchSplit split;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    (mask.flags[i] ? split.right_indices : split.bias_indices).push_back(i);
  }
  return split;
}

}  // namespace rectidistill
