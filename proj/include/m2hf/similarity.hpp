#pragma once

#include <array>
#include <string>
#include <string_view>

#include "m2hf/tensor.hpp"

namespace m2hf {

enum class Level { visual, audio, motion, text };

inline constexpr std::array<Level, 4> kAllLevels = {Level::visual, Level::audio, Level::motion, Level::text};
inline constexpr std::array<Level, 3> kTrainableLevels = {Level::visual, Level::audio, Level::motion};

std::string_view level_name(Level level);
/// Throws std::invalid_argument for unknown names.
Level parse_level(std::string_view name);

/// Caption × video score grid for one level. Rows are captions.
struct SimilarityMatrix {
  Level level = Level::visual;
  Tensor scores;

  std::size_t captions() const { return scores.rows(); }
  std::size_t videos() const { return scores.cols(); }
};

}  // namespace m2hf
