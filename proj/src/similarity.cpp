#include "m2hf/similarity.hpp"

#include <stdexcept>

namespace m2hf {

std::string_view level_name(Level level) {
  switch (level) {
    case Level::visual: return "visual";
    case Level::audio: return "audio";
    case Level::motion: return "motion";
    case Level::text: return "text";
  }
  return "?";
}

Level parse_level(std::string_view name) {
  for (Level l : kAllLevels) {
    if (level_name(l) == name) return l;
  }
  throw std::invalid_argument("unknown level '" + std::string(name) + "'");
}

}  // namespace m2hf
