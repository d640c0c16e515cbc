#include "m2hf/parallel.hpp"

#include <cstdlib>

namespace m2hf {

std::size_t worker_count() {
  if (const char* env = std::getenv("M2HF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

}  // namespace m2hf
