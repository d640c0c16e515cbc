#include "m2hf/layers.hpp"

namespace m2hf {

Tensor make_param(const Shape& shape, ParamInit init, Rng& rng) {
  switch (init.kind) {
    case ParamInit::Kind::zeros: return zeros(shape);
    case ParamInit::Kind::ones: return ones(shape);
    case ParamInit::Kind::normal: return normal_init(shape, init.stddev, rng);
  }
  return zeros(shape);
}

}  // namespace m2hf
