#pragma once

#include <cstddef>
#include <vector>

#include "cfmdd/ad/tensor.hpp"

namespace cfmdd::ad {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<Tensor> m, v;  // lazily shaped like the parameters
};

/// One bias-corrected Adam update of every parameter in place.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state);

}  // namespace cfmdd::ad
