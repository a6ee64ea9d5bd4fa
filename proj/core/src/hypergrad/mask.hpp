#pragma once

#include <cmath>

#include "onepass/hypergrad/hypergrad.hpp"

namespace onepass::hypergrad::detail {

// Zeroes components outside the mask, sets total = direct + indirect and the
// divergence flag.
inline Hypergradient finish(Hypergradient h, const update::HyperVector& lambda) {
  const std::vector<bool> mask = lambda.flat_mask();
  h.total.resize(mask.size());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (!mask[k]) {
      h.direct[k] = 0.0;
      h.indirect[k] = 0.0;
    }
    h.total[k] = h.direct[k] + h.indirect[k];
    if (!std::isfinite(h.total[k])) h.diverged = true;
  }
  return h;
}

}  // namespace onepass::hypergrad::detail
