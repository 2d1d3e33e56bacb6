#include "itts/latency.hpp"

#include <algorithm>
#include <stdexcept>

namespace itts {

LatencyBounds latency_bounds(double step_t, double step_next) {
  if (!(step_t >= 0.0) || !(step_next >= 0.0)) {
    throw std::invalid_argument("latency_bounds: step durations must be non-negative");
  }
  // Worst case: arrives just after admission closed in t, so waits out t and
  // then all of t+1. Best case: admitted at the start of t, or lands at the
  // very end of t. Uniform arrival within t gives the mean.
  return {std::min(step_t, step_next), step_t + step_next, step_t / 2.0 + step_next};
}

}  // namespace itts
