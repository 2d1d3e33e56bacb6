#pragma once

namespace itts {

// First-chunk latency of a request that arrives during iteration t, given
// the durations of iteration t and t+1 (seconds).
struct LatencyBounds {
  double min = 0.0;
  double max = 0.0;
  double expected = 0.0;
};

LatencyBounds latency_bounds(double step_t, double step_next);

}  // namespace itts
