#pragma once

// Per-item arithmetic shared by the single-item reference path and the
// packed batch kernels. Both call these on contiguous spans so that a
// batched run is bit-identical to sequential runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace itts::detail {

// Recurrent cell stand-in. The input is concat(a, b), folded to dim by
// summing strided slices, i.e. fold[d] = a[d] + b[d].
inline void cell_update(std::span<const double> a, std::span<const double> b,
                        std::span<double> h, std::span<double> c) {
  for (std::size_t d = 0; d < h.size(); ++d) {
    const double fold = a[d] + b[d];
    c[d] = std::tanh(0.5 * c[d] + 0.5 * fold + 0.25 * h[d]);
    h[d] = std::tanh(c[d]);
  }
}

inline void prenet(std::span<const double> m_last, std::span<double> out) {
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = std::tanh(m_last[d]);
}

// Location-sensitive attention stand-in over seq_len encoder rows.
// `enc` is seq_len x dim row-major; `w_last` receives the softmax weights.
inline void attend(std::span<const double> h_att, std::span<const double> enc,
                   std::span<const double> w_acc, double penalty,
                   std::span<double> w_last, std::span<double> context) {
  const std::size_t dim = h_att.size();
  const std::size_t n = w_acc.size();
  double max_score = -INFINITY;
  for (std::size_t t = 0; t < n; ++t) {
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) dot += h_att[d] * enc[t * dim + d];
    w_last[t] = dot - penalty * w_acc[t];
    max_score = std::max(max_score, w_last[t]);
  }
  double z = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    w_last[t] = std::exp(w_last[t] - max_score);
    z += w_last[t];
  }
  for (std::size_t t = 0; t < n; ++t) w_last[t] /= z;
  std::fill(context.begin(), context.end(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t d = 0; d < dim; ++d) context[d] += w_last[t] * enc[t * dim + d];
  }
}

inline void accumulate(std::span<const double> w_last, std::span<double> w_acc) {
  for (std::size_t t = 0; t < w_acc.size(); ++t) w_acc[t] += w_last[t];
}

inline void mel_projection(std::span<const double> h_dec, std::span<const double> context,
                           std::span<double> m_last) {
  for (std::size_t d = 0; d < m_last.size(); ++d) m_last[d] = std::tanh(h_dec[d] + context[d]);
}

// One row of the bidirectional encoder stand-in; `e_all` is n x dim.
inline void encode_row(std::span<const double> e_all, std::size_t n, std::size_t dim,
                       std::size_t t, std::span<double> out) {
  for (std::size_t d = 0; d < dim; ++d) {
    double prefix = 0.0;
    for (std::size_t r = 0; r <= t; ++r) prefix += e_all[r * dim + d];
    double suffix = 0.0;
    for (std::size_t r = t; r < n; ++r) suffix += e_all[r * dim + d];
    prefix /= static_cast<double>(t + 1);
    suffix /= static_cast<double>(n - t);
    out[d] = (e_all[t * dim + d] + prefix + suffix) / 3.0;
  }
}

// Vocoder stand-in for one frame: hop copies of the frame mean.
inline void expand_frame(std::span<const double> frame, std::span<double> out) {
  double sum = 0.0;
  for (double v : frame) sum += v;
  const double mean = sum / static_cast<double>(frame.size());
  std::fill(out.begin(), out.end(), mean);
}

}  // namespace itts::detail
