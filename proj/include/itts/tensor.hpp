#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace itts {

// Row-major frames x dim block of reals. Used for mel chunks and encoder rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

// A run of mel frames produced by one decode call.
struct MelChunk {
  Matrix frames;
  std::size_t frame_count() const { return frames.rows; }
  bool operator==(const MelChunk&) const = default;
};

struct AudioChunk {
  std::vector<double> samples;
  std::int64_t sample_offset = 0;
  bool operator==(const AudioChunk&) const = default;
};

// Deterministic stand-in for an embedding-table row: component d of
// (table_id, token_id) is splitmix64 of the packed key mapped to [-1, 1).
std::vector<double> seeded_vector(std::uint32_t table_id, std::int64_t token_id,
                                  int dim);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace itts
