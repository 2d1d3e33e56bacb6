#include "itts/tensor.hpp"

#include <stdexcept>

namespace itts {

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<double> seeded_vector(std::uint32_t table_id, std::int64_t token_id,
                                  int dim) {
  if (dim < 1) throw std::invalid_argument("seeded_vector: dim must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(dim));
  // key layout: table in bits 56..63, token in bits 20..51, component below.
  const std::uint64_t base =
      (static_cast<std::uint64_t>(table_id & 0xFF) << 56) |
      ((static_cast<std::uint64_t>(token_id) & 0xFFFFFFFFULL) << 20);
  for (int d = 0; d < dim; ++d) {
    const std::uint64_t z =
        splitmix64(base | (static_cast<std::uint64_t>(d) & 0xFFFFFULL));
    const double unit = static_cast<double>(z >> 11) * 0x1.0p-53;
    out[static_cast<std::size_t>(d)] = unit * 2.0 - 1.0;
  }
  return out;
}

}  // namespace itts
