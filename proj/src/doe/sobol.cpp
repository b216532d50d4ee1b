/// @file sobol.cpp
/// @brief Unscrambled Sobol sequence in Gray-code order.

#include "hydrocal/doe.hpp"

#include <array>
#include <bit>
#include <stdexcept>
#include <string>

namespace hydrocal::doe {
namespace {

#include "sobol_table.inc"

constexpr int kBits = 32;
constexpr double kScale = 1.0 / 4294967296.0;  // 2^-32

std::array<std::uint32_t, kBits> direction_numbers(int dim) {
  std::array<std::uint32_t, kBits> m{};
  if (dim == 0) {
    m.fill(1);
  } else {
    const std::uint32_t poly = kSobolPoly[dim];
    const int s = std::bit_width(poly) - 1;
    for (int j = 0; j < s; ++j) m[j] = kSobolInit[dim][j];
    for (int j = s; j < kBits; ++j) {
      std::uint32_t v = m[j - s] ^ (m[j - s] << s);
      for (int k = 1; k < s; ++k)
        if ((poly >> (s - k)) & 1u) v ^= m[j - k] << k;
      m[j] = v;
    }
  }
  std::array<std::uint32_t, kBits> v{};
  for (int j = 0; j < kBits; ++j) v[j] = m[j] << (kBits - 1 - j);
  return v;
}

}  // namespace

int sobol_max_dimension() { return kSobolDims; }

Design sobol_sequence(int n, int p) {
  if (n < 1) throw std::invalid_argument("point count must be positive");
  if (p < 1 || p > kSobolDims)
    throw std::invalid_argument("Sobol dimension must lie in 1.." + std::to_string(kSobolDims));
  Design d;
  d.scheme = Scheme::Sobol;
  d.unit.resize(n, p);
  for (int k = 0; k < p; ++k) {
    const auto v = direction_numbers(k);
    std::uint32_t x = 0;
    for (int i = 0; i < n; ++i) {
      x ^= v[static_cast<std::size_t>(std::countr_one(static_cast<std::uint32_t>(i)))];
      d.unit(i, k) = x * kScale;
    }
  }
  return d;
}

}  // namespace hydrocal::doe
