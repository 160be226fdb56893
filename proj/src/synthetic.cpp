// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/synthetic.hpp"

#include <cmath>
#include <numbers>

namespace mxsafe {

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::normal() {
  const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = static_cast<float>(sigma * rng.normal());
  return m;
}

Matrix log_normal_matrix(std::size_t rows, std::size_t cols, double log2_sigma, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) {
    const double sign = (rng.next() >> 63) ? -1.0 : 1.0;
    v = static_cast<float>(sign * std::exp2(log2_sigma * rng.normal()));
  }
  return m;
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = static_cast<float>(lo + (hi - lo) * rng.uniform());
  return m;
}

Matrix identity_matrix(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

}  // namespace mxsafe
