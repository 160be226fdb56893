// SPDX-License-Identifier: Apache-2.0
//
// Reproducible synthetic tensors. The generator is SplitMix64: a Weyl
// sequence state += 0x9E3779B97F4A7C15 followed by the finalizer
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z =  z ^ (z >> 31)
// Uniform doubles take the top 53 bits; normals use the cosine branch of
// Box-Muller on two consecutive uniforms.
#pragma once

#include <cstddef>
#include <cstdint>

#include "mxsafe/matrix.hpp"

namespace mxsafe {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal.
  double normal();

 private:
  std::uint64_t state_;
};

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double sigma, std::uint64_t seed);
/// sign * 2^(log2_sigma * z), z standard normal, random sign.
Matrix log_normal_matrix(std::size_t rows, std::size_t cols, double log2_sigma, std::uint64_t seed);
Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi, std::uint64_t seed);
Matrix identity_matrix(std::size_t n);

}  // namespace mxsafe
