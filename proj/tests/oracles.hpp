// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference models. Nothing here calls into the library's codec or
// datapath code; grids are enumerated straight from the format definitions.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mxsafe/scalar_codec.hpp"

namespace oracle {

struct GridFormat {
  int exp_bits;
  int man_bits;
  int bias;
};

/// All nonnegative values of a plain FP element format at shared exponent se:
/// field f > 0 -> 2^(se - bias + f) * (1 + m / 2^m_f), f == 0 -> 2^(se - bias + 1) * m / 2^m_f.
inline std::vector<double> fp_grid(GridFormat f, int se) {
  std::vector<double> out;
  const int fields = 1 << f.exp_bits;
  const int mants = 1 << f.man_bits;
  for (int field = 0; field < fields; ++field) {
    for (int m = 0; m < mants; ++m) {
      const double frac = static_cast<double>(m) / mants;
      out.push_back(field == 0 ? std::pow(2.0, se - f.bias + 1) * frac
                               : std::pow(2.0, se - f.bias + field) * (1.0 + frac));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// k * 2^(se - 6) for k in [0, 127].
inline std::vector<double> int8_grid(int se) {
  std::vector<double> out;
  for (int k = 0; k < 128; ++k) out.push_back(k * std::pow(2.0, se - 6));
  return out;
}

/// Candidates MXSF may produce for an input of exponent ex: the E2M5 normals
/// when se - ex < 3, otherwise the E3M2 (bias 10) grid plus 2^(se-2).
inline std::vector<double> mxsf_grid(int se, int ex) {
  if (se - ex < 3) {
    std::vector<double> out;
    for (int field = 1; field <= 3; ++field)
      for (int m = 0; m < 32; ++m) out.push_back(std::pow(2.0, se - 3 + field) * (1.0 + m / 32.0));
    return out;
  }
  std::vector<double> out = fp_grid({3, 2, 10}, se);
  out.push_back(std::pow(2.0, se - 2));
  return out;
}

/// Nearest grid value; on a tie the candidate that is an even multiple of
/// the gap between the two neighbours wins.
inline double nearest(const std::vector<double>& sorted_grid, double x) {
  const double a = std::fabs(x);
  auto it = std::lower_bound(sorted_grid.begin(), sorted_grid.end(), a);
  if (it == sorted_grid.end()) return std::copysign(sorted_grid.back(), x);
  if (it == sorted_grid.begin()) return std::copysign(*it, x);
  const double hi = *it;
  const double lo = *(it - 1);
  double pick;
  if (a - lo < hi - a) {
    pick = lo;
  } else if (hi - a < a - lo) {
    pick = hi;
  } else {
    const double step = hi - lo;
    pick = std::fmod(lo / step, 2.0) == 0.0 ? lo : hi;
  }
  return std::copysign(pick, x);
}

inline std::vector<double> grid_for(mxsafe::FormatId id, int se, int ex) {
  using mxsafe::FormatId;
  switch (id) {
    case FormatId::Int8: return int8_grid(se);
    case FormatId::E4M3: return fp_grid({4, 3, 15}, se);
    case FormatId::E5M2: return fp_grid({5, 2, 31}, se);
    case FormatId::E2M5: return fp_grid({2, 5, 3}, se);
    case FormatId::Mxsf: return mxsf_grid(se, ex);
    case FormatId::E2M1: return fp_grid({2, 1, 3}, se);
    case FormatId::E2M3: return fp_grid({2, 3, 3}, se);
    case FormatId::E3M2: return fp_grid({3, 2, 7}, se);
    case FormatId::Fp5E3M2: return fp_grid({3, 2, 10}, se);
  }
  return {};
}

/// Brute-force quantized value of x in a block with shared exponent se.
inline double quantize(mxsafe::FormatId id, double x, int se) {
  if (x == 0.0) return x;
  return nearest(grid_for(id, se, std::ilogb(x)), x);
}

/// Grid spacing around |x| in its selected grid (used for half-step bounds).
inline double local_step(mxsafe::FormatId id, double x, int se) {
  const auto grid = grid_for(id, se, std::ilogb(x));
  const double a = std::fabs(x);
  auto it = std::lower_bound(grid.begin(), grid.end(), a);
  if (it == grid.end()) return std::numeric_limits<double>::infinity();
  if (it == grid.begin()) return *(it + 1) - *it;
  return *it - *(it - 1);
}

}  // namespace oracle
