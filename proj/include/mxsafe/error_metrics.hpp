// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>

#include "mxsafe/block_quant.hpp"
#include "mxsafe/matrix.hpp"
#include "mxsafe/scalar_codec.hpp"

namespace mxsafe {

/// Closed-form worst-case MXINT error estimate, 2^(S_e-(m_i-2)) * 2^((S_e-e_x)-(m_i-2)).
double max_error_int(int shared_exp, int exponent, int m_i);

/// Closed-form worst-case MXFP error estimate, 2^(e_x-m_f) * 2^(-min(x_le,0)-m_f).
double max_error_fp(int exponent, int local_exp, int m_f);

/// Brute-force max |x - decode(encode(x))| over 2^sweep_bits evenly spaced
/// significands in [1, 2) at e_x = S_e - distance. Inputs above the largest
/// representable magnitude are skipped, so the result is pure rounding error.
double empirical_max_error(FormatId format, int distance, int shared_exp, int sweep_bits = 12);

struct ErrorReport {
  std::size_t element_count = 0;
  std::size_t nonzero_count = 0;
  std::size_t underflow_count = 0;
  double sum_squared_error = 0.0;
  double max_abs_err = 0.0;
  std::size_t distance_sum = 0;
  std::map<int, std::size_t> distance_histogram;  // d = S_e - e_x over nonzero inputs

  double mse() const;
  double underflow_ratio() const;
  double mean_distance() const;

  /// Associative merge of partial reports.
  ErrorReport& merge(const ErrorReport& other);
};

ErrorReport tensor_error_report(const Matrix& original, FormatId format, TileShape tile);

/// Same statistics for an already-quantized tensor of matching dims.
ErrorReport error_report(const Matrix& original, const QuantizedTensor& quantized);

}  // namespace mxsafe
