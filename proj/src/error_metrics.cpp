// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/error_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mxsafe/error.hpp"
#include "mxsafe/parallel.hpp"

namespace mxsafe {

double max_error_int(int shared_exp, int exponent, int m_i) {
  return std::ldexp(1.0, shared_exp - (m_i - 2)) * std::ldexp(1.0, (shared_exp - exponent) - (m_i - 2));
}

double max_error_fp(int exponent, int local_exp, int m_f) {
  return std::ldexp(1.0, exponent - m_f) * std::ldexp(1.0, -std::min(local_exp, 0) - m_f);
}

double empirical_max_error(FormatId format, int distance, int shared_exp, int sweep_bits) {
  if (distance < 0) throw Error(ErrorCode::InvalidArgument, "distance must be >= 0");
  const std::size_t points = std::size_t{1} << sweep_bits;
  const int exponent = shared_exp - distance;
  // Inputs past the largest code are clamped, not rounded; leave them out.
  const double top = encode(std::nextafter(std::ldexp(1.0, shared_exp + 1), 0.0), shared_exp, format).value;
  double worst = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double x = std::ldexp(1.0 + std::ldexp(static_cast<double>(k), -sweep_bits), exponent);
    if (x > top) break;
    worst = std::max(worst, std::fabs(x - encode(x, shared_exp, format).value));
  }
  return worst;
}

double ErrorReport::mse() const {
  return element_count == 0 ? 0.0 : sum_squared_error / static_cast<double>(element_count);
}

double ErrorReport::underflow_ratio() const {
  return nonzero_count == 0 ? 0.0
                            : static_cast<double>(underflow_count) / static_cast<double>(nonzero_count);
}

double ErrorReport::mean_distance() const {
  return nonzero_count == 0 ? 0.0
                            : static_cast<double>(distance_sum) / static_cast<double>(nonzero_count);
}

ErrorReport& ErrorReport::merge(const ErrorReport& other) {
  element_count += other.element_count;
  nonzero_count += other.nonzero_count;
  underflow_count += other.underflow_count;
  sum_squared_error += other.sum_squared_error;
  max_abs_err = std::max(max_abs_err, other.max_abs_err);
  distance_sum += other.distance_sum;
  for (const auto& [d, n] : other.distance_histogram) distance_histogram[d] += n;
  return *this;
}

ErrorReport error_report(const Matrix& original, const QuantizedTensor& quantized) {
  if (original.rows() != quantized.rows() || original.cols() != quantized.cols()) {
    throw Error(ErrorCode::DimMismatch, "report needs matching dims");
  }
  // One partial report per row, merged in row order so the floating-point
  // sums do not depend on the worker count.
  std::vector<ErrorReport> partial(original.rows());
  parallel_for(original.rows(), [&](std::size_t r) {
    ErrorReport& rep = partial[r];
    for (std::size_t c = 0; c < original.cols(); ++c) {
      const double x = original(r, c);
      const double q = quantized.value_at(r, c);
      const double err = x - q;
      ++rep.element_count;
      rep.sum_squared_error += err * err;
      rep.max_abs_err = std::max(rep.max_abs_err, std::fabs(err));
      if (x == 0.0) continue;
      ++rep.nonzero_count;
      if (q == 0.0) ++rep.underflow_count;
      const int d = quantized.shared_exp_at(r, c) - std::ilogb(x);
      rep.distance_sum += static_cast<std::size_t>(d);
      ++rep.distance_histogram[d];
    }
  });
  ErrorReport total;
  for (const auto& p : partial) total.merge(p);
  return total;
}

ErrorReport tensor_error_report(const Matrix& original, FormatId format, TileShape tile) {
  return error_report(original, quantize_tensor(original, tile, format));
}

}  // namespace mxsafe
