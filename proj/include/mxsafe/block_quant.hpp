// SPDX-License-Identifier: Apache-2.0
//
// MX blocks: a tile of elements sharing one exponent S_e = floor(log2 max|x|).
// Tensors are cut into r x c tiles enumerated row-major over the tile grid,
// row-major inside each tile; edge tiles are zero padded and the padding
// never takes part in the S_e computation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "mxsafe/matrix.hpp"
#include "mxsafe/scalar_codec.hpp"

namespace mxsafe {

struct TileShape {
  int rows = 1;
  int cols = 32;

  int size() const noexcept { return rows * cols; }
  bool is_2d() const noexcept { return rows > 1 && cols > 1; }
  TileShape transposed() const noexcept { return {cols, rows}; }
  friend bool operator==(const TileShape&, const TileShape&) = default;
};

namespace tiles {
inline constexpr TileShape kOcpDefault{1, 32};
inline constexpr TileShape kInference{1, 64};
inline constexpr TileShape kTraining{8, 8};
}  // namespace tiles

/// Parses "RxC" (e.g. "8x8", "1x64").
TileShape parse_tile(std::string_view text);

// Range of S_e representable by the biased file byte (0xFF is reserved).
inline constexpr int kMinSharedExp = -127;
inline constexpr int kMaxSharedExp = 127;

struct SharedExponent {
  int value = 0;
  bool zero_block = true;
};

/// floor(log2(max|x|)), clamped below at kMinSharedExp. All-zero input gives
/// {0, zero_block}.
SharedExponent shared_exponent(std::span<const double> values);

struct QuantizedBlock {
  std::int8_t shared_exp = 0;
  std::vector<std::uint8_t> codes;
  FormatId format = FormatId::Mxsf;
  bool zero_block = true;

  ElementCode code(std::size_t i) const { return {codes[i], format}; }
  friend bool operator==(const QuantizedBlock&, const QuantizedBlock&) = default;
};

/// Quantizes up to `capacity` values into one block; the remaining lanes are
/// padding and encode zero. capacity == 0 means values.size().
QuantizedBlock quantize_block(std::span<const double> values, FormatId format,
                              std::size_t capacity = 0);

std::vector<double> dequantize_block(const QuantizedBlock& block);

/// A quantized matrix. Block storage is shared and immutable, so
/// transpose_view() is a constant-time relabeling.
class QuantizedTensor {
 public:
  QuantizedTensor() = default;
  QuantizedTensor(std::size_t rows, std::size_t cols, TileShape tile, FormatId format,
                  std::vector<QuantizedBlock> blocks);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  TileShape tile() const noexcept { return tile_; }
  FormatId format() const noexcept { return format_; }
  bool transposed() const noexcept { return transposed_; }

  std::size_t grid_rows() const noexcept;
  std::size_t grid_cols() const noexcept;
  std::size_t block_count() const noexcept { return grid_rows() * grid_cols(); }

  /// Block at (br, bc) of the logical grid; materialized when transposed.
  QuantizedBlock block(std::size_t br, std::size_t bc) const;
  /// Shared exponent of the block holding logical element (r, c).
  int shared_exp_at(std::size_t r, std::size_t c) const;
  bool zero_block_at(std::size_t r, std::size_t c) const;
  ElementCode code_at(std::size_t r, std::size_t c) const;
  double value_at(std::size_t r, std::size_t c) const;

  Matrix dequantize() const;
  /// Requires a 2D tile; throws NotReusable for 1D tiles.
  QuantizedTensor transpose_view() const;

  /// Underlying blocks in storage order (row-major over the untransposed grid).
  std::span<const QuantizedBlock> stored_blocks() const noexcept;

 private:
  const QuantizedBlock& stored_block_for(std::size_t r, std::size_t c, std::size_t& lane) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  TileShape tile_{};
  FormatId format_ = FormatId::Mxsf;
  bool transposed_ = false;
  std::shared_ptr<const std::vector<QuantizedBlock>> blocks_;
};

QuantizedTensor quantize_tensor(const Matrix& tensor, TileShape tile, FormatId format);
Matrix dequantize(const QuantizedTensor& q);
QuantizedTensor transpose_view(const QuantizedTensor& q);

struct LayerDims {
  std::size_t m = 1;  // batch rows of X
  std::size_t k = 1;  // input features
  std::size_t n = 1;  // output features
};

enum class StepKind { Training, Inference };

/// Number of quantize_tensor passes for one linear layer Y = X * W. Training
/// adds dX = dY * W^T and dW = X^T * dY; a quantized operand is reused for
/// its transpose only when its tile is 2D.
int count_quantization_events(const LayerDims& dims, TileShape tile,
                              StepKind step = StepKind::Training);

}  // namespace mxsafe
