// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/block_quant.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "mxsafe/error.hpp"
#include "mxsafe/parallel.hpp"

namespace mxsafe {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

int parse_positive(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || v <= 0) {
    throw Error(ErrorCode::InvalidArgument, "expected a positive integer, got '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

TileShape parse_tile(std::string_view text) {
  const auto x = text.find('x');
  if (x == std::string_view::npos) {
    throw Error(ErrorCode::InvalidArgument, "tile must look like RxC, got '" + std::string(text) + "'");
  }
  return {parse_positive(text.substr(0, x)), parse_positive(text.substr(x + 1))};
}

SharedExponent shared_exponent(std::span<const double> values) {
  double max_abs = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "block contains NaN/Inf");
    max_abs = std::max(max_abs, std::fabs(v));
  }
  if (max_abs == 0.0) return {0, true};
  const int e = std::ilogb(max_abs);
  if (e > kMaxSharedExp) {
    throw Error(ErrorCode::ExponentOutOfRange,
                "block maximum 2^" + std::to_string(e) + " exceeds the shared exponent range");
  }
  return {std::max(e, kMinSharedExp), false};
}

QuantizedBlock quantize_block(std::span<const double> values, FormatId format, std::size_t capacity) {
  if (capacity == 0) capacity = values.size();
  if (values.size() > capacity) {
    throw Error(ErrorCode::BlockShapeMismatch, "more values than block capacity");
  }
  const SharedExponent se = shared_exponent(values);
  QuantizedBlock block;
  block.format = format;
  block.zero_block = se.zero_block;
  block.shared_exp = static_cast<std::int8_t>(se.value);
  block.codes.assign(capacity, 0);
  if (se.zero_block) return block;
  for (std::size_t i = 0; i < values.size(); ++i) {
    block.codes[i] = encode(values[i], se.value, format).code.bits;
  }
  return block;
}

std::vector<double> dequantize_block(const QuantizedBlock& block) {
  std::vector<double> out(block.codes.size(), 0.0);
  if (block.zero_block) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = decode(block.code(i), block.shared_exp);
  return out;
}

QuantizedTensor::QuantizedTensor(std::size_t rows, std::size_t cols, TileShape tile, FormatId format,
                                 std::vector<QuantizedBlock> blocks)
    : rows_(rows), cols_(cols), tile_(tile), format_(format) {
  if (tile.rows <= 0 || tile.cols <= 0) throw Error(ErrorCode::InvalidArgument, "empty tile shape");
  if (blocks.size() != grid_rows() * grid_cols()) {
    throw Error(ErrorCode::BlockShapeMismatch, "block count does not match the tile grid");
  }
  for (const auto& b : blocks) {
    if (b.codes.size() != static_cast<std::size_t>(tile.size()) || b.format != format) {
      throw Error(ErrorCode::BlockShapeMismatch, "block does not match tile shape or format");
    }
  }
  blocks_ = std::make_shared<const std::vector<QuantizedBlock>>(std::move(blocks));
}

std::size_t QuantizedTensor::grid_rows() const noexcept {
  return ceil_div(rows_, static_cast<std::size_t>(tile_.rows));
}

std::size_t QuantizedTensor::grid_cols() const noexcept {
  return ceil_div(cols_, static_cast<std::size_t>(tile_.cols));
}

std::span<const QuantizedBlock> QuantizedTensor::stored_blocks() const noexcept {
  if (!blocks_) return {};
  return *blocks_;
}

const QuantizedBlock& QuantizedTensor::stored_block_for(std::size_t r, std::size_t c,
                                                        std::size_t& lane) const {
  // Map the logical coordinate back to storage coordinates.
  const TileShape st = transposed_ ? tile_.transposed() : tile_;
  const std::size_t sr = transposed_ ? c : r;
  const std::size_t sc = transposed_ ? r : c;
  const std::size_t stored_cols = transposed_ ? rows_ : cols_;
  const std::size_t grid_c = ceil_div(stored_cols, static_cast<std::size_t>(st.cols));
  const std::size_t br = sr / static_cast<std::size_t>(st.rows);
  const std::size_t bc = sc / static_cast<std::size_t>(st.cols);
  lane = (sr % st.rows) * st.cols + (sc % st.cols);
  return (*blocks_)[br * grid_c + bc];
}

int QuantizedTensor::shared_exp_at(std::size_t r, std::size_t c) const {
  std::size_t lane = 0;
  return stored_block_for(r, c, lane).shared_exp;
}

bool QuantizedTensor::zero_block_at(std::size_t r, std::size_t c) const {
  std::size_t lane = 0;
  return stored_block_for(r, c, lane).zero_block;
}

ElementCode QuantizedTensor::code_at(std::size_t r, std::size_t c) const {
  std::size_t lane = 0;
  return stored_block_for(r, c, lane).code(lane);
}

double QuantizedTensor::value_at(std::size_t r, std::size_t c) const {
  std::size_t lane = 0;
  const QuantizedBlock& b = stored_block_for(r, c, lane);
  if (b.zero_block) return 0.0;
  return decode(b.code(lane), b.shared_exp);
}

QuantizedBlock QuantizedTensor::block(std::size_t br, std::size_t bc) const {
  if (br >= grid_rows() || bc >= grid_cols()) throw Error(ErrorCode::InvalidArgument, "block index");
  if (!transposed_) return (*blocks_)[br * grid_cols() + bc];
  const QuantizedBlock& src = (*blocks_)[bc * grid_rows() + br];
  QuantizedBlock out = src;
  // Stored tile is tile_.transposed(): lane (i, j) there is lane (j, i) here.
  for (int i = 0; i < tile_.rows; ++i)
    for (int j = 0; j < tile_.cols; ++j)
      out.codes[i * tile_.cols + j] = src.codes[j * tile_.rows + i];
  return out;
}

Matrix QuantizedTensor::dequantize() const {
  Matrix out(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(r, c) = value_at(r, c);
  return out;
}

QuantizedTensor QuantizedTensor::transpose_view() const {
  if (!tile_.is_2d()) {
    throw Error(ErrorCode::NotReusable, "1D-tiled tensors must be re-quantized along the other axis");
  }
  QuantizedTensor view = *this;
  view.rows_ = cols_;
  view.cols_ = rows_;
  view.tile_ = tile_.transposed();
  view.transposed_ = !transposed_;
  return view;
}

QuantizedTensor quantize_tensor(const Matrix& tensor, TileShape tile, FormatId format) {
  if (tile.rows <= 0 || tile.cols <= 0) throw Error(ErrorCode::InvalidArgument, "empty tile shape");
  const std::size_t tr = static_cast<std::size_t>(tile.rows);
  const std::size_t tc = static_cast<std::size_t>(tile.cols);
  const std::size_t grid_r = ceil_div(tensor.rows(), tr);
  const std::size_t grid_c = ceil_div(tensor.cols(), tc);
  std::vector<QuantizedBlock> blocks(grid_r * grid_c);
  parallel_for(blocks.size(), [&](std::size_t idx) {
    const std::size_t r0 = (idx / grid_c) * tr;
    const std::size_t c0 = (idx % grid_c) * tc;
    std::vector<double> lanes(tr * tc, 0.0);
    for (std::size_t i = 0; i < tr && r0 + i < tensor.rows(); ++i)
      for (std::size_t j = 0; j < tc && c0 + j < tensor.cols(); ++j)
        lanes[i * tc + j] = tensor(r0 + i, c0 + j);
    blocks[idx] = quantize_block(lanes, format);
  });
  return QuantizedTensor(tensor.rows(), tensor.cols(), tile, format, std::move(blocks));
}

Matrix dequantize(const QuantizedTensor& q) { return q.dequantize(); }

QuantizedTensor transpose_view(const QuantizedTensor& q) { return q.transpose_view(); }

int count_quantization_events(const LayerDims& dims, TileShape tile, StepKind step) {
  if (dims.m == 0 || dims.k == 0 || dims.n == 0 || tile.rows <= 0 || tile.cols <= 0) {
    throw Error(ErrorCode::InvalidArgument, "layer dims and tile must be positive");
  }
  // Each use names an operand and whether it is consumed in its stored
  // orientation or transposed (blocked along the other axis).
  enum Operand { X, W, dY, kOperands };
  struct Use {
    Operand operand;
    bool transposed;
  };
  std::vector<Use> uses = {{X, false}, {W, false}};  // Y = X * W
  if (step == StepKind::Training) {
    uses.push_back({dY, false});  // dX = dY * W^T
    uses.push_back({W, true});
    uses.push_back({X, true});    // dW = X^T * dY
    uses.push_back({dY, true});
  }
  bool have[kOperands][2] = {};
  int events = 0;
  for (const Use& u : uses) {
    bool& same = have[u.operand][u.transposed ? 1 : 0];
    const bool other = have[u.operand][u.transposed ? 0 : 1];
    if (same) continue;
    if (other && tile.is_2d()) {
      same = true;  // transpose_view of the existing tensor
      continue;
    }
    same = true;
    ++events;
  }
  return events;
}

}  // namespace mxsafe
