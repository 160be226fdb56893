// SPDX-License-Identifier: Apache-2.0
//
// Bit-accurate model of the SAFE-MAC dot-product datapath: per-lane operand
// decode, exact significand multiply, a 4-input FP12 (E4M7) adder tree, and
// sequential FP12 accumulation of the 4-lane groups inside a block pair.
// Block-pair results are scaled by 2^(S_a + S_b) and accumulated across the
// K dimension in binary32 (or binary64).
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "mxsafe/block_quant.hpp"
#include "mxsafe/matrix.hpp"
#include "mxsafe/scalar_codec.hpp"

namespace mxsafe {

/// Operand value relative to its block scale: (-1)^negative * magnitude * 2^lsb_exp.
struct DecodedOperand {
  bool negative = false;
  std::uint32_t magnitude = 0;
  int lsb_exp = 0;

  bool is_zero() const noexcept { return magnitude == 0; }
  double value() const;
  /// floor(log2 |value|); 0 for zero operands.
  int offset() const;
  /// |value| / 2^offset, in [1, 2) for nonzero operands.
  double significand() const;
};

DecodedOperand decode_operand(ElementCode code);

struct MacProduct {
  bool negative = false;
  std::uint32_t magnitude = 0;  // exact integer product of the two magnitudes
  int lsb_exp = 0;
  int exponent_offset = 0;      // offset_a + offset_b

  bool is_zero() const noexcept { return magnitude == 0; }
  double value() const;
  /// |value| / 2^exponent_offset, in [1, 4) for nonzero products.
  double significand() const;
};

MacProduct multiply(const DecodedOperand& a, const DecodedOperand& b);

/// 12-bit float: 1 sign, 4 exponent (bias 7), 7 mantissa bits. Gradual
/// underflow below 2^-6, no Inf/NaN; overflow saturates at 1.1111111b * 2^8.
class Fp12 {
 public:
  static constexpr int kExpBits = 4;
  static constexpr int kManBits = 7;
  static constexpr int kBias = 7;
  static constexpr int kMinNormalExp = 1 - kBias;
  static constexpr int kMaxExp = (1 << kExpBits) - 1 - kBias;

  constexpr Fp12() = default;
  static Fp12 from_bits(std::uint16_t bits);
  /// Round to nearest, ties to even; saturating.
  static Fp12 round(double v);

  static double max_finite();
  static double min_subnormal();
  /// Half the spacing of the FP12 grid at magnitude |v| (v in range).
  static double half_ulp(double v);

  std::uint16_t bits() const noexcept { return bits_; }
  double value() const;

  friend Fp12 operator+(Fp12 a, Fp12 b) { return round(a.value() + b.value()); }
  friend bool operator==(Fp12, Fp12) = default;

 private:
  explicit constexpr Fp12(std::uint16_t bits) : bits_(bits) {}
  std::uint16_t bits_ = 0;
};

enum class IntraBlockMode { Fp12, Exact };
enum class InterBlockAccumulator { Binary32, Binary64 };

struct MacConfig {
  static constexpr int kTreeArity = 4;

  IntraBlockMode intra_block = IntraBlockMode::Fp12;
  InterBlockAccumulator inter_block = InterBlockAccumulator::Binary32;
  /// A relative product of 1.0 enters the FP12 tree as 2^anchor (biased
  /// exponent field anchor + 7).
  int fp12_anchor = 1;

  static MacConfig exact() { return {IntraBlockMode::Exact, InterBlockAccumulator::Binary64, 1}; }
};

/// ((p0 + p1) + (p2 + p3)) with every product and every sum rounded to FP12.
Fp12 adder_tree4(std::span<const MacProduct, 4> products, int fp12_anchor = 1);

/// Dot product of two equally sized code vectors with the given shared
/// exponents, through the configured datapath. Lane counts that are not a
/// multiple of four are zero padded.
double slice_dot(std::span<const std::uint8_t> a, FormatId format_a, int shared_a,
                 std::span<const std::uint8_t> b, FormatId format_b, int shared_b,
                 const MacConfig& cfg = {});

/// Block-pair dot product returned in binary32.
float block_dot(const QuantizedBlock& a, const QuantizedBlock& b, const MacConfig& cfg = {});

enum class Mapping { OneD, Tiled };

/// C = A * B. A's tile columns and B's tile rows partition K and must match.
/// OneD treats every tile row of A (tile column of B) as a 1D block; Tiled
/// processes whole tile pairs and needs 2D tiles on both operands. Both
/// mappings accumulate each output over K blocks in ascending order.
MatrixF gemm(const QuantizedTensor& a, const QuantizedTensor& b, Mapping mapping,
             const MacConfig& cfg = {});

/// Dense binary64 GEMM, k ascending.
Matrix reference_gemm(const Matrix& a, const Matrix& b);

}  // namespace mxsafe
