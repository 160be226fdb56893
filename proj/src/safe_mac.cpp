// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/safe_mac.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include "mxsafe/error.hpp"
#include "mxsafe/parallel.hpp"

namespace mxsafe {

namespace {

int floor_log2(std::uint32_t v) { return std::bit_width(v) - 1; }

DecodedOperand decode_mxsf_operand(std::uint8_t bits) {
  DecodedOperand op;
  op.negative = (bits & 0x80u) != 0;
  // E3M2 when the 2nd and 3rd MSBs are both zero, E2M5 otherwise.
  if ((bits & 0x60u) != 0) {
    const int field = (bits >> 5) & 0x3;
    op.magnitude = 0x20u | (bits & 0x1Fu);
    op.lsb_exp = field - 3 - 5;
    return op;
  }
  const int field = (bits >> 2) & 0x7;
  const std::uint32_t mant = bits & 0x3u;
  if (field == 0) {
    op.magnitude = mant;
    op.lsb_exp = 1 - 10 - 2;
  } else {
    op.magnitude = 0x4u | mant;
    op.lsb_exp = field - 10 - 2;
  }
  return op;
}

struct Slice {
  std::vector<std::uint8_t> codes;
  int shared_exp = 0;
};

// K-slices of A's rows: slices[i * kblocks + kb].
std::vector<Slice> gather_rows(const QuantizedTensor& a, std::size_t kc, std::size_t kblocks) {
  std::vector<Slice> slices(a.rows() * kblocks);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t kb = 0; kb < kblocks; ++kb) {
      Slice& s = slices[i * kblocks + kb];
      s.codes.assign(kc, 0);
      s.shared_exp = a.shared_exp_at(i, kb * kc);
      for (std::size_t t = 0; t < kc && kb * kc + t < a.cols(); ++t) {
        s.codes[t] = a.code_at(i, kb * kc + t).bits;
      }
    }
  }
  return slices;
}

// K-slices of B's columns: slices[j * kblocks + kb].
std::vector<Slice> gather_cols(const QuantizedTensor& b, std::size_t kc, std::size_t kblocks) {
  std::vector<Slice> slices(b.cols() * kblocks);
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t kb = 0; kb < kblocks; ++kb) {
      Slice& s = slices[j * kblocks + kb];
      s.codes.assign(kc, 0);
      s.shared_exp = b.shared_exp_at(kb * kc, j);
      for (std::size_t t = 0; t < kc && kb * kc + t < b.rows(); ++t) {
        s.codes[t] = b.code_at(kb * kc + t, j).bits;
      }
    }
  }
  return slices;
}

class Accumulator {
 public:
  explicit Accumulator(InterBlockAccumulator kind) : kind_(kind) {}
  void add(double block_result) {
    if (kind_ == InterBlockAccumulator::Binary32) {
      f32_ += static_cast<float>(block_result);
    } else {
      f64_ += block_result;
    }
  }
  float result() const {
    return kind_ == InterBlockAccumulator::Binary32 ? f32_ : static_cast<float>(f64_);
  }

 private:
  InterBlockAccumulator kind_;
  float f32_ = 0.0f;
  double f64_ = 0.0;
};

}  // namespace

double DecodedOperand::value() const {
  const double mag = std::ldexp(static_cast<double>(magnitude), lsb_exp);
  return negative ? -mag : mag;
}

int DecodedOperand::offset() const { return is_zero() ? 0 : floor_log2(magnitude) + lsb_exp; }

double DecodedOperand::significand() const {
  return is_zero() ? 0.0 : std::ldexp(static_cast<double>(magnitude), lsb_exp - offset());
}

DecodedOperand decode_operand(ElementCode code) {
  const ElementFormat& fmt = element_format(code.format);
  if (code.bits >= fmt.code_count()) {
    throw Error(ErrorCode::MalformedCode, "operand code wider than its format");
  }
  if (fmt.kind == ElementKind::DualMode) return decode_mxsf_operand(code.bits);
  DecodedOperand op;
  op.negative = ((code.bits >> (fmt.width - 1)) & 1u) != 0;
  if (fmt.kind == ElementKind::Int) {
    op.magnitude = code.bits & ((1u << (fmt.width - 1)) - 1);
    op.lsb_exp = -(fmt.man_bits - 2);
    return op;
  }
  const std::uint32_t mant = code.bits & ((1u << fmt.man_bits) - 1);
  const int field = static_cast<int>((code.bits >> fmt.man_bits) & ((1u << fmt.exp_bits) - 1));
  if (field == 0) {
    op.magnitude = mant;
    op.lsb_exp = 1 - fmt.bias - fmt.man_bits;
  } else {
    op.magnitude = (1u << fmt.man_bits) | mant;
    op.lsb_exp = field - fmt.bias - fmt.man_bits;
  }
  return op;
}

double MacProduct::value() const {
  const double mag = std::ldexp(static_cast<double>(magnitude), lsb_exp);
  return negative ? -mag : mag;
}

double MacProduct::significand() const {
  return is_zero() ? 0.0 : std::ldexp(static_cast<double>(magnitude), lsb_exp - exponent_offset);
}

MacProduct multiply(const DecodedOperand& a, const DecodedOperand& b) {
  MacProduct p;
  if (a.is_zero() || b.is_zero()) return p;
  p.negative = a.negative != b.negative;
  p.magnitude = a.magnitude * b.magnitude;
  p.lsb_exp = a.lsb_exp + b.lsb_exp;
  p.exponent_offset = a.offset() + b.offset();
  return p;
}

Fp12 Fp12::from_bits(std::uint16_t bits) {
  if (bits >= (1u << 12)) throw Error(ErrorCode::MalformedCode, "FP12 pattern wider than 12 bits");
  return Fp12(bits);
}

double Fp12::max_finite() { return std::ldexp(double((2 << kManBits) - 1), kMaxExp - kManBits); }

double Fp12::min_subnormal() { return std::ldexp(1.0, kMinNormalExp - kManBits); }

double Fp12::half_ulp(double v) {
  const double a = std::fabs(v);
  int e = a == 0.0 ? kMinNormalExp : std::ilogb(a);
  if (e < kMinNormalExp) e = kMinNormalExp;
  if (e > kMaxExp) e = kMaxExp;
  return std::ldexp(1.0, e - kManBits - 1);
}

Fp12 Fp12::round(double v) {
  const std::uint16_t sign = std::signbit(v) ? 0x800u : 0u;
  double a = std::fabs(v);
  if (a == 0.0) return Fp12(sign);
  if (a >= max_finite()) {
    a = max_finite();
  } else {
    int e = std::ilogb(a);
    if (e < kMinNormalExp) e = kMinNormalExp;
    a = std::ldexp(std::nearbyint(std::ldexp(a, kManBits - e)), e - kManBits);
    if (a > max_finite()) a = max_finite();
  }
  if (a == 0.0) return Fp12(sign);
  const int e = std::ilogb(a);
  if (e < kMinNormalExp) {
    const auto mant = static_cast<std::uint16_t>(std::ldexp(a, kManBits - kMinNormalExp));
    return Fp12(static_cast<std::uint16_t>(sign | mant));
  }
  const auto field = static_cast<std::uint16_t>(e + kBias);
  const auto mant = static_cast<std::uint16_t>(std::ldexp(a, kManBits - e) - (1 << kManBits));
  return Fp12(static_cast<std::uint16_t>(sign | (field << kManBits) | mant));
}

double Fp12::value() const {
  const std::uint32_t mant = bits_ & ((1u << kManBits) - 1);
  const int field = (bits_ >> kManBits) & ((1 << kExpBits) - 1);
  const double mag = field == 0
                         ? std::ldexp(static_cast<double>(mant), kMinNormalExp - kManBits)
                         : std::ldexp(static_cast<double>((1u << kManBits) | mant),
                                      field - kBias - kManBits);
  return (bits_ & 0x800u) ? -mag : mag;
}

Fp12 adder_tree4(std::span<const MacProduct, 4> products, int fp12_anchor) {
  std::array<Fp12, 4> lanes;
  for (std::size_t i = 0; i < 4; ++i) {
    lanes[i] = Fp12::round(std::ldexp(products[i].value(), fp12_anchor));
  }
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double slice_dot(std::span<const std::uint8_t> a, FormatId format_a, int shared_a,
                 std::span<const std::uint8_t> b, FormatId format_b, int shared_b,
                 const MacConfig& cfg) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::BlockShapeMismatch,
                "block sizes differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  constexpr std::size_t kArity = MacConfig::kTreeArity;
  const std::size_t groups = (a.size() + kArity - 1) / kArity;
  Fp12 acc;
  double exact = 0.0;
  for (std::size_t g = 0; g < groups; ++g) {
    std::array<MacProduct, kArity> products{};
    for (std::size_t l = 0; l < kArity; ++l) {
      const std::size_t i = g * kArity + l;
      if (i >= a.size()) break;
      products[l] = multiply(decode_operand({a[i], format_a}), decode_operand({b[i], format_b}));
    }
    if (cfg.intra_block == IntraBlockMode::Fp12) {
      acc = acc + adder_tree4(products, cfg.fp12_anchor);
    } else {
      exact += (products[0].value() + products[1].value()) + (products[2].value() + products[3].value());
    }
  }
  if (cfg.intra_block == IntraBlockMode::Fp12) {
    return std::ldexp(acc.value(), shared_a + shared_b - cfg.fp12_anchor);
  }
  return std::ldexp(exact, shared_a + shared_b);
}

float block_dot(const QuantizedBlock& a, const QuantizedBlock& b, const MacConfig& cfg) {
  return static_cast<float>(
      slice_dot(a.codes, a.format, a.shared_exp, b.codes, b.format, b.shared_exp, cfg));
}

MatrixF gemm(const QuantizedTensor& a, const QuantizedTensor& b, Mapping mapping,
             const MacConfig& cfg) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::DimMismatch, "inner dims differ: " + std::to_string(a.cols()) + " vs " +
                                            std::to_string(b.rows()));
  }
  if (a.tile().cols != b.tile().rows) {
    throw Error(ErrorCode::TileIncompatible, "A tile columns must equal B tile rows");
  }
  if (mapping == Mapping::Tiled && !(a.tile().is_2d() && b.tile().is_2d())) {
    throw Error(ErrorCode::TileIncompatible, "tiled mapping needs 2D tiles on both operands");
  }
  const std::size_t kc = static_cast<std::size_t>(a.tile().cols);
  const std::size_t kblocks = (a.cols() + kc - 1) / kc;
  const std::vector<Slice> rows = gather_rows(a, kc, kblocks);
  const std::vector<Slice> cols = gather_cols(b, kc, kblocks);
  const std::size_t m = a.rows();
  const std::size_t n = b.cols();
  MatrixF c(m, n);

  auto contribution = [&](std::size_t i, std::size_t j, std::size_t kb) {
    const Slice& sa = rows[i * kblocks + kb];
    const Slice& sb = cols[j * kblocks + kb];
    return slice_dot(sa.codes, a.format(), sa.shared_exp, sb.codes, b.format(), sb.shared_exp, cfg);
  };

  if (mapping == Mapping::OneD) {
    parallel_for(m, [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) {
        Accumulator acc(cfg.inter_block);
        for (std::size_t kb = 0; kb < kblocks; ++kb) acc.add(contribution(i, j, kb));
        c(i, j) = acc.result();
      }
    });
    return c;
  }

  const std::size_t tr = static_cast<std::size_t>(a.tile().rows);
  const std::size_t tc = static_cast<std::size_t>(b.tile().cols);
  const std::size_t grid_r = (m + tr - 1) / tr;
  const std::size_t grid_c = (n + tc - 1) / tc;
  parallel_for(grid_r * grid_c, [&](std::size_t pair) {
    const std::size_t i0 = (pair / grid_c) * tr;
    const std::size_t j0 = (pair % grid_c) * tc;
    const std::size_t ti = std::min(tr, m - i0);
    const std::size_t tj = std::min(tc, n - j0);
    // Output-tile accumulators; each K step adds one tile-pair partial sum.
    std::vector<Accumulator> accs(ti * tj, Accumulator(cfg.inter_block));
    std::vector<double> partial(ti * tj);
    for (std::size_t kb = 0; kb < kblocks; ++kb) {
      for (std::size_t i = 0; i < ti; ++i)
        for (std::size_t j = 0; j < tj; ++j) partial[i * tj + j] = contribution(i0 + i, j0 + j, kb);
      for (std::size_t e = 0; e < partial.size(); ++e) accs[e].add(partial[e]);
    }
    for (std::size_t i = 0; i < ti; ++i)
      for (std::size_t j = 0; j < tj; ++j) c(i0 + i, j0 + j) = accs[i * tj + j].result();
  });
  return c;
}

Matrix reference_gemm(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::DimMismatch, "inner dims differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  }
  return c;
}

}  // namespace mxsafe
