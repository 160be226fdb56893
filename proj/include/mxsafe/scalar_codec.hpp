// SPDX-License-Identifier: Apache-2.0
//
// Element formats and single-element encode/decode relative to a block's
// shared exponent S_e. A code with exponent field f in an FP format with
// bias b represents 2^(S_e - b + f) * 1.m, and field 0 represents the
// subnormal 2^(S_e - b + 1) * 0.m. For the standard MX element formats the
// bias equals the maximum local exponent E = 2^e_f - 1, so the top field
// lines up with 2^S_e.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

namespace mxsafe {

enum class ElementKind : std::uint8_t { Int, Fp, DualMode };

/// Ids 0..7 double as the format byte of the .mxb file layout.
enum class FormatId : std::uint8_t {
  Int8 = 0,
  E4M3 = 1,
  E5M2 = 2,
  E2M5 = 3,
  Mxsf = 4,
  E2M1 = 5,
  E2M3 = 6,
  E3M2 = 7,
  // Sub-FP payload of MXSF (E3M2 with bias 10); in-memory only. Stand-alone
  // codes carry a sign bit above the 5 payload bits.
  Fp5E3M2 = 8,
};

struct ElementFormat {
  FormatId id;
  ElementKind kind;
  int exp_bits;   // e_f, 0 for INT
  int man_bits;   // m_f; for INT this is m_i and counts the sign bit
  int bias;
  int width;      // N, total code bits
  std::string_view name;

  int max_local_exp() const noexcept { return (1 << exp_bits) - 1; }
  std::uint32_t code_count() const noexcept { return 1u << width; }
};

const ElementFormat& element_format(FormatId id);
std::span<const FormatId> all_formats();
/// Formats that can be stored in an .mxb file (ids 0..7).
std::span<const FormatId> file_formats();
std::optional<FormatId> parse_format(std::string_view name);

/// x = sign * significand * 2^exponent, significand in [1,2).
struct ScalarDecomp {
  int sign = 1;
  int exponent = 0;
  double significand = 0.0;
  bool is_zero = true;

  double value() const;
};

ScalarDecomp decompose(double x);

enum class MxsfMode : std::uint8_t { NotApplicable, E2M5, E3M2 };

struct ElementCode {
  std::uint8_t bits = 0;
  FormatId format = FormatId::Int8;

  MxsfMode mxsf_mode() const noexcept;
  friend bool operator==(const ElementCode&, const ElementCode&) = default;
};

struct Quantized {
  double value = 0.0;
  ElementCode code;
};

/// Nearest multiple of 2^-frac_bits, ties to even.
double round_significand(double value, int frac_bits);

/// Sign-magnitude fixed point with m_i - 2 fractional bits below 2^S_e,
/// saturating at (2^(m_i-1) - 1) grid steps. m_i in [2, 8].
Quantized quantize_int(const ScalarDecomp& x, int shared_exp, int m_i = 8);

/// x_le = bias - (S_e - e_x); equals E - (S_e - e_x) for the standard formats.
int local_exponent(int exponent, int shared_exp, const ElementFormat& fmt);

Quantized quantize_fp(const ScalarDecomp& x, int shared_exp, const ElementFormat& fmt);

/// Dual-mode MXSF: E2M5 (bias 3) when S_e - e_x < 3, otherwise the E3M2
/// (bias 10) payload behind a zero 2-bit exponent field.
Quantized encode_mxsf(const ScalarDecomp& x, int shared_exp);

Quantized encode(double x, int shared_exp, FormatId format);

double decode(ElementCode code, int shared_exp);

}  // namespace mxsafe
