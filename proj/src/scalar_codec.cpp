// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/scalar_codec.hpp"

#include <array>
#include <cmath>
#include <string>

#include "mxsafe/error.hpp"

namespace mxsafe {

namespace {

constexpr std::array<ElementFormat, 9> kFormats = {{
    {FormatId::Int8, ElementKind::Int, 0, 8, 0, 8, "int8"},
    {FormatId::E4M3, ElementKind::Fp, 4, 3, 15, 8, "e4m3"},
    {FormatId::E5M2, ElementKind::Fp, 5, 2, 31, 8, "e5m2"},
    {FormatId::E2M5, ElementKind::Fp, 2, 5, 3, 8, "e2m5"},
    {FormatId::Mxsf, ElementKind::DualMode, 2, 5, 3, 8, "mxsf"},
    {FormatId::E2M1, ElementKind::Fp, 2, 1, 3, 4, "e2m1"},
    {FormatId::E2M3, ElementKind::Fp, 2, 3, 3, 6, "e2m3"},
    {FormatId::E3M2, ElementKind::Fp, 3, 2, 7, 6, "e3m2"},
    {FormatId::Fp5E3M2, ElementKind::Fp, 3, 2, 10, 6, "fp5_e3m2"},  // sign + 5-bit payload
}};

constexpr std::array<FormatId, 9> kAllIds = {
    FormatId::Int8, FormatId::E4M3, FormatId::E5M2, FormatId::E2M5,   FormatId::Mxsf,
    FormatId::E2M1, FormatId::E2M3, FormatId::E3M2, FormatId::Fp5E3M2};

// MXSF sub-FP payload: bias 10 puts its top field (7) at offset -3, right
// below the lowest E2M5 normal binade.
constexpr int kMxsfModeGap = 3;

double signed_zero(int sign) { return sign < 0 ? -0.0 : 0.0; }

void check_below_shared(const ScalarDecomp& x, int shared_exp) {
  if (!x.is_zero && x.exponent > shared_exp) {
    throw Error(ErrorCode::ExponentAboveShared,
                "element exponent " + std::to_string(x.exponent) + " exceeds shared exponent " +
                    std::to_string(shared_exp));
  }
}

struct FpMagnitude {
  std::uint32_t field = 0;
  std::uint32_t mantissa = 0;
  bool overflow = false;  // significand carried past the top field
};

// Rounds |x| onto the grid of an FP element format; no saturation applied.
FpMagnitude round_fp_magnitude(const ScalarDecomp& x, int shared_exp, const ElementFormat& fmt) {
  const int mf = fmt.man_bits;
  const int field = local_exponent(x.exponent, shared_exp, fmt);
  FpMagnitude out;
  if (field > 0) {
    auto sig = static_cast<std::uint32_t>(std::nearbyint(std::ldexp(x.significand, mf)));
    int f = field;
    if (sig == (2u << mf)) {
      sig >>= 1;
      ++f;
    }
    if (f > fmt.max_local_exp()) {
      out.overflow = true;
      return out;
    }
    out.field = static_cast<std::uint32_t>(f);
    out.mantissa = sig - (1u << mf);
    return out;
  }
  // Subnormal grid step is 2^(S_e - bias + 1 - m_f).
  const double scaled = std::ldexp(x.significand, x.exponent + fmt.bias - 1 - shared_exp + mf);
  const auto k = static_cast<std::uint32_t>(std::nearbyint(scaled));
  // k == 2^m_f carries into field 1 with a zero mantissa.
  out.field = k >> mf;
  out.mantissa = k & ((1u << mf) - 1);
  return out;
}

double decode_fp_magnitude(std::uint32_t field, std::uint32_t mantissa, int shared_exp, int man_bits,
                           int bias) {
  if (field == 0) {
    return std::ldexp(static_cast<double>(mantissa), shared_exp - bias + 1 - man_bits);
  }
  return std::ldexp(static_cast<double>((1u << man_bits) | mantissa),
                    shared_exp - bias + static_cast<int>(field) - man_bits);
}

}  // namespace

const ElementFormat& element_format(FormatId id) {
  const auto idx = static_cast<std::size_t>(id);
  if (idx >= kFormats.size()) {
    throw Error(ErrorCode::UnknownFormatId, "format id " + std::to_string(idx));
  }
  return kFormats[idx];
}

std::span<const FormatId> all_formats() { return kAllIds; }

std::span<const FormatId> file_formats() { return std::span<const FormatId>(kAllIds).first(8); }

std::optional<FormatId> parse_format(std::string_view name) {
  for (const auto& f : kFormats) {
    if (f.name == name) return f.id;
  }
  return std::nullopt;
}

double ScalarDecomp::value() const {
  if (is_zero) return signed_zero(sign);
  return sign * std::ldexp(significand, exponent);
}

ScalarDecomp decompose(double x) {
  if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, "cannot decompose NaN/Inf");
  ScalarDecomp d;
  d.sign = std::signbit(x) ? -1 : 1;
  if (x == 0.0) return d;
  int e = 0;
  const double f = std::frexp(std::fabs(x), &e);  // f in [0.5, 1)
  d.is_zero = false;
  d.significand = 2.0 * f;
  d.exponent = e - 1;
  return d;
}

MxsfMode ElementCode::mxsf_mode() const noexcept {
  if (format != FormatId::Mxsf) return MxsfMode::NotApplicable;
  return ((bits >> 5) & 0x3u) == 0 ? MxsfMode::E3M2 : MxsfMode::E2M5;
}

double round_significand(double value, int frac_bits) {
  if (frac_bits < 0) throw Error(ErrorCode::InvalidArgument, "frac_bits must be >= 0");
  return std::ldexp(std::nearbyint(std::ldexp(value, frac_bits)), -frac_bits);
}

Quantized quantize_int(const ScalarDecomp& x, int shared_exp, int m_i) {
  if (m_i < 2 || m_i > 8) throw Error(ErrorCode::InvalidArgument, "m_i must be in [2, 8]");
  const std::uint32_t sign_bit = x.sign < 0 ? (1u << (m_i - 1)) : 0u;
  Quantized q;
  q.code.format = FormatId::Int8;
  if (x.is_zero) {
    q.value = signed_zero(x.sign);
    q.code.bits = static_cast<std::uint8_t>(sign_bit);
    return q;
  }
  check_below_shared(x, shared_exp);
  const int frac = m_i - 2;
  const std::uint32_t max_mag = (1u << (m_i - 1)) - 1;
  auto k = static_cast<std::uint32_t>(
      std::nearbyint(std::ldexp(x.significand, x.exponent - shared_exp + frac)));
  if (k > max_mag) k = max_mag;
  q.code.bits = static_cast<std::uint8_t>(sign_bit | k);
  q.value = k == 0 ? signed_zero(x.sign) : x.sign * std::ldexp(static_cast<double>(k), shared_exp - frac);
  return q;
}

int local_exponent(int exponent, int shared_exp, const ElementFormat& fmt) {
  return fmt.bias - (shared_exp - exponent);
}

Quantized quantize_fp(const ScalarDecomp& x, int shared_exp, const ElementFormat& fmt) {
  if (fmt.kind != ElementKind::Fp) {
    throw Error(ErrorCode::InvalidArgument, std::string(fmt.name) + " is not a plain FP format");
  }
  const std::uint32_t sign_bit = x.sign < 0 ? (1u << (fmt.width - 1)) : 0u;
  Quantized q;
  q.code.format = fmt.id;
  if (x.is_zero) {
    q.value = signed_zero(x.sign);
    q.code.bits = static_cast<std::uint8_t>(sign_bit);
    return q;
  }
  check_below_shared(x, shared_exp);
  FpMagnitude m = round_fp_magnitude(x, shared_exp, fmt);
  if (m.overflow) {
    m.field = static_cast<std::uint32_t>(fmt.max_local_exp());
    m.mantissa = (1u << fmt.man_bits) - 1;
  }
  q.code.bits = static_cast<std::uint8_t>(sign_bit | (m.field << fmt.man_bits) | m.mantissa);
  const double mag = decode_fp_magnitude(m.field, m.mantissa, shared_exp, fmt.man_bits, fmt.bias);
  q.value = mag == 0.0 ? signed_zero(x.sign) : x.sign * mag;
  return q;
}

Quantized encode_mxsf(const ScalarDecomp& x, int shared_exp) {
  const std::uint32_t sign_bit = x.sign < 0 ? 0x80u : 0u;
  Quantized q;
  q.code.format = FormatId::Mxsf;
  if (x.is_zero) {
    q.value = signed_zero(x.sign);
    q.code.bits = static_cast<std::uint8_t>(sign_bit);
    return q;
  }
  check_below_shared(x, shared_exp);
  const ElementFormat& wide = element_format(FormatId::E2M5);
  if (shared_exp - x.exponent < kMxsfModeGap) {
    const Quantized w = quantize_fp(x, shared_exp, wide);
    q.code.bits = w.code.bits;
    q.value = w.value;
    return q;
  }
  const ElementFormat& sub = element_format(FormatId::Fp5E3M2);
  const FpMagnitude m = round_fp_magnitude(x, shared_exp, sub);
  if (m.overflow) {
    // Rounded up to 2^(S_e - 2): exactly the first E2M5 normal, field 1.
    q.code.bits = static_cast<std::uint8_t>(sign_bit | (1u << wide.man_bits));
    q.value = x.sign * std::ldexp(1.0, shared_exp - 2);
    return q;
  }
  q.code.bits = static_cast<std::uint8_t>(sign_bit | (m.field << sub.man_bits) | m.mantissa);
  const double mag = decode_fp_magnitude(m.field, m.mantissa, shared_exp, sub.man_bits, sub.bias);
  q.value = mag == 0.0 ? signed_zero(x.sign) : x.sign * mag;
  return q;
}

Quantized encode(double x, int shared_exp, FormatId format) {
  const ScalarDecomp d = decompose(x);
  const ElementFormat& fmt = element_format(format);
  switch (fmt.kind) {
    case ElementKind::Int:
      return quantize_int(d, shared_exp, fmt.man_bits);
    case ElementKind::Fp:
      return quantize_fp(d, shared_exp, fmt);
    case ElementKind::DualMode:
      return encode_mxsf(d, shared_exp);
  }
  throw Error(ErrorCode::UnknownFormatId, "unreachable format kind");
}

double decode(ElementCode code, int shared_exp) {
  const ElementFormat& fmt = element_format(code.format);
  if (code.bits >= fmt.code_count()) {
    throw Error(ErrorCode::MalformedCode, "code " + std::to_string(code.bits) + " wider than " +
                                              std::to_string(fmt.width) + " bits for " +
                                              std::string(fmt.name));
  }
  const std::uint32_t bits = code.bits;
  const bool negative = (bits >> (fmt.width - 1)) & 1u;
  double mag = 0.0;
  switch (fmt.kind) {
    case ElementKind::Int: {
      const std::uint32_t k = bits & ((1u << (fmt.width - 1)) - 1);
      mag = std::ldexp(static_cast<double>(k), shared_exp - (fmt.man_bits - 2));
      break;
    }
    case ElementKind::Fp: {
      const std::uint32_t mant = bits & ((1u << fmt.man_bits) - 1);
      const std::uint32_t field = (bits >> fmt.man_bits) & ((1u << fmt.exp_bits) - 1);
      mag = decode_fp_magnitude(field, mant, shared_exp, fmt.man_bits, fmt.bias);
      break;
    }
    case ElementKind::DualMode: {
      const std::uint32_t field = (bits >> 5) & 0x3u;
      if (field != 0) {
        mag = decode_fp_magnitude(field, bits & 0x1Fu, shared_exp, 5, 3);
      } else {
        mag = decode_fp_magnitude((bits >> 2) & 0x7u, bits & 0x3u, shared_exp, 2, 10);
      }
      break;
    }
  }
  return negative ? -mag : mag;
}

}  // namespace mxsafe
