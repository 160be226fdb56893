// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "mxsafe/error.hpp"
#include "mxsafe/safe_mac.hpp"
#include "mxsafe/synthetic.hpp"

using namespace mxsafe;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected mxsafe::Error");
  return ErrorCode::InvalidArgument;
}

// Every nonnegative FP12 value, enumerated from the field layout.
const std::vector<double>& fp12_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g;
    for (int field = 0; field < 16; ++field)
      for (int m = 0; m < 128; ++m)
        g.push_back(field == 0 ? m * std::pow(2.0, -6 - 7) : (1.0 + m / 128.0) * std::pow(2.0, field - 7));
    return g;
  }();
  return grid;
}

// Nearest FP12 value, ties to the even mantissa, saturating.
double fp12_oracle(double x) {
  const auto& g = fp12_grid();
  const double a = std::fabs(x);
  auto it = std::lower_bound(g.begin(), g.end(), a);
  double pick;
  if (it == g.end()) {
    pick = g.back();
  } else if (it == g.begin()) {
    pick = *it;
  } else {
    const double lo = *(it - 1), hi = *it;
    if (a - lo != hi - a) {
      pick = a - lo < hi - a ? lo : hi;
    } else {
      pick = ((it - 1 - g.begin()) % 2 == 0) ? lo : hi;
    }
  }
  return std::copysign(pick, x);
}

// Datapath model from decoded element values only.
double oracle_slice_dot(const std::vector<std::uint8_t>& a, int sa, const std::vector<std::uint8_t>& b, int sb,
                        FormatId f) {
  double acc = 0.0;
  for (std::size_t g = 0; g < a.size(); g += 4) {
    std::array<double, 4> p{};
    for (std::size_t l = 0; l < 4 && g + l < a.size(); ++l) {
      p[l] = fp12_oracle(2.0 * decode({a[g + l], f}, 0) * decode({b[g + l], f}, 0));
    }
    const double tree = fp12_oracle(fp12_oracle(p[0] + p[1]) + fp12_oracle(p[2] + p[3]));
    acc = fp12_oracle(acc + tree);
  }
  return std::ldexp(acc, sa + sb - 1);
}

std::vector<std::uint8_t> random_codes(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  for (auto& c : v) c = static_cast<std::uint8_t>(rng());
  return v;
}

}  // namespace

TEST_CASE("decode_operand") {
  const DecodedOperand a = decode_operand({0x70, FormatId::Mxsf});
  CHECK_FALSE(a.negative);
  CHECK(a.offset() == 0);
  CHECK(a.significand() == 1.5);

  const DecodedOperand b = decode_operand({0x18, FormatId::Mxsf});
  CHECK(b.offset() == -4);
  CHECK(b.significand() == 1.0);

  CHECK(decode_operand({0x00, FormatId::Mxsf}).is_zero());
  CHECK(decode_operand({0x80, FormatId::Mxsf}).is_zero());
  CHECK(code_of([] { decode_operand({0x20, FormatId::E2M1}); }) == ErrorCode::MalformedCode);
}

TEST_CASE("property: decode_operand agrees with decode for every code") {
  for (FormatId f : all_formats()) {
    for (std::uint32_t c = 0; c < element_format(f).code_count(); ++c) {
      const ElementCode code{static_cast<std::uint8_t>(c), f};
      const DecodedOperand op = decode_operand(code);
      CHECK(op.value() == decode(code, 0));
      if (!op.is_zero()) {
        CHECK(op.significand() >= 1.0);
        CHECK(op.significand() < 2.0);
      }
    }
  }
}

TEST_CASE("multiply") {
  const DecodedOperand one_half = decode_operand({0x70, FormatId::Mxsf});
  const MacProduct p = multiply(one_half, one_half);
  CHECK(p.value() == 2.25);
  CHECK(p.exponent_offset == 0);
  CHECK(p.significand() == 2.25);

  const DecodedOperand low = decode_operand({0x04, FormatId::Mxsf});  // 1.0 * 2^-9
  const MacProduct q = multiply(low, low);
  CHECK(q.exponent_offset == -18);
  CHECK(q.significand() == 1.0);

  CHECK(multiply(one_half, decode_operand({0x00, FormatId::Mxsf})).is_zero());
}

TEST_CASE("property: 256 x 256 MXSF products are exact") {
  for (std::uint32_t i = 0; i < 256; ++i) {
    const ElementCode ca{static_cast<std::uint8_t>(i), FormatId::Mxsf};
    const DecodedOperand a = decode_operand(ca);
    for (std::uint32_t j = 0; j < 256; ++j) {
      const ElementCode cb{static_cast<std::uint8_t>(j), FormatId::Mxsf};
      const MacProduct p = multiply(a, decode_operand(cb));
      const double want = decode(ca, 0) * decode(cb, 0);
      if (p.value() != want) FAIL_CHECK("product " << i << " x " << j);
      if (!p.is_zero() && (p.significand() < 1.0 || p.significand() >= 4.0)) FAIL_CHECK("significand range");
    }
  }
}

TEST_CASE("Fp12") {
  CHECK(Fp12::max_finite() == 255.0 / 128.0 * 256.0);
  CHECK(Fp12::min_subnormal() == std::ldexp(1.0, -13));
  CHECK(Fp12::round(1e9).value() == Fp12::max_finite());
  CHECK(Fp12::round(-1e9).value() == -Fp12::max_finite());
  CHECK(Fp12::round(std::ldexp(1.0, -15)).value() == 0.0);
  CHECK(Fp12::round(1.0 + std::ldexp(1.0, -8)).value() == 1.0);  // tie to even
  CHECK(Fp12::round(1.0 + 3 * std::ldexp(1.0, -8)).value() == 1.0 + std::ldexp(1.0, -6));
  CHECK(code_of([] { Fp12::from_bits(0x1000); }) == ErrorCode::MalformedCode);
}

TEST_CASE("property: all 4096 FP12 patterns round-trip") {
  const auto& grid = fp12_grid();
  for (std::uint32_t bits = 0; bits < 4096; ++bits) {
    const Fp12 v = Fp12::from_bits(static_cast<std::uint16_t>(bits));
    CHECK(Fp12::round(v.value()).bits() == bits);
    CHECK(std::fabs(v.value()) == grid[bits & 0x7FF]);
  }
}

TEST_CASE("property: FP12 rounding matches the grid oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200000; ++i) {
    const double x = std::ldexp(u(rng), static_cast<int>(rng() % 26) - 16);
    if (Fp12::round(x).value() != fp12_oracle(x)) FAIL_CHECK("x=" << x);
  }
  // midpoints exercise ties
  const auto& g = fp12_grid();
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double mid = 0.5 * (g[i - 1] + g[i]);
    CHECK(Fp12::round(mid).value() == fp12_oracle(mid));
  }
}

TEST_CASE("adder_tree4") {
  const MacProduct one = multiply(decode_operand({0x60, FormatId::Mxsf}), decode_operand({0x60, FormatId::Mxsf}));
  REQUIRE(one.value() == 1.0);
  const std::array<MacProduct, 4> ones{one, one, one, one};
  CHECK(adder_tree4(ones).value() == std::ldexp(4.0, MacConfig{}.fp12_anchor));

  const std::array<MacProduct, 4> zeros{};
  CHECK(adder_tree4(zeros).value() == 0.0);

  const DecodedOperand x = decode_operand({0x70, FormatId::Mxsf});   // 1.5
  const DecodedOperand nx = decode_operand({0xF0, FormatId::Mxsf});  // -1.5
  const DecodedOperand y = decode_operand({0x60, FormatId::Mxsf});   // 1.0
  const DecodedOperand ny = decode_operand({0xE0, FormatId::Mxsf});  // -1.0
  const std::array<MacProduct, 4> cancel{multiply(x, x), multiply(x, nx), multiply(y, y), multiply(y, ny)};
  CHECK(adder_tree4(cancel).value() == 0.0);
}

TEST_CASE("block_dot") {
  std::vector<double> xs(32);
  for (std::size_t i = 0; i < 32; ++i) xs[i] = 0.1 * static_cast<double>(i + 1) - 1.7;
  std::vector<double> hot(32, 0.0);
  hot[0] = 1.0;
  const QuantizedBlock qx = quantize_block(xs, FormatId::Mxsf);
  const QuantizedBlock qh = quantize_block(hot, FormatId::Mxsf);
  CHECK(block_dot(qh, qx) == static_cast<float>(dequantize_block(qx)[0]));
  CHECK(block_dot(qh, qx, MacConfig::exact()) == static_cast<float>(dequantize_block(qx)[0]));

  const QuantizedBlock ones = quantize_block(std::vector<double>(32, 1.0), FormatId::Mxsf);
  CHECK(block_dot(ones, ones) == 32.0f);

  const QuantizedBlock zero = quantize_block(std::vector<double>(32, 0.0), FormatId::Mxsf);
  CHECK(block_dot(zero, qx) == 0.0f);

  const QuantizedBlock short_block = quantize_block(std::vector<double>(16, 1.0), FormatId::Mxsf);
  CHECK(code_of([&] { block_dot(short_block, qx); }) == ErrorCode::BlockShapeMismatch);
}

TEST_CASE("property: slice_dot matches the FP12 datapath oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    const auto a = random_codes(rng, n);
    const auto b = random_codes(rng, n);
    const int sa = static_cast<int>(rng() % 21) - 10;
    const int sb = static_cast<int>(rng() % 21) - 10;
    const double got = slice_dot(a, FormatId::Mxsf, sa, b, FormatId::Mxsf, sb);
    CHECK(got == oracle_slice_dot(a, sa, b, sb, FormatId::Mxsf));

    double exact = 0.0;
    for (std::size_t i = 0; i < n; ++i) exact += decode({a[i], FormatId::Mxsf}, sa) * decode({b[i], FormatId::Mxsf}, sb);
    CHECK(slice_dot(a, FormatId::Mxsf, sa, b, FormatId::Mxsf, sb, MacConfig::exact()) == exact);
  }
}

TEST_CASE("gemm") {
  const Matrix x = gaussian_matrix(8, 8, 1.0, 5);
  const QuantizedTensor qi = quantize_tensor(identity_matrix(8), {8, 8}, FormatId::Mxsf);
  const QuantizedTensor qx = quantize_tensor(x, {8, 8}, FormatId::Mxsf);
  const MatrixF ix = gemm(qi, qx, Mapping::Tiled, MacConfig::exact());
  const Matrix xhat = qx.dequantize();
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(ix(i, j) == static_cast<float>(xhat(i, j)));

  const QuantizedTensor q1 = quantize_tensor(x, {1, 8}, FormatId::Mxsf);
  CHECK(code_of([&] { gemm(q1, qx, Mapping::Tiled); }) == ErrorCode::TileIncompatible);
  const QuantizedTensor q16 = quantize_tensor(gaussian_matrix(16, 8, 1.0, 6), {8, 8}, FormatId::Mxsf);
  CHECK(code_of([&] { gemm(qx, q16, Mapping::OneD); }) == ErrorCode::DimMismatch);
  const QuantizedTensor q4 = quantize_tensor(x, {4, 4}, FormatId::Mxsf);
  CHECK(code_of([&] { gemm(qx, q4, Mapping::OneD); }) == ErrorCode::TileIncompatible);
}

TEST_CASE("reference_gemm") {
  const Matrix x = gaussian_matrix(5, 5, 1.0, 7);
  CHECK(reference_gemm(identity_matrix(5), x) == x);
  CHECK(reference_gemm(Matrix(1, 1, 3.0), Matrix(1, 1, -0.5))(0, 0) == -1.5);
}

TEST_CASE("property: OneD and Tiled mappings are bitwise identical") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = gaussian_matrix(20, 40, 1.0, 10 + seed);
    const Matrix b = log_normal_matrix(40, 12, 2.0, 20 + seed);
    const QuantizedTensor qa = quantize_tensor(a, {8, 8}, FormatId::Mxsf);
    const QuantizedTensor qb = quantize_tensor(b, {8, 8}, FormatId::Mxsf);
    for (const MacConfig& cfg : {MacConfig{}, MacConfig::exact()}) {
      CHECK(gemm(qa, qb, Mapping::OneD, cfg) == gemm(qa, qb, Mapping::Tiled, cfg));
    }
  }
}

TEST_CASE("property: exact GEMM equals the dense product of the dequantized operands") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const QuantizedTensor qa = quantize_tensor(gaussian_matrix(16, 64, 1.0, 30 + seed), {1, 32}, FormatId::Mxsf);
    const QuantizedTensor qb = quantize_tensor(gaussian_matrix(64, 16, 1.0, 40 + seed), {32, 1}, FormatId::Mxsf);
    const MatrixF c = gemm(qa, qb, Mapping::OneD, MacConfig::exact());
    const Matrix ref = reference_gemm(qa.dequantize(), qb.dequantize());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.data()[i] == static_cast<float>(ref.data()[i]));
  }
}

// Elementwise relative error is unbounded where outputs cancel, so the error
// is measured against sum_k |a_ik * b_kj|, the scale the FP12 roundings see.
TEST_CASE("default datapath error against the exact path") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const QuantizedTensor qa = quantize_tensor(gaussian_matrix(32, 32, 1.0, 50 + seed), {8, 8}, FormatId::Mxsf);
    const QuantizedTensor qb = quantize_tensor(gaussian_matrix(32, 32, 1.0, 60 + seed), {8, 8}, FormatId::Mxsf);
    const MatrixF approx = gemm(qa, qb, Mapping::Tiled);
    const MatrixF exact = gemm(qa, qb, Mapping::Tiled, MacConfig::exact());
    const Matrix da = qa.dequantize();
    const Matrix db = qb.dequantize();
    std::vector<double> rel;
    for (std::size_t i = 0; i < 32; ++i) {
      for (std::size_t j = 0; j < 32; ++j) {
        double scale = 0.0;
        for (std::size_t k = 0; k < 32; ++k) scale += std::fabs(da(i, k) * db(k, j));
        const double err = std::fabs(double(approx(i, j)) - exact(i, j));
        CHECK(err <= std::ldexp(scale, -5));
        if (exact(i, j) != 0.0f) rel.push_back(err / std::fabs(exact(i, j)));
      }
    }
    std::sort(rel.begin(), rel.end());
    CHECK(rel[rel.size() / 2] <= std::ldexp(1.0, -5));
  }
}
