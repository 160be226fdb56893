// SPDX-License-Identifier: Apache-2.0
//
// File formats, all multi-byte integers little-endian.
//
// Dense tensor:
//   u32 header_length | header text ("rows=R\ncols=C\ncount=N\n")
//   | N x binary32, row-major
//
// MX tensor (.mxb):
//   "MXB1" | u8 format id | u16 tile rows | u16 tile cols | u32 rows | u32 cols
//   then one record per block, row-major over the tile grid:
//   u8 S_e + 127 (0xFF marks an all-zero block) | element codes row-major
//   within the tile (one byte each for 8-bit formats, otherwise a
//   little-endian bit stream zero-padded to a byte boundary)
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mxsafe/block_quant.hpp"
#include "mxsafe/matrix.hpp"

namespace mxsafe {

inline constexpr std::size_t kMxbHeaderBytes = 17;
inline constexpr std::uint8_t kZeroBlockByte = 0xFF;
inline constexpr int kSharedExpFileBias = 127;

std::vector<std::uint8_t> serialize_dense(const Matrix& m);
Matrix deserialize_dense(std::span<const std::uint8_t> bytes);
void save_dense(const std::filesystem::path& path, const Matrix& m);
Matrix load_dense(const std::filesystem::path& path);

/// Bytes used by one block record of the given tile and format.
std::size_t mxb_block_bytes(TileShape tile, FormatId format);

std::vector<std::uint8_t> serialize_mxb(const QuantizedTensor& q);
QuantizedTensor deserialize_mxb(std::span<const std::uint8_t> bytes);
void save_mxb(const std::filesystem::path& path, const QuantizedTensor& q);
QuantizedTensor load_mxb(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace mxsafe
