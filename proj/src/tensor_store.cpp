// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/tensor_store.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "mxsafe/error.hpp"

namespace mxsafe {

namespace {

constexpr std::string_view kMxbMagic = "MXB1";

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T(bytes[offset + i]) << (8 * i));
  return v;
}

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::CorruptHeader, "bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_dense(const Matrix& m) {
  const std::string header = "rows=" + std::to_string(m.rows()) + "\ncols=" + std::to_string(m.cols()) +
                             "\ncount=" + std::to_string(m.size()) + "\n";
  std::vector<std::uint8_t> out;
  out.reserve(4 + header.size() + 4 * m.size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (double v : m.data()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Matrix deserialize_dense(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::CorruptHeader, "missing header length");
  const std::size_t header_len = get_le<std::uint32_t>(bytes, 0);
  if (bytes.size() < 4 + header_len) throw Error(ErrorCode::CorruptHeader, "header truncated");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data() + 4), header_len);

  std::map<std::string, std::size_t, std::less<>> fields;
  std::size_t pos = 0;
  while (pos < header.size()) {
    const std::size_t eol = header.find('\n', pos);
    const std::string_view line = header.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? header.size() : eol + 1;
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::CorruptHeader, "line without '='");
    fields[std::string(line.substr(0, eq))] = parse_size(line.substr(eq + 1));
  }
  for (const char* key : {"rows", "cols", "count"}) {
    if (!fields.contains(key)) throw Error(ErrorCode::CorruptHeader, std::string("missing key ") + key);
  }
  const std::size_t rows = fields["rows"];
  const std::size_t cols = fields["cols"];
  const std::size_t count = fields["count"];
  if (cols != 0 && rows > count / cols) throw Error(ErrorCode::CorruptHeader, "count != rows*cols");
  if (count != rows * cols) throw Error(ErrorCode::CorruptHeader, "count != rows*cols");

  const std::size_t payload = bytes.size() - 4 - header_len;
  if (payload < 4 * count) throw Error(ErrorCode::TruncatedPayload, "payload shorter than 4*count");
  if (payload > 4 * count) throw Error(ErrorCode::CorruptHeader, "trailing bytes after payload");
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, 4 + header_len + 4 * i));
  }
  return Matrix(rows, cols, std::move(data));
}

std::size_t mxb_block_bytes(TileShape tile, FormatId format) {
  const auto width = static_cast<std::size_t>(element_format(format).width);
  return 1 + (static_cast<std::size_t>(tile.size()) * width + 7) / 8;
}

std::vector<std::uint8_t> serialize_mxb(const QuantizedTensor& q) {
  const auto id = static_cast<std::uint8_t>(q.format());
  if (id > static_cast<std::uint8_t>(FormatId::E3M2)) {
    throw Error(ErrorCode::UnknownFormatId, "format has no file id");
  }
  const TileShape tile = q.tile();
  const std::size_t width = static_cast<std::size_t>(element_format(q.format()).width);
  std::vector<std::uint8_t> out(kMxbMagic.begin(), kMxbMagic.end());
  out.push_back(id);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(tile.rows));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(tile.cols));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.cols()));
  const std::size_t code_bytes = mxb_block_bytes(tile, q.format()) - 1;
  out.reserve(out.size() + q.block_count() * (code_bytes + 1));

  for (std::size_t br = 0; br < q.grid_rows(); ++br) {
    for (std::size_t bc = 0; bc < q.grid_cols(); ++bc) {
      const QuantizedBlock b = q.block(br, bc);
      out.push_back(b.zero_block ? kZeroBlockByte
                                 : static_cast<std::uint8_t>(b.shared_exp + kSharedExpFileBias));
      if (width == 8) {
        for (std::uint8_t c : b.codes) out.push_back(b.zero_block ? 0 : c);
        continue;
      }
      const std::size_t start = out.size();
      out.resize(start + code_bytes, 0);
      if (b.zero_block) continue;
      for (std::size_t i = 0; i < b.codes.size(); ++i) {
        for (std::size_t bit = 0; bit < width; ++bit) {
          if ((b.codes[i] >> bit) & 1u) {
            const std::size_t pos = i * width + bit;
            out[start + pos / 8] |= static_cast<std::uint8_t>(1u << (pos % 8));
          }
        }
      }
    }
  }
  return out;
}

QuantizedTensor deserialize_mxb(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMxbHeaderBytes) throw Error(ErrorCode::CorruptBlock, "file shorter than header");
  if (std::memcmp(bytes.data(), kMxbMagic.data(), kMxbMagic.size()) != 0) {
    throw Error(ErrorCode::BadMagic, "expected MXB1");
  }
  const std::uint8_t id = bytes[4];
  if (id > static_cast<std::uint8_t>(FormatId::E3M2)) {
    throw Error(ErrorCode::UnknownFormatId, "format id " + std::to_string(id));
  }
  const auto format = static_cast<FormatId>(id);
  const TileShape tile{get_le<std::uint16_t>(bytes, 5), get_le<std::uint16_t>(bytes, 7)};
  const std::size_t rows = get_le<std::uint32_t>(bytes, 9);
  const std::size_t cols = get_le<std::uint32_t>(bytes, 13);
  if (tile.rows == 0 || tile.cols == 0) throw Error(ErrorCode::CorruptBlock, "zero tile dimension");

  const std::size_t tr = static_cast<std::size_t>(tile.rows);
  const std::size_t tc = static_cast<std::size_t>(tile.cols);
  const std::size_t grid_r = (rows + tr - 1) / tr;
  const std::size_t grid_c = (cols + tc - 1) / tc;
  const std::size_t record = mxb_block_bytes(tile, format);
  if (bytes.size() != kMxbHeaderBytes + grid_r * grid_c * record) {
    throw Error(ErrorCode::CorruptBlock, "file length does not match the block grid");
  }
  const std::size_t width = static_cast<std::size_t>(element_format(format).width);
  const std::size_t lanes = tr * tc;

  std::vector<QuantizedBlock> blocks(grid_r * grid_c);
  std::size_t offset = kMxbHeaderBytes;
  for (std::size_t idx = 0; idx < blocks.size(); ++idx, offset += record) {
    QuantizedBlock& b = blocks[idx];
    b.format = format;
    b.codes.assign(lanes, 0);
    const auto payload = bytes.subspan(offset + 1, record - 1);
    if (width == 8) {
      std::copy(payload.begin(), payload.end(), b.codes.begin());
    } else {
      for (std::size_t i = 0; i < lanes; ++i) {
        std::uint8_t code = 0;
        for (std::size_t bit = 0; bit < width; ++bit) {
          const std::size_t pos = i * width + bit;
          code |= static_cast<std::uint8_t>(((payload[pos / 8] >> (pos % 8)) & 1u) << bit);
        }
        b.codes[i] = code;
      }
      const std::size_t used = lanes * width;
      if (used % 8 != 0 && (payload.back() >> (used % 8)) != 0) {
        throw Error(ErrorCode::CorruptBlock, "nonzero padding bits in block " + std::to_string(idx));
      }
    }
    const std::uint8_t se = bytes[offset];
    b.zero_block = se == kZeroBlockByte;
    b.shared_exp = b.zero_block ? 0 : static_cast<std::int8_t>(int(se) - kSharedExpFileBias);
    const std::size_t r0 = (idx / grid_c) * tr;
    const std::size_t c0 = (idx % grid_c) * tc;
    for (std::size_t i = 0; i < lanes; ++i) {
      const bool padded = r0 + i / tc >= rows || c0 + i % tc >= cols;
      if ((b.zero_block || padded) && b.codes[i] != 0) {
        throw Error(ErrorCode::CorruptBlock, "nonzero code in zero block or padding, block " +
                                                 std::to_string(idx));
      }
    }
  }
  return QuantizedTensor(rows, cols, tile, format, std::move(blocks));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

void save_dense(const std::filesystem::path& path, const Matrix& m) { write_file(path, serialize_dense(m)); }

Matrix load_dense(const std::filesystem::path& path) { return deserialize_dense(read_file(path)); }

void save_mxb(const std::filesystem::path& path, const QuantizedTensor& q) {
  write_file(path, serialize_mxb(q));
}

QuantizedTensor load_mxb(const std::filesystem::path& path) { return deserialize_mxb(read_file(path)); }

}  // namespace mxsafe
