#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "star/image.hpp"

namespace star {

// Grid dump format: 8 magic bytes "STARF32\0", u32 LE height, u32 LE width,
// then height*width IEEE-754 LE f32 values in row-major order. No padding,
// no checksum.
inline constexpr unsigned char kRawGridMagic[8] = {0x53, 0x54, 0x41, 0x52,
                                                   0x46, 0x33, 0x32, 0x00};

namespace detail {

inline void put_u32le(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void write_raw_grid(const ImageGrid& g, std::ostream& out) {
  if (g.height < 1 || g.width < 1 ||
      g.data.size() != static_cast<std::size_t>(g.height) * g.width) {
    throw InvalidInput("write_raw_grid: malformed grid");
  }
  require_finite(g, "write_raw_grid");

  std::vector<unsigned char> buf(16 + g.size() * 4);
  std::memcpy(buf.data(), kRawGridMagic, 8);
  detail::put_u32le(buf.data() + 8, static_cast<std::uint32_t>(g.height));
  detail::put_u32le(buf.data() + 12, static_cast<std::uint32_t>(g.width));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float f = static_cast<float>(g.data[i]);
    detail::put_u32le(buf.data() + 16 + 4 * i, std::bit_cast<std::uint32_t>(f));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write_raw_grid: stream write failed");
}

inline ImageGrid read_raw_grid(std::istream& in) {
  unsigned char header[16];
  in.read(reinterpret_cast<char*>(header), 16);
  if (in.gcount() != 16) throw IoError("read_raw_grid: truncated header");
  if (std::memcmp(header, kRawGridMagic, 8) != 0) {
    throw IoError("read_raw_grid: bad magic");
  }
  const std::uint32_t h = detail::get_u32le(header + 8);
  const std::uint32_t w = detail::get_u32le(header + 12);
  if (h == 0 || w == 0) throw IoError("read_raw_grid: zero dimension");
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w;
  if (n > 0x7fffffffull) throw IoError("read_raw_grid: dimension overflow");

  std::vector<unsigned char> payload(static_cast<std::size_t>(n) * 4);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
    throw IoError("read_raw_grid: truncated payload");
  }

  ImageGrid g(static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const float f =
        std::bit_cast<float>(detail::get_u32le(payload.data() + 4 * i));
    if (!std::isfinite(f)) {
      throw IoError("read_raw_grid: non-finite value at pixel index " +
                    std::to_string(i));
    }
    g.data[i] = static_cast<double>(f);
  }
  return g;
}

inline void write_raw_grid(const ImageGrid& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_raw_grid: cannot open " + path);
  write_raw_grid(g, out);
}

inline ImageGrid read_raw_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_raw_grid: cannot open " + path);
  return read_raw_grid(in);
}

}  // namespace star
