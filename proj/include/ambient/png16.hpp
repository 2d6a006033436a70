// Copyright 2026 The Ambient Depth Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Minimal PNG codec for the one pixel format this project stores:
// 16-bit grayscale, non-interlaced. Writing always uses filter 0; reading
// handles all five standard scanline filters.

#ifndef AMBIENT_PNG16_HPP_
#define AMBIENT_PNG16_HPP_

#include <zlib.h>

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambient::png16 {

struct Image {
  uint32_t width = 0;
  uint32_t height = 0;
  std::vector<uint16_t> pixels;  // row-major

  uint16_t at(uint32_t r, uint32_t c) const {
    return pixels[size_t(r) * width + c];
  }
};

namespace detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void put_chunk(std::vector<uint8_t>& out, const char type[5],
                      const std::vector<uint8_t>& payload) {
  put_u32(out, static_cast<uint32_t>(payload.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_u32(out, crc);
}

inline uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
  if (pb <= pc) return static_cast<uint8_t>(b);
  return static_cast<uint8_t>(c);
}

}  // namespace detail

inline std::vector<uint8_t> encode(const Image& img) {
  if (img.width == 0 || img.height == 0 ||
      img.pixels.size() != size_t(img.width) * img.height)
    throw std::invalid_argument("png16: bad image dimensions");

  // filter byte + big-endian 16-bit samples, per row
  std::vector<uint8_t> raw;
  raw.reserve(size_t(img.height) * (1 + 2 * img.width));
  for (uint32_t r = 0; r < img.height; ++r) {
    raw.push_back(0);
    for (uint32_t c = 0; c < img.width; ++c) {
      const uint16_t v = img.at(r, c);
      raw.push_back(static_cast<uint8_t>(v >> 8));
      raw.push_back(static_cast<uint8_t>(v & 0xff));
    }
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("png16: zlib compress failed");
  comp.resize(comp_len);

  static const uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> out(kSig, kSig + 8);
  std::vector<uint8_t> ihdr;
  detail::put_u32(ihdr, img.width);
  detail::put_u32(ihdr, img.height);
  ihdr.push_back(16);  // bit depth
  ihdr.push_back(0);   // grayscale
  ihdr.push_back(0);   // deflate
  ihdr.push_back(0);   // adaptive filtering
  ihdr.push_back(0);   // no interlace
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", comp);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline Image decode(const std::vector<uint8_t>& bytes) {
  static const uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSig, 8) != 0)
    throw std::runtime_error("png16: not a PNG file");

  Image img;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 12 <= bytes.size() && !saw_iend) {
    const uint32_t len = detail::get_u32(&bytes[pos]);
    if (pos + 12 + len > bytes.size())
      throw std::runtime_error("png16: truncated chunk");
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const uint8_t* payload = &bytes[pos + 8];
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw std::runtime_error("png16: bad IHDR");
      img.width = detail::get_u32(payload);
      img.height = detail::get_u32(payload + 4);
      if (payload[8] != 16 || payload[9] != 0)
        throw std::runtime_error("png16: only 16-bit grayscale supported");
      if (payload[12] != 0)
        throw std::runtime_error("png16: interlaced PNG not supported");
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || img.width == 0 || img.height == 0)
    throw std::runtime_error("png16: malformed PNG structure");

  const size_t stride = 1 + 2 * size_t(img.width);
  std::vector<uint8_t> raw(stride * img.height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw std::runtime_error("png16: zlib inflate failed");

  // undo per-row filters; bytes-per-pixel is 2
  const int bpp = 2;
  std::vector<uint8_t> prev(2 * size_t(img.width), 0);
  img.pixels.resize(size_t(img.width) * img.height);
  for (uint32_t r = 0; r < img.height; ++r) {
    uint8_t* row = &raw[r * stride + 1];
    const uint8_t filter = raw[r * stride];
    const size_t rb = 2 * size_t(img.width);
    for (size_t i = 0; i < rb; ++i) {
      const int left = i >= size_t(bpp) ? row[i - bpp] : 0;
      const int up = prev[i];
      const int ul = i >= size_t(bpp) ? prev[i - bpp] : 0;
      switch (filter) {
        case 0: break;
        case 1: row[i] = static_cast<uint8_t>(row[i] + left); break;
        case 2: row[i] = static_cast<uint8_t>(row[i] + up); break;
        case 3: row[i] = static_cast<uint8_t>(row[i] + (left + up) / 2); break;
        case 4:
          row[i] = static_cast<uint8_t>(row[i] + detail::paeth(left, up, ul));
          break;
        default:
          throw std::runtime_error("png16: unknown scanline filter");
      }
    }
    for (uint32_t c = 0; c < img.width; ++c)
      img.pixels[size_t(r) * img.width + c] =
          static_cast<uint16_t>((uint16_t(row[2 * c]) << 8) | row[2 * c + 1]);
    std::memcpy(prev.data(), row, rb);
  }
  return img;
}

inline void write_file(const std::string& path, const Image& img) {
  auto bytes = encode(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("png16: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

inline Image read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("png16: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace ambient::png16

#endif  // AMBIENT_PNG16_HPP_
