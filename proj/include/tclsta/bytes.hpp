#pragma once

// Little-endian byte packing shared by the binary file formats.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "tclsta/error.hpp"

namespace tclsta::detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  put_u32(out, bits);
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos;
  std::string path;  // for error messages

  bool at_end() const { return pos == buf.size(); }

  std::uint32_t u32() {
    if (pos + 4 > buf.size()) fail("corrupt-file", path + ": truncated");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]);
    pos += 4;
    return v;
  }

  float f32() {
    std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
  }

  double f64() {
    if (pos + 8 > buf.size()) fail("corrupt-file", path + ": truncated");
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i)
      bits = (bits << 8) | static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)]);
    pos += 8;
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  std::string bytes(std::size_t n) {
    if (pos + n > buf.size()) fail("corrupt-file", path + ": truncated");
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("file-not-found", path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("file-not-found", path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail("corrupt-file", path + ": short write");
}

}  // namespace tclsta::detail
