#pragma once

// Model checkpoint container: an ordered list of named double-precision
// arrays. On disk: magic "TCLM", little-endian version u32, then for each
// block a name length u32, the name bytes, ndim u32, each dim u32, and the
// row-major f64 payload. Blocks are read until end of file.

#include <cstdint>
#include <string>
#include <vector>

#include "tclsta/bytes.hpp"
#include "tclsta/error.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedBlock {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

inline std::string encode_checkpoint(const std::vector<NamedBlock>& blocks) {
  std::string bytes = "TCLM";
  detail::put_u32(bytes, kCheckpointVersion);
  for (const NamedBlock& b : blocks) {
    detail::put_u32(bytes, static_cast<std::uint32_t>(b.name.size()));
    bytes += b.name;
    detail::put_u32(bytes, static_cast<std::uint32_t>(b.shape.size()));
    std::size_t count = 1;
    for (std::size_t d : b.shape) {
      detail::put_u32(bytes, static_cast<std::uint32_t>(d));
      count *= d;
    }
    if (b.values.size() != count)
      fail("shape-mismatch", "block '" + b.name + "' payload does not match its dims");
    for (double v : b.values) detail::put_f64(bytes, v);
  }
  return bytes;
}

inline void write_checkpoint(const std::string& path, const std::vector<NamedBlock>& blocks) {
  detail::write_file_bytes(path, encode_checkpoint(blocks));
}

inline std::vector<NamedBlock> read_checkpoint(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "TCLM") != 0)
    fail("corrupt-file", path + ": bad magic");
  detail::ByteReader r{bytes, 4, path};
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    fail("unsupported-version", path + ": version " + std::to_string(version));
  std::vector<NamedBlock> blocks;
  while (!r.at_end()) {
    NamedBlock b;
    const std::uint32_t name_len = r.u32();
    b.name = r.bytes(name_len);
    const std::uint32_t ndim = r.u32();
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      b.shape.push_back(r.u32());
      count *= b.shape.back();
    }
    if (count > (bytes.size() - r.pos) / 8)
      fail("corrupt-file", path + ": block '" + b.name + "' larger than the file");
    b.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) b.values.push_back(r.f64());
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// Helpers for moving parameter tensors in and out of blocks.

inline NamedBlock block_from_tensor(const std::string& name, const Tensor& t) {
  return NamedBlock{name, t.shape(), t.values()};
}

inline NamedBlock scalar_block(const std::string& name, double v) {
  return NamedBlock{name, Shape{}, {v}};
}

// Finds a block by name; the order of blocks is canonical on write but reads
// tolerate any order.
inline const NamedBlock& find_block(const std::vector<NamedBlock>& blocks, const std::string& name) {
  for (const NamedBlock& b : blocks)
    if (b.name == name) return b;
  fail("corrupt-file", "checkpoint is missing block '" + name + "'");
}

inline void load_into_tensor(const NamedBlock& block, Tensor& t) {
  if (block.shape != t.shape())
    fail("shape-mismatch", "block '" + block.name + "' has the wrong dimensions");
  t.mutable_values() = block.values;
}

inline double scalar_from_block(const NamedBlock& block) {
  if (block.values.size() != 1)
    fail("shape-mismatch", "block '" + block.name + "' is not a scalar");
  return block.values[0];
}

}  // namespace tclsta
