#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "budgetkv/numerics.hpp"

namespace budgetkv::quant {

// One group of a 4-bit min-max affine quantization. An element decodes as
// zero_point + code * scale; scale is (max - min) / 15 over the group, or
// 0 for a constant group.
struct QuantizedBlock {
  std::vector<std::uint8_t> codes;  // one code per element, 0..15
  double scale = 0.0;
  double zero_point = 0.0;
};

// Splits values into ceil(n / g) groups and quantizes each with min-max
// affine mapping onto 0..15. Rounding is half-to-even. Empty input yields
// an empty block list.
std::vector<QuantizedBlock> quantize_group(const Vector& values, std::size_t g);

// Affine reconstruction; rejects codes above 15.
Vector dequantize(const std::vector<QuantizedBlock>& blocks);

// Storage cost of the scheme: 4 bits per element plus two 32-bit floats
// per group.
double bytes_per_element(std::size_t dim, std::size_t group_size);

// Binary dump layout, little-endian throughout:
//   u32 entry_count, u32 dim, u32 group_size
//   per entry: u64 token_position,
//              key blocks then value blocks, ceil(dim/group_size) each:
//                f32 scale, f32 zero_point,
//                ceil(count/2) bytes of packed nibbles (element 2i in the
//                low nibble of byte i, element 2i+1 in the high nibble).
struct QuantizedEntryDump {
  std::uint64_t token_position = 0;
  std::vector<QuantizedBlock> key;
  std::vector<QuantizedBlock> value;
};

struct QuantizedCacheDump {
  std::uint32_t dim = 0;
  std::uint32_t group_size = 0;
  std::vector<QuantizedEntryDump> entries;
};

void write_dump(const QuantizedCacheDump& dump, std::ostream& out);
QuantizedCacheDump read_dump(std::istream& in);

}  // namespace budgetkv::quant
