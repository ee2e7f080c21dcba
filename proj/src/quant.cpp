#include "budgetkv/quant.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "budgetkv/errors.hpp"

namespace budgetkv::quant {

std::vector<QuantizedBlock> quantize_group(const Vector& values, std::size_t g) {
  if (g < 1) throw ContractViolation("quantize_group: group size must be >= 1");
  std::vector<QuantizedBlock> blocks;
  blocks.reserve((values.size() + g - 1) / g);
  for (std::size_t start = 0; start < values.size(); start += g) {
    const std::size_t end = std::min(values.size(), start + g);
    double lo = values[start];
    double hi = values[start];
    for (std::size_t i = start; i < end; ++i) {
      lo = std::min(lo, values[i]);
      hi = std::max(hi, values[i]);
    }
    QuantizedBlock block;
    block.zero_point = lo;
    block.scale = (hi - lo) / 15.0;
    block.codes.resize(end - start);
    for (std::size_t i = start; i < end; ++i) {
      std::uint8_t code = 0;
      if (block.scale > 0.0) {
        // nearbyint honours the default round-to-nearest-even mode.
        const double q = std::nearbyint((values[i] - lo) / block.scale);
        code = static_cast<std::uint8_t>(std::clamp(q, 0.0, 15.0));
      }
      block.codes[i - start] = code;
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

Vector dequantize(const std::vector<QuantizedBlock>& blocks) {
  std::size_t total = 0;
  for (const auto& block : blocks) total += block.codes.size();
  Vector out;
  out.reserve(total);
  for (const auto& block : blocks) {
    for (std::uint8_t code : block.codes) {
      if (code > 15) throw ContractViolation("dequantize: code out of range");
      out.push_back(block.zero_point + static_cast<double>(code) * block.scale);
    }
  }
  return out;
}

double bytes_per_element(std::size_t dim, std::size_t group_size) {
  if (dim == 0 || group_size == 0) {
    throw ContractViolation("bytes_per_element: dims must be positive");
  }
  const std::size_t groups = (dim + group_size - 1) / group_size;
  return 0.5 + static_cast<double>(groups) * 8.0 / static_cast<double>(dim);
}

namespace {

template <typename T>
void write_raw(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ContractViolation("quantized dump: truncated stream");
  return value;
}

void write_blocks(std::ostream& out, const std::vector<QuantizedBlock>& blocks) {
  for (const auto& block : blocks) {
    write_raw<float>(out, static_cast<float>(block.scale));
    write_raw<float>(out, static_cast<float>(block.zero_point));
    for (std::size_t i = 0; i < block.codes.size(); i += 2) {
      std::uint8_t byte = block.codes[i] & 0x0f;
      if (i + 1 < block.codes.size()) byte |= (block.codes[i + 1] & 0x0f) << 4;
      write_raw<std::uint8_t>(out, byte);
    }
  }
}

std::vector<QuantizedBlock> read_blocks(std::istream& in, std::size_t dim,
                                        std::size_t group_size) {
  std::vector<QuantizedBlock> blocks;
  for (std::size_t start = 0; start < dim; start += group_size) {
    const std::size_t count = std::min(group_size, dim - start);
    QuantizedBlock block;
    block.scale = read_raw<float>(in);
    block.zero_point = read_raw<float>(in);
    block.codes.resize(count);
    for (std::size_t i = 0; i < count; i += 2) {
      const std::uint8_t byte = read_raw<std::uint8_t>(in);
      block.codes[i] = byte & 0x0f;
      if (i + 1 < count) block.codes[i + 1] = byte >> 4;
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

}  // namespace

void write_dump(const QuantizedCacheDump& dump, std::ostream& out) {
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(dump.entries.size()));
  write_raw<std::uint32_t>(out, dump.dim);
  write_raw<std::uint32_t>(out, dump.group_size);
  for (const auto& entry : dump.entries) {
    write_raw<std::uint64_t>(out, entry.token_position);
    write_blocks(out, entry.key);
    write_blocks(out, entry.value);
  }
}

QuantizedCacheDump read_dump(std::istream& in) {
  QuantizedCacheDump dump;
  const auto count = read_raw<std::uint32_t>(in);
  dump.dim = read_raw<std::uint32_t>(in);
  dump.group_size = read_raw<std::uint32_t>(in);
  if (dump.dim == 0 || dump.group_size == 0) {
    throw ContractViolation("quantized dump: bad header");
  }
  dump.entries.resize(count);
  for (auto& entry : dump.entries) {
    entry.token_position = read_raw<std::uint64_t>(in);
    entry.key = read_blocks(in, dump.dim, dump.group_size);
    entry.value = read_blocks(in, dump.dim, dump.group_size);
  }
  return dump;
}

}  // namespace budgetkv::quant
