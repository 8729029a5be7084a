#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace emvlab {

using Bytes = std::vector<uint8_t>;

inline void put_be16(Bytes& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void put_be32(Bytes& out, uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<uint8_t>(v >> shift));
}

inline void put_be64(Bytes& out, uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<uint8_t>(v >> shift));
}

inline uint32_t read_be32(const uint8_t* p) {
    return (uint32_t{p[0]} << 24) | (uint32_t{p[1]} << 16) | (uint32_t{p[2]} << 8) | uint32_t{p[3]};
}

inline uint64_t read_be64(const uint8_t* p) {
    return (uint64_t{read_be32(p)} << 32) | read_be32(p + 4);
}

std::string to_hex(const Bytes& data);
std::string to_hex_u32(uint32_t v);

/// Decodes a hex string (case-insensitive, even length). Empty optional on bad input.
std::optional<Bytes> from_hex(std::string_view hex);

}  // namespace emvlab
