#include "emvlab/crypto.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>

namespace emvlab {

std::array<uint8_t, 32> sha256(const Bytes& msg) {
    std::array<uint8_t, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(msg.data(), msg.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32)
        throw std::runtime_error("SHA-256 failed");
    return out;
}

// HMAC composed from two one-shot digests; avoids the deprecated HMAC()
// entry point and per-call EVP_MAC context setup.
std::array<uint8_t, 32> hmac_sha256(const Bytes& key, const Bytes& msg) {
    constexpr size_t kBlock = 64;
    std::array<uint8_t, kBlock> k0{};
    if (key.size() > kBlock) {
        auto digest = sha256(key);
        std::memcpy(k0.data(), digest.data(), digest.size());
    } else {
        std::memcpy(k0.data(), key.data(), key.size());
    }

    Bytes inner(kBlock + msg.size());
    for (size_t i = 0; i < kBlock; ++i) inner[i] = k0[i] ^ 0x36;
    std::memcpy(inner.data() + kBlock, msg.data(), msg.size());
    auto inner_digest = sha256(inner);

    Bytes outer(kBlock + inner_digest.size());
    for (size_t i = 0; i < kBlock; ++i) outer[i] = k0[i] ^ 0x5c;
    std::memcpy(outer.data() + kBlock, inner_digest.data(), inner_digest.size());
    return sha256(outer);
}

void Sha256Stream::refill() {
    Bytes msg;
    msg.reserve(16);
    put_be64(msg, seed_);
    put_be64(msg, block_index_++);
    block_ = sha256(msg);
    word_pos_ = 0;
}

uint32_t Sha256Stream::next_u32() {
    if (word_pos_ >= 8) refill();
    return read_be32(block_.data() + 4 * word_pos_++);
}

uint64_t Sha256Stream::next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double Sha256Stream::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t SplitMix64::next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double SplitMix64::next_unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

uint64_t SplitMix64::next_below(uint64_t bound) {
    if (bound == 0) return 0;
    return static_cast<uint64_t>((static_cast<__uint128_t>(next()) * bound) >> 64);
}

}  // namespace emvlab
