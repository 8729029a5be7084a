#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "emvlab/bytes.hpp"

namespace emvlab {

/// 16-byte symmetric key shared between a card and its issuer; the
/// cryptogram-generation key.
struct Udk {
    std::array<uint8_t, 16> bytes{};

    static Udk from_bytes(const Bytes& b);
    bool operator==(const Udk&) const = default;
};

/// Application transaction counter. 16 bits; a card that reaches the top of
/// the range disables itself rather than wrapping.
struct Atc {
    uint16_t value = 0;

    static constexpr uint16_t kMax = 0xFFFF;
    auto operator<=>(const Atc&) const = default;
};

/// The terminal's 32-bit "unpredictable number".
struct Un {
    uint32_t value = 0;

    auto operator<=>(const Un&) const = default;
};

/// Terminal verification results: five flag bytes. Only the flag that matters
/// here is named; unused bits stay zero.
struct Tvr {
    std::array<uint8_t, 5> bits{};

    bool sda_not_verified() const { return bits[0] & 0x01; }
    void set_sda_not_verified(bool v) { bits[0] = v ? (bits[0] | 0x01) : (bits[0] & ~0x01); }
    bool operator==(const Tvr&) const = default;
};

/// Issuer application data: opaque 1..32 bytes. The EXTERNAL AUTHENTICATE
/// status bit pair lives in byte 0, bits 0 and 1.
struct Iad {
    Bytes bytes{0x00};

    static Iad from_bytes(Bytes b);
    static Iad from_ext_auth(bool performed, bool succeeded);

    bool ext_auth_performed() const { return bytes[0] & 0x01; }
    bool ext_auth_succeeded() const { return bytes[0] & 0x02; }
    bool operator==(const Iad&) const = default;
};

/// Everything the terminal supplies to GENERATE AC. Deliberately carries no
/// terminal identity and no time of day; only the country code localizes the
/// transaction.
struct TransactionContext {
    uint64_t amount = 0;          // minor currency units
    uint16_t currency = 0;        // ISO 4217 numeric
    uint32_t date = 0;            // yyyymmdd
    uint16_t terminal_country = 0;
    Tvr tvr{};
    Un un{};

    bool operator==(const TransactionContext&) const = default;
};

/// True iff yyyymmdd denotes a real calendar date.
bool is_valid_date(uint32_t yyyymmdd);

enum class CryptogramKind : uint8_t { AAC = 0x00, ARQC = 0x01, TC = 0x02 };

const char* to_string(CryptogramKind kind);

struct Cryptogram {
    CryptogramKind kind = CryptogramKind::ARQC;
    std::array<uint8_t, 8> mac{};
    Atc atc{};
    Iad iad{};

    bool operator==(const Cryptogram&) const = default;
};

struct Arpc {
    std::array<uint8_t, 8> mac{};

    bool operator==(const Arpc&) const = default;
};

/// Authorization response code. Issuer decisions use the two named values;
/// arbitrary codes are representable (the ARPC construction XORs them in).
struct Arc {
    uint16_t code = 0;

    static constexpr uint16_t kApprove = 0x3030;
    static constexpr uint16_t kDecline = 0x3035;

    static Arc approve() { return Arc{kApprove}; }
    static Arc decline() { return Arc{kDecline}; }

    std::array<uint8_t, 2> to_bytes() const {
        return {static_cast<uint8_t>(code >> 8), static_cast<uint8_t>(code)};
    }
    bool operator==(const Arc&) const = default;
};

enum class CardOptions : uint8_t { SdaOnly = 0, DdaCapable = 1 };

/// Card data served during card authentication, including the copyable
/// static signature.
struct StaticCardData {
    std::string pan;            // 12..19 digits
    uint32_t start_date = 0;    // yyyymm
    uint32_t expiry_date = 0;   // yyyymm
    CardOptions supported_options = CardOptions::SdaOnly;
    std::vector<Bytes> records;
    Bytes sda_signature;

    bool operator==(const StaticCardData&) const = default;
};

bool is_valid_pan(const std::string& pan);

// --- operations --------------------------------------------------------

/// Per-ATC session key: first 16 bytes of HMAC-SHA256(udk, "SK" || atc_be16).
Udk derive_session_key(const Udk& udk, Atc atc);

/// Canonical byte layout MACed into cryptograms:
/// amount(8) || currency(2) || date(4) || country(2) || tvr(5) || un(4) ||
/// atc(2) || iad_len(1) || iad.
Bytes serialize_context(const TransactionContext& ctx, Atc atc, const Iad& iad);

/// MAC = first 8 bytes of HMAC-SHA256 under the session key over
/// kind_tag || serialize_context(...) || arc (TC only).
/// Throws std::invalid_argument unless arc is present exactly for TC.
Cryptogram compute_cryptogram(CryptogramKind kind, const Udk& udk, const TransactionContext& ctx,
                              Atc atc, const Iad& iad, std::optional<Arc> arc = std::nullopt);

/// Recomputes under the cryptogram's carried atc/iad. Returns false on any
/// mismatch, never throws. TC verification needs the ARC that was MACed.
bool verify_cryptogram(CryptogramKind kind, const Udk& udk, const TransactionContext& ctx,
                       const Cryptogram& cryptogram, std::optional<Arc> arc = std::nullopt);

/// MAC over (arqc_mac XOR arc right-padded to 8 bytes) under the session key.
Arpc compute_arpc(const Udk& udk, Atc atc, const std::array<uint8_t, 8>& arqc_mac, Arc arc);

bool verify_arpc(const Udk& udk, Atc atc, const std::array<uint8_t, 8>& arqc_mac, Arc arc,
                 const Arpc& arpc);

/// Static-signature stand-in: deterministic MAC under an issuer signing key
/// over the length-framed record list. Copyable bytes, no public-key math.
Bytes sign_static_data(const std::vector<Bytes>& records, const Udk& signing_key);
bool verify_static_data(const std::vector<Bytes>& records, const Udk& signing_key,
                        const Bytes& signature);

/// DDA challenge-response stand-in: MAC over "DDA" || un under the card's
/// dynamic key. A pure function of (key, un), so responses recorded for a UN
/// replay against that UN.
Bytes dda_sign(const Udk& dda_key, Un un);

}  // namespace emvlab
