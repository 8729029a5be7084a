#include "emvlab/core.hpp"

#include <algorithm>
#include <cstring>

#include "emvlab/crypto.hpp"

namespace emvlab {

Udk Udk::from_bytes(const Bytes& b) {
    if (b.size() != 16) throw std::invalid_argument("UDK must be exactly 16 bytes");
    Udk udk;
    std::copy(b.begin(), b.end(), udk.bytes.begin());
    return udk;
}

Iad Iad::from_bytes(Bytes b) {
    if (b.empty() || b.size() > 32) throw std::invalid_argument("IAD length must be in 1..32");
    return Iad{std::move(b)};
}

Iad Iad::from_ext_auth(bool performed, bool succeeded) {
    uint8_t b0 = 0;
    if (performed) b0 |= 0x01;
    if (succeeded) b0 |= 0x02;
    return Iad{Bytes{b0}};
}

bool is_valid_date(uint32_t yyyymmdd) {
    uint32_t year = yyyymmdd / 10000;
    uint32_t month = (yyyymmdd / 100) % 100;
    uint32_t day = yyyymmdd % 100;
    if (month < 1 || month > 12 || day < 1) return false;
    static constexpr uint32_t kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    uint32_t max_day = kDays[month - 1];
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) max_day = 29;
    return day <= max_day;
}

const char* to_string(CryptogramKind kind) {
    switch (kind) {
        case CryptogramKind::AAC: return "AAC";
        case CryptogramKind::ARQC: return "ARQC";
        case CryptogramKind::TC: return "TC";
    }
    return "?";
}

bool is_valid_pan(const std::string& pan) {
    if (pan.size() < 12 || pan.size() > 19) return false;
    return std::all_of(pan.begin(), pan.end(), [](char c) { return c >= '0' && c <= '9'; });
}

static Bytes key_bytes(const Udk& k) { return Bytes(k.bytes.begin(), k.bytes.end()); }

Udk derive_session_key(const Udk& udk, Atc atc) {
    Bytes msg{'S', 'K'};
    put_be16(msg, atc.value);
    auto digest = hmac_sha256(key_bytes(udk), msg);
    Udk sk;
    std::copy_n(digest.begin(), 16, sk.bytes.begin());
    return sk;
}

Bytes serialize_context(const TransactionContext& ctx, Atc atc, const Iad& iad) {
    if (iad.bytes.empty() || iad.bytes.size() > 32)
        throw std::invalid_argument("IAD length must be in 1..32");
    Bytes out;
    out.reserve(27 + iad.bytes.size());
    put_be64(out, ctx.amount);
    put_be16(out, ctx.currency);
    put_be32(out, ctx.date);
    put_be16(out, ctx.terminal_country);
    out.insert(out.end(), ctx.tvr.bits.begin(), ctx.tvr.bits.end());
    put_be32(out, ctx.un.value);
    put_be16(out, atc.value);
    out.push_back(static_cast<uint8_t>(iad.bytes.size()));
    out.insert(out.end(), iad.bytes.begin(), iad.bytes.end());
    return out;
}

static std::array<uint8_t, 8> truncated_mac(const Udk& session_key, const Bytes& msg) {
    auto digest = hmac_sha256(key_bytes(session_key), msg);
    std::array<uint8_t, 8> mac{};
    std::copy_n(digest.begin(), 8, mac.begin());
    return mac;
}

Cryptogram compute_cryptogram(CryptogramKind kind, const Udk& udk, const TransactionContext& ctx,
                              Atc atc, const Iad& iad, std::optional<Arc> arc) {
    if ((kind == CryptogramKind::TC) != arc.has_value())
        throw std::invalid_argument("ARC must be supplied for TC and only for TC");
    Udk sk = derive_session_key(udk, atc);
    Bytes msg{static_cast<uint8_t>(kind)};
    Bytes ctx_bytes = serialize_context(ctx, atc, iad);
    msg.insert(msg.end(), ctx_bytes.begin(), ctx_bytes.end());
    if (arc) {
        auto arc_bytes = arc->to_bytes();
        msg.insert(msg.end(), arc_bytes.begin(), arc_bytes.end());
    }
    return Cryptogram{kind, truncated_mac(sk, msg), atc, iad};
}

bool verify_cryptogram(CryptogramKind kind, const Udk& udk, const TransactionContext& ctx,
                       const Cryptogram& cryptogram, std::optional<Arc> arc) {
    if ((kind == CryptogramKind::TC) != arc.has_value()) return false;
    try {
        Cryptogram expected = compute_cryptogram(kind, udk, ctx, cryptogram.atc, cryptogram.iad, arc);
        return expected.mac == cryptogram.mac;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

Arpc compute_arpc(const Udk& udk, Atc atc, const std::array<uint8_t, 8>& arqc_mac, Arc arc) {
    Udk sk = derive_session_key(udk, atc);
    auto arc_bytes = arc.to_bytes();
    Bytes msg(arqc_mac.begin(), arqc_mac.end());
    msg[0] ^= arc_bytes[0];
    msg[1] ^= arc_bytes[1];
    return Arpc{truncated_mac(sk, msg)};
}

bool verify_arpc(const Udk& udk, Atc atc, const std::array<uint8_t, 8>& arqc_mac, Arc arc,
                 const Arpc& arpc) {
    return compute_arpc(udk, atc, arqc_mac, arc).mac == arpc.mac;
}

static Bytes frame_records(const std::vector<Bytes>& records) {
    Bytes msg{'S', 'D', 'A'};
    for (const Bytes& record : records) {
        put_be32(msg, static_cast<uint32_t>(record.size()));
        msg.insert(msg.end(), record.begin(), record.end());
    }
    return msg;
}

Bytes sign_static_data(const std::vector<Bytes>& records, const Udk& signing_key) {
    auto digest = hmac_sha256(key_bytes(signing_key), frame_records(records));
    return Bytes(digest.begin(), digest.end());
}

bool verify_static_data(const std::vector<Bytes>& records, const Udk& signing_key,
                        const Bytes& signature) {
    return sign_static_data(records, signing_key) == signature;
}

Bytes dda_sign(const Udk& dda_key, Un un) {
    Bytes msg{'D', 'D', 'A'};
    put_be32(msg, un.value);
    auto digest = hmac_sha256(key_bytes(dda_key), msg);
    return Bytes(digest.begin(), digest.begin() + 8);
}

}  // namespace emvlab
