#!/usr/bin/env python3
"""Independent reference oracle for the committed test-vector fixtures.

Implements the cryptographic profile and the UN generator families from
scratch on top of hashlib/hmac, with no dependency on the C++ code. The
files it writes are committed under fixtures/ and the C++ test suite (and
`emvlab gen-fixtures`) must reproduce them byte for byte.

Usage: python3 tests/oracle/gen_vectors.py [out_dir]
"""

import hashlib
import hmac
import json
import math
import os
import sys

# --- profile -----------------------------------------------------------

KIND_TAG = {"AAC": 0, "ARQC": 1, "TC": 2}
ARC_APPROVE = b"\x30\x30"
ARC_DECLINE = b"\x30\x35"


def be(value, width):
    return value.to_bytes(width, "big")


def derive_session_key(udk, atc):
    return hmac.new(udk, b"SK" + be(atc, 2), hashlib.sha256).digest()[:16]


def serialize_context(ctx, atc, iad):
    assert 1 <= len(iad) <= 32
    return (
        be(ctx["amount"], 8)
        + be(ctx["currency"], 2)
        + be(ctx["date"], 4)
        + be(ctx["terminal_country"], 2)
        + bytes.fromhex(ctx["tvr"])
        + be(ctx["un"], 4)
        + be(atc, 2)
        + be(len(iad), 1)
        + iad
    )


def compute_cryptogram(kind, udk, ctx, atc, iad, arc=None):
    assert (arc is not None) == (kind == "TC")
    sk = derive_session_key(udk, atc)
    msg = be(KIND_TAG[kind], 1) + serialize_context(ctx, atc, iad)
    if arc is not None:
        msg += arc
    return hmac.new(sk, msg, hashlib.sha256).digest()[:8]


def compute_arpc(udk, atc, arqc_mac, arc):
    sk = derive_session_key(udk, atc)
    padded = arc + b"\x00" * (8 - len(arc))
    xored = bytes(a ^ b for a, b in zip(arqc_mac, padded))
    return hmac.new(sk, xored, hashlib.sha256).digest()[:8]


# --- UN generators -----------------------------------------------------


def counter_prefix_un(prefix17, tick_us, now_ms):
    tick_ms = tick_us / 1000.0
    counter = math.floor(now_ms / tick_ms)
    return ((prefix17 << 15) | (counter % (1 << 15))) & 0xFFFFFFFF


LCG_A = 1103515245
LCG_C = 12345
LCG_M = 1 << 31


def lcg_sequence(seed, n_un):
    s = seed
    uns = []
    for _ in range(n_un):
        un = 0
        for _ in range(4):
            s = (LCG_A * s + LCG_C) % LCG_M
            un = (un << 8) | ((s >> 16) & 0xFF)
        uns.append(un)
    return uns


def book4_un(xor8, atc, now_s):
    digest = hashlib.sha256(xor8 + be(atc, 2) + be(now_s, 8)).digest()
    return int.from_bytes(digest[:4], "big")


def strong_sequence(seed, n_un):
    uns = []
    block = 0
    while len(uns) < n_un:
        digest = hashlib.sha256(be(seed, 8) + be(block, 8)).digest()
        for i in range(8):
            if len(uns) == n_un:
                break
            uns.append(int.from_bytes(digest[4 * i : 4 * i + 4], "big"))
        block += 1
    return uns


CHAR_C_MASK = 0x7F0FFFFF


def char_c_sequence(seed, n_un):
    return [u & CHAR_C_MASK for u in strong_sequence(seed, n_un)]


# --- vector emission ---------------------------------------------------


def dump(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def cryptogram_vectors():
    udk = bytes(range(16))
    zero_udk = bytes(16)
    ctx_palma = {
        "amount": 3000,
        "currency": 978,
        "date": 20110629,
        "terminal_country": 724,
        "tvr": "0000000000",
        "un": 0xF1246E04,
    }
    ctx_zero = {
        "amount": 0,
        "currency": 0,
        "date": 0,
        "terminal_country": 0,
        "tvr": "0000000000",
        "un": 0,
    }
    iad = b"\x06"
    rows = []

    rows.append(
        {
            "op": "derive_session_key",
            "udk": udk.hex(),
            "atc": 42,
            "session_key": derive_session_key(udk, 42).hex(),
        }
    )
    rows.append(
        {
            "op": "serialize_context",
            "ctx": ctx_zero,
            "atc": 0,
            "iad": "00",
            "serialized": serialize_context(ctx_zero, 0, b"\x00").hex(),
        }
    )
    rows.append(
        {
            "op": "serialize_context",
            "ctx": ctx_palma,
            "atc": 1,
            "iad": iad.hex(),
            "serialized": serialize_context(ctx_palma, 1, iad).hex(),
        }
    )
    for kind, arc in (("ARQC", None), ("TC", ARC_APPROVE), ("AAC", None)):
        row = {
            "op": "compute_cryptogram",
            "kind": kind,
            "udk": udk.hex(),
            "ctx": ctx_palma,
            "atc": 1,
            "iad": iad.hex(),
            "mac": compute_cryptogram(kind, udk, ctx_palma, 1, iad, arc).hex(),
        }
        if arc is not None:
            row["arc"] = arc.hex()
        rows.append(row)
    arqc = compute_cryptogram("ARQC", udk, ctx_palma, 1, iad)
    rows.append(
        {
            "op": "compute_arpc",
            "udk": udk.hex(),
            "atc": 1,
            "arqc_mac": arqc.hex(),
            "arc": ARC_APPROVE.hex(),
            "arpc": compute_arpc(udk, 1, arqc, ARC_APPROVE).hex(),
        }
    )
    zero_arqc = compute_cryptogram("ARQC", zero_udk, ctx_zero, 0, b"\x00")
    rows.append(
        {
            "op": "compute_cryptogram",
            "kind": "ARQC",
            "udk": zero_udk.hex(),
            "ctx": ctx_zero,
            "atc": 0,
            "iad": "00",
            "mac": zero_arqc.hex(),
        }
    )
    rows.append(
        {
            "op": "compute_arpc",
            "udk": zero_udk.hex(),
            "atc": 0,
            "arqc_mac": zero_arqc.hex(),
            "arc": "0000",
            "arpc": compute_arpc(zero_udk, 0, zero_arqc, b"\x00\x00").hex(),
        }
    )
    return rows


def generator_vectors():
    rows = []
    rows.append(
        {
            "kind": "counter_prefix",
            "prefix17": 0x1E248,
            "tick_us": 3300,
            "now_ms": 92942,
            "un": counter_prefix_un(0x1E248, 3300, 92942),
        }
    )
    rows.append(
        {
            "kind": "counter_prefix",
            "prefix17": 0x1E248,
            "tick_us": 3300,
            "now_ms": 16329,
            "un": counter_prefix_un(0x1E248, 3300, 16329),
        }
    )
    rows.append(
        {
            "kind": "counter_prefix",
            "prefix17": 0,
            "tick_us": 3300,
            "now_ms": 0,
            "un": counter_prefix_un(0, 3300, 0),
        }
    )
    for seed in (0, 12345):
        rows.append({"kind": "trunc_lcg", "seed": seed, "uns": lcg_sequence(seed, 4)})
    rows.append(
        {
            "kind": "book4",
            "xor8": "0000000000000000",
            "atc": 5,
            "now_s": 38244,
            "un": book4_un(bytes(8), 5, 38244),
        }
    )
    rows.append(
        {
            "kind": "book4",
            "xor8": "deadbeef01020304",
            "atc": 1000,
            "now_s": 1,
            "un": book4_un(bytes.fromhex("deadbeef01020304"), 1000, 1),
        }
    )
    rows.append({"kind": "strong", "seed": 1, "uns": strong_sequence(1, 8)})
    rows.append({"kind": "char_c", "seed": 1, "uns": char_c_sequence(1, 4)})
    return rows


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "cryptogram_vectors.jsonl"), "w") as fh:
        for row in cryptogram_vectors():
            fh.write(dump(row) + "\n")
    with open(os.path.join(out_dir, "un_generator_vectors.jsonl"), "w") as fh:
        for row in generator_vectors():
            fh.write(dump(row) + "\n")
    print("wrote fixtures to", out_dir)


if __name__ == "__main__":
    main()
