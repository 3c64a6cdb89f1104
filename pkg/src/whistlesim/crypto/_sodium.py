"""ctypes bindings for the handful of libsodium ristretto255 primitives we use.

ristretto255 gives a prime-order group with canonical 32-byte encodings and a
hash-to-group map whose discrete log relative to the base point is unknown --
the three properties the signing and address schemes rely on. Only the
functions below are bound; everything else stays in Python.
"""

from __future__ import annotations

import ctypes
import ctypes.util

POINT_BYTES = 32
SCALAR_BYTES = 32
HASH_BYTES = 64  # input size for from_hash / scalar_reduce


def _load() -> ctypes.CDLL:
    candidates = []
    found = ctypes.util.find_library("sodium")
    if found:
        candidates.append(found)
    candidates += ["libsodium.so.23", "libsodium.so", "libsodium.dylib"]
    for name in candidates:
        try:
            lib = ctypes.CDLL(name)
        except OSError:
            continue
        if lib.sodium_init() < 0:  # 0 = ok, 1 = already initialised
            raise RuntimeError("sodium_init() failed")
        return lib
    raise ImportError(
        "libsodium shared library not found; install libsodium (e.g. the "
        "libsodium-dev package) to use whistlesim.crypto"
    )


_lib = _load()


def _buf(n: int) -> ctypes.Array:
    return ctypes.create_string_buffer(n)


def point_from_hash(h64: bytes) -> bytes:
    """Map 64 uniform bytes onto the group. No known dlog w.r.t. the base."""
    if len(h64) != HASH_BYTES:
        raise ValueError("from_hash needs exactly 64 bytes")
    out = _buf(POINT_BYTES)
    _lib.crypto_core_ristretto255_from_hash(out, h64)
    return out.raw


def point_is_valid(p: bytes) -> bool:
    if len(p) != POINT_BYTES:
        return False
    return _lib.crypto_core_ristretto255_is_valid_point(p) == 1


def point_add(p: bytes, q: bytes) -> bytes:
    out = _buf(POINT_BYTES)
    if _lib.crypto_core_ristretto255_add(out, p, q) != 0:
        raise ValueError("invalid group element")
    return out.raw


def scalarmult(s: bytes, p: bytes) -> bytes:
    """s*P. Raises on invalid P or an identity result (libsodium contract)."""
    out = _buf(POINT_BYTES)
    if _lib.crypto_scalarmult_ristretto255(out, s, p) != 0:
        raise ValueError("scalarmult failed (invalid point or identity result)")
    return out.raw


def scalarmult_base(s: bytes) -> bytes:
    out = _buf(POINT_BYTES)
    if _lib.crypto_scalarmult_ristretto255_base(out, s) != 0:
        raise ValueError("scalar is zero")
    return out.raw


def scalar_reduce(h64: bytes) -> bytes:
    if len(h64) != HASH_BYTES:
        raise ValueError("scalar_reduce needs exactly 64 bytes")
    out = _buf(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_reduce(out, h64)
    return out.raw


def scalar_is_canonical(s: bytes) -> bool:
    """True iff s is the fully reduced encoding of its value.

    scalarmult masks bit 255, so unreduced encodings would alias reduced
    ones -- a malleability the callers reject at decode time.
    """
    if len(s) != SCALAR_BYTES:
        return False
    return scalar_reduce(s + bytes(32)) == s


def scalar_add(a: bytes, b: bytes) -> bytes:
    out = _buf(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_add(out, a, b)
    return out.raw


def scalar_sub(a: bytes, b: bytes) -> bytes:
    out = _buf(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_sub(out, a, b)
    return out.raw


def scalar_mul(a: bytes, b: bytes) -> bytes:
    out = _buf(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_mul(out, a, b)
    return out.raw
