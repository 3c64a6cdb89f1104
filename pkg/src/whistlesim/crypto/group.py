"""Prime-order group elements, scalars, key pairs, and one-time addresses.

All values carry a canonical 32-byte encoding; decoding validates and rejects
the identity element where a public key is expected. Hashing into the group
and into the scalar field is domain-separated so report challenges, key-image
bases, and payload digests can never collide across uses.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from . import _sodium

# Domain separation tags. Never reuse across hash purposes.
_TAG_HASH_TO_POINT = b"whistlesim/v1/hash-to-point"
_TAG_HASH_TO_SCALAR = b"whistlesim/v1/hash-to-scalar"
_TAG_KEYGEN = b"whistlesim/v1/keygen"

IDENTITY_BYTES = bytes(32)


class DecodingError(ValueError):
    """Raised when a byte string is not a canonical encoding."""


@dataclass(frozen=True)
class Scalar:
    """Element of the group's prime-order scalar field (canonical 32 bytes)."""

    data: bytes

    def __post_init__(self):
        if len(self.data) != 32 or not _sodium.scalar_is_canonical(self.data):
            raise DecodingError("not a canonical scalar encoding")

    @classmethod
    def random(cls, rng=None) -> "Scalar":
        raw = (rng.randbytes(64) if rng is not None else os.urandom(64))
        return cls(_sodium.scalar_reduce(raw))

    @classmethod
    def from_hash(cls, *parts: bytes) -> "Scalar":
        h = hashlib.sha512(_TAG_HASH_TO_SCALAR)
        for part in parts:
            h.update(len(part).to_bytes(4, "little"))
            h.update(part)
        return cls(_sodium.scalar_reduce(h.digest()))

    def is_zero(self) -> bool:
        return self.data == bytes(32)

    def __add__(self, other: "Scalar") -> "Scalar":
        return Scalar(_sodium.scalar_add(self.data, other.data))

    def __sub__(self, other: "Scalar") -> "Scalar":
        return Scalar(_sodium.scalar_sub(self.data, other.data))

    def __mul__(self, other: "Scalar") -> "Scalar":
        return Scalar(_sodium.scalar_mul(self.data, other.data))


@dataclass(frozen=True)
class Point:
    """Group element (canonical 32-byte ristretto encoding)."""

    data: bytes

    def __post_init__(self):
        if len(self.data) != 32 or not _sodium.point_is_valid(self.data):
            raise DecodingError("not a canonical group element encoding")

    @classmethod
    def base_mul(cls, s: Scalar) -> "Point":
        return cls(_sodium.scalarmult_base(s.data))

    @classmethod
    def from_hash(cls, *parts: bytes) -> "Point":
        h = hashlib.sha512(_TAG_HASH_TO_POINT)
        for part in parts:
            h.update(len(part).to_bytes(4, "little"))
            h.update(part)
        return cls(_sodium.point_from_hash(h.digest()))

    def mul(self, s: Scalar) -> "Point":
        return Point(_sodium.scalarmult(s.data, self.data))

    def __add__(self, other: "Point") -> "Point":
        return Point(_sodium.point_add(self.data, other.data))

    def is_identity(self) -> bool:
        return self.data == IDENTITY_BYTES


def decode_public_key(data: bytes) -> Point:
    """Decode a public key; the identity element is rejected."""
    if data == IDENTITY_BYTES:
        raise DecodingError("identity element is not a valid public key")
    return Point(data)


@dataclass(frozen=True)
class KeyPair:
    secret: Scalar
    public: Point


def keygen(seed: bytes) -> KeyPair:
    """Derive a key pair from seed entropy. Deterministic given the seed."""
    if len(seed) < 32:
        raise ValueError("seed must provide at least 32 bytes of entropy")
    h = hashlib.sha512(_TAG_KEYGEN + seed).digest()
    sk = Scalar(_sodium.scalar_reduce(h))
    if sk.is_zero():  # astronomically unlikely; keeps pk well-defined
        sk = Scalar.from_hash(_TAG_KEYGEN, seed, b"retry")
    return KeyPair(secret=sk, public=Point.base_mul(sk))


def key_image(kp: KeyPair) -> Point:
    """sk * H_p(pk): deterministic per key, the linkability anchor."""
    return Point.from_hash(kp.public.data).mul(kp.secret)


def anon_address(seed: bytes | None = None) -> tuple[Scalar, Point]:
    """Fresh one-time account key: (secret, address) with address = s*G."""
    if seed is None:
        seed = os.urandom(32)
    kp = keygen(b"anon-address:" + seed)
    return kp.secret, kp.public
