"""Anonymous-authorization primitives: keys, linkable ring signatures, and
hybrid encryption over a prime-order group (libsodium ristretto255)."""

from .envelope import Envelope, IntegrityError, decrypt, encrypt
from .group import (
    DecodingError,
    KeyPair,
    Point,
    Scalar,
    anon_address,
    decode_public_key,
    key_image,
    keygen,
)
from .ring import NotInRingError, Ring, RingSignature, linked, ring_sign, ring_verify

__all__ = [
    "DecodingError",
    "Envelope",
    "IntegrityError",
    "KeyPair",
    "NotInRingError",
    "Point",
    "Ring",
    "RingSignature",
    "Scalar",
    "anon_address",
    "decode_public_key",
    "decrypt",
    "encrypt",
    "key_image",
    "keygen",
    "linked",
    "ring_sign",
    "ring_verify",
]
