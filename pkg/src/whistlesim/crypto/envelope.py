"""Hybrid public-key encryption: ephemeral group DH + ChaCha20-Poly1305.

decrypt() authenticates before releasing plaintext, so any ciphertext bit
flip or a wrong recipient key surfaces as IntegrityError rather than garbage.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

from .group import DecodingError, Point, Scalar

_TAG_KDF = b"whistlesim/v1/envelope-kdf"
_NONCE_LEN = 12


class IntegrityError(ValueError):
    """Authenticated decryption failed: tampered ciphertext or wrong key."""


@dataclass(frozen=True)
class Envelope:
    ephemeral: Point     # sender's one-shot public key
    nonce: bytes
    ciphertext: bytes    # includes the 16-byte Poly1305 tag

    def encode(self) -> bytes:
        return b"".join(
            [
                self.ephemeral.data,
                self.nonce,
                len(self.ciphertext).to_bytes(4, "little"),
                self.ciphertext,
            ]
        )

    @classmethod
    def decode(cls, data: bytes) -> "Envelope":
        if len(data) < 32 + _NONCE_LEN + 4:
            raise DecodingError("truncated envelope")
        eph = Point(data[:32])
        nonce = data[32 : 32 + _NONCE_LEN]
        clen = int.from_bytes(data[44:48], "little")
        ct = data[48:]
        if len(ct) != clen:
            raise DecodingError("envelope length mismatch")
        return cls(eph, nonce, ct)


def _derive_key(shared: Point, ephemeral: Point, recipient: Point) -> bytes:
    h = hashlib.sha256(_TAG_KDF + shared.data + ephemeral.data + recipient.data)
    return h.digest()


def encrypt(to: Point, payload: bytes, rng=None) -> Envelope:
    if not payload:
        raise ValueError("payload must be non-empty")
    esk = Scalar.random(rng)
    epk = Point.base_mul(esk)
    key = _derive_key(to.mul(esk), epk, to)
    nonce = rng.randbytes(_NONCE_LEN) if rng is not None else os.urandom(_NONCE_LEN)
    ct = ChaCha20Poly1305(key).encrypt(nonce, payload, None)
    return Envelope(ephemeral=epk, nonce=nonce, ciphertext=ct)


def decrypt(secret: Scalar, env: Envelope) -> bytes:
    key = _derive_key(env.ephemeral.mul(secret), env.ephemeral, Point.base_mul(secret))
    try:
        return ChaCha20Poly1305(key).decrypt(env.nonce, env.ciphertext, None)
    except InvalidTag as exc:
        raise IntegrityError("envelope failed authentication") from exc
