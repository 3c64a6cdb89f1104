"""Signature test-vector files: one JSON record per line.

Record fields: message_hex, ring_hex (list of 32-byte public keys),
signer_index (-1 when unknown or irrelevant), signature_hex, valid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .group import DecodingError, decode_public_key
from .ring import Ring, RingSignature, ring_verify


@dataclass(frozen=True)
class Vector:
    message: bytes
    ring_keys: list[bytes]
    signer_index: int
    signature: bytes
    valid: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "message_hex": self.message.hex(),
                "ring_hex": [k.hex() for k in self.ring_keys],
                "signer_index": self.signer_index,
                "signature_hex": self.signature.hex(),
                "valid": self.valid,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "Vector":
        doc = json.loads(line)
        return cls(
            message=bytes.fromhex(doc["message_hex"]),
            ring_keys=[bytes.fromhex(k) for k in doc["ring_hex"]],
            signer_index=int(doc["signer_index"]),
            signature=bytes.fromhex(doc["signature_hex"]),
            valid=bool(doc["valid"]),
        )


def dump_vectors(vectors: list[Vector]) -> str:
    return "".join(v.to_json() + "\n" for v in vectors)


def load_vectors(text: str) -> list[Vector]:
    return [Vector.from_json(line) for line in text.splitlines() if line.strip()]


def check_vector(v: Vector) -> bool:
    """Replay one vector; decode failures count as (expected) rejections."""
    try:
        ring = Ring(tuple(decode_public_key(k) for k in v.ring_keys))
        sig = RingSignature.decode(v.signature)
    except (DecodingError, ValueError):
        return False
    return ring_verify(v.message, ring, sig)
