"""Linkable ring signatures (back-linked challenge chain with key images).

A signature proves the signer holds the secret key of *some* ring member
without identifying which one, and embeds a key image I = sk*H_p(pk) that is
constant per key, so two reports signed by the same key can be linked without
deanonymizing it. The ring order is part of the signed context: replaying a
signature against a permuted ring fails verification.
"""

from __future__ import annotations

from dataclasses import dataclass

from .group import DecodingError, KeyPair, Point, Scalar, decode_public_key, key_image


class NotInRingError(ValueError):
    """Signer's public key is not a member of the ring."""


@dataclass(frozen=True)
class Ring:
    """Ordered set of distinct public keys."""

    members: tuple[Point, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("ring needs at least 2 members")
        if len({m.data for m in self.members}) != len(self.members):
            raise ValueError("ring members must be distinct")
        if any(m.is_identity() for m in self.members):
            raise DecodingError("identity element is not a valid public key")

    def __len__(self) -> int:
        return len(self.members)

    def index_of(self, public: Point) -> int:
        for i, m in enumerate(self.members):
            if m.data == public.data:
                return i
        raise NotInRingError("public key not in ring")

    def encode(self) -> bytes:
        out = [len(self.members).to_bytes(4, "little")]
        out += [m.data for m in self.members]
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "Ring":
        if len(data) < 4:
            raise DecodingError("truncated ring encoding")
        n = int.from_bytes(data[:4], "little")
        if len(data) != 4 + 32 * n:
            raise DecodingError("ring encoding length mismatch")
        members = tuple(
            decode_public_key(data[4 + 32 * i : 36 + 32 * i]) for i in range(n)
        )
        return cls(members)


@dataclass(frozen=True)
class RingSignature:
    challenge: Scalar               # c_0, the chain anchor
    responses: tuple[Scalar, ...]   # one per ring member, uniformly distributed
    image: Point                    # key image of the signing key

    def encode(self) -> bytes:
        out = [len(self.responses).to_bytes(4, "little"), self.challenge.data]
        out += [s.data for s in self.responses]
        out.append(self.image.data)
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "RingSignature":
        if len(data) < 4:
            raise DecodingError("truncated signature encoding")
        n = int.from_bytes(data[:4], "little")
        if len(data) != 4 + 32 * (n + 2):
            raise DecodingError("signature encoding length mismatch")
        challenge = Scalar(data[4:36])
        responses = tuple(Scalar(data[36 + 32 * i : 68 + 32 * i]) for i in range(n))
        image = Point(data[4 + 32 * (n + 1) :])
        return cls(challenge, responses, image)


def _challenge(message: bytes, ring_bytes: bytes, image: Point, L: Point, R: Point) -> Scalar:
    return Scalar.from_hash(b"ring-challenge", message, ring_bytes, image.data, L.data, R.data)


def ring_sign(message: bytes, ring: Ring, signer: KeyPair, rng=None) -> RingSignature:
    """Sign on behalf of the ring. Raises NotInRingError if signer is outside it.

    rng is injectable for deterministic tests; default is OS entropy.
    """
    n = len(ring)
    w = ring.index_of(signer.public)
    image = key_image(signer)
    ring_bytes = ring.encode()
    hp = [Point.from_hash(m.data) for m in ring.members]

    c: list[Scalar | None] = [None] * n
    s: list[Scalar | None] = [None] * n

    u = Scalar.random(rng)
    c[(w + 1) % n] = _challenge(
        message, ring_bytes, image, Point.base_mul(u), hp[w].mul(u)
    )
    for step in range(1, n):
        i = (w + step) % n
        s[i] = Scalar.random(rng)
        L = Point.base_mul(s[i]) + ring.members[i].mul(c[i])
        R = hp[i].mul(s[i]) + image.mul(c[i])
        c[(i + 1) % n] = _challenge(message, ring_bytes, image, L, R)
    s[w] = u - c[w] * signer.secret

    return RingSignature(challenge=c[0], responses=tuple(s), image=image)


def ring_verify(message: bytes, ring: Ring, sig: RingSignature) -> bool:
    """Check the challenge chain closes. Malformed input rejects, never raises."""
    try:
        n = len(ring)
        if len(sig.responses) != n:
            return False
        ring_bytes = ring.encode()
        c = sig.challenge
        for i in range(n):
            L = Point.base_mul(sig.responses[i]) + ring.members[i].mul(c)
            R = Point.from_hash(ring.members[i].data).mul(sig.responses[i]) + sig.image.mul(c)
            c = _challenge(message, ring_bytes, sig.image, L, R)
        return c.data == sig.challenge.data
    except (DecodingError, ValueError):
        return False


def linked(a: RingSignature, b: RingSignature) -> bool:
    """True iff both signatures were produced by the same signing key."""
    return a.image.data == b.image.data
