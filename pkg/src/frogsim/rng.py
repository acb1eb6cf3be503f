"""Counter-based random streams keyed by identity.

Every random quantity in a simulation is a pure function of ``(seed, trial,
purpose, identity)``: the key is a 128-bit BLAKE2b digest of that tuple and the
stream's ``n``-th draw is BLAKE2b keyed by it, applied to the counter ``n``.
Regenerating a stream from the same key therefore reproduces it exactly, no
matter in which order (or on which thread) streams are consumed.
"""

from __future__ import annotations

import math
from hashlib import blake2b

from scipy import stats

_PERSON = b"frogsim-v1"
_TWO_M53 = 2.0 ** -53


def derive_key(seed: int, *parts) -> bytes:
    """128-bit stream key from a run seed and an identity tuple."""
    text = ":".join([str(int(seed))] + [_encode(p) for p in parts])
    return blake2b(text.encode(), digest_size=16, person=_PERSON).digest()


def _encode(part) -> str:
    if isinstance(part, tuple):
        return "(" + ",".join(str(x) for x in part) + ")"
    return str(part)


class KeyedStream:
    """Sequence of uniforms on [0, 1) determined by a 128-bit key."""

    __slots__ = ("key", "counter")

    def __init__(self, key: bytes, counter: int = 0):
        if len(key) != 16:
            raise ValueError("stream keys are 16 bytes")
        self.key = key
        self.counter = counter

    @classmethod
    def for_identity(cls, seed: int, *parts) -> "KeyedStream":
        return cls(derive_key(seed, *parts))

    def uniform(self) -> float:
        raw = blake2b(self.counter.to_bytes(8, "little"), key=self.key, digest_size=8).digest()
        self.counter += 1
        return (int.from_bytes(raw, "little") >> 11) * _TWO_M53

    def below(self, k: int) -> int:
        """Uniform integer in ``range(k)``."""
        return int(self.uniform() * k)


def poisson_quantile(mu: float, u: float) -> int:
    """Smallest k with P[Poi(mu) <= k] >= u.

    Inversion from a single uniform, so for a fixed ``u`` the result is
    nondecreasing in ``mu``; engines rely on this to nest the frog populations
    of runs that differ only in ``mu``.
    """
    if mu < 0:
        raise ValueError("Poisson mean must be nonnegative")
    if mu == 0 or u <= 0.0:
        return 0
    if mu > 30.0:
        return int(stats.poisson.ppf(u, mu))
    k = 0
    p = math.exp(-mu)
    cdf = p
    while cdf < u:
        k += 1
        p *= mu / k
        if p == 0.0:
            break
        cdf += p
    return k
