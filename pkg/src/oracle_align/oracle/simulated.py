"""Reference-backed oracle that answers wrongly with a fixed probability."""

from __future__ import annotations

import hashlib

from ..alignment import AlignmentSet, Decision, Mapping, MappingKey
from .base import OracleVerdict

_SCALE = float(2**64)


def flip_draw(seed: int, key: MappingKey) -> float:
    """Uniform number in [0, 1) that depends only on the seed and the mapping key."""
    payload = "\x1f".join((str(int(seed)), *key)).encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "big") / _SCALE


def simulated_assess(mapping: Mapping, reference: AlignmentSet, error_rate: float, seed: int) -> OracleVerdict:
    if not 0.0 <= error_rate <= 1.0:
        raise ValueError(f"error_rate must lie in [0, 1], got {error_rate!r}")
    truth = mapping in reference
    answer = truth != (flip_draw(seed, mapping.key) < error_rate)
    return OracleVerdict(mapping.key, Decision.ACCEPT if answer else Decision.REJECT)


class SimulatedOracle:
    needs_prompt = False

    def __init__(self, reference: AlignmentSet, error_rate: float = 0.0, seed: int = 0,
                 identity: str | None = None, max_in_flight: int = 8):
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError(f"error_rate must lie in [0, 1], got {error_rate!r}")
        self.reference = reference
        self.error_rate = float(error_rate)
        self.seed = int(seed)
        self.identity = identity or f"simulated(error_rate={self.error_rate:g},seed={self.seed})"
        self.max_in_flight = max_in_flight

    def assess(self, mapping: Mapping, prompt=None) -> OracleVerdict:
        return simulated_assess(mapping, self.reference, self.error_rate, self.seed)
