"""Oracles that judge candidate mappings: simulated, LLM-backed and replayed."""

from __future__ import annotations

from ..alignment import AlignmentSet
from .base import (
    Oracle,
    OracleConfig,
    OracleConfigError,
    OracleError,
    OracleVerdict,
    ReplayMissError,
)
from .batch import batch_assess
from .llm import LLMOracle, build_request, llm_assess, parse_answer
from .ratelimit import TokenBucket
from .simulated import SimulatedOracle, flip_draw, simulated_assess
from .store import ReplayOracle, VerdictStore, cache_key


def make_oracle(config: OracleConfig, reference: AlignmentSet | None = None,
                limiter: TokenBucket | None = None, template: str = "-", system: str = "-") -> Oracle:
    if config.kind == "simulated":
        if reference is None:
            raise OracleConfigError("simulated oracle needs the reference alignment")
        return SimulatedOracle(reference, config.error_rate, config.seed,
                               identity=config.identity, max_in_flight=config.max_in_flight)
    if config.kind == "llm":
        return LLMOracle(config, limiter=limiter)
    return ReplayOracle(config.verdict_log, identity=config.identity, template=template,
                        system=system, max_in_flight=config.max_in_flight)


__all__ = [
    "LLMOracle",
    "Oracle",
    "OracleConfig",
    "OracleConfigError",
    "OracleError",
    "OracleVerdict",
    "ReplayMissError",
    "ReplayOracle",
    "SimulatedOracle",
    "TokenBucket",
    "VerdictStore",
    "batch_assess",
    "build_request",
    "cache_key",
    "flip_draw",
    "llm_assess",
    "make_oracle",
    "parse_answer",
    "simulated_assess",
]
