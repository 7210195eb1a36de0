"""Oracle configuration, verdict records and the errors every oracle may raise."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Mapping as TMapping, Protocol

from ..alignment import Decision, Mapping, MappingKey
from ..prompts import PromptInstance

ORACLE_KINDS = ("simulated", "llm", "replay")


class OracleError(RuntimeError):
    """Fatal oracle failure; aborts the batch that hit it."""


class OracleConfigError(OracleError):
    """Bad or incomplete oracle configuration (including rejected credentials)."""


class ReplayMissError(OracleError):
    """Replay mode was asked about a mapping that is not in the verdict log."""


@dataclass(frozen=True)
class OracleConfig:
    kind: str = "simulated"
    error_rate: float = 0.0
    seed: int = 0
    endpoint_url: str | None = None
    model_name: str | None = None
    api_key_env_var: str = "OPENAI_API_KEY"
    max_retries: int = 3
    max_in_flight: int = 8
    rpm_limit: int = 500
    request_timeout: float = 30.0
    structured_output: bool = True
    verdict_log: str | None = None
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ORACLE_KINDS:
            raise OracleConfigError(f"oracle kind must be one of {ORACLE_KINDS}, got {self.kind!r}")
        if not (isinstance(self.error_rate, (int, float)) and 0.0 <= self.error_rate <= 1.0):
            raise OracleConfigError(f"error_rate must lie in [0, 1], got {self.error_rate!r}")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise OracleConfigError("seed must fit in 64 bits")
        if self.kind == "llm" and not (self.endpoint_url and self.model_name):
            raise OracleConfigError("llm oracle requires endpoint_url and model_name")
        if self.kind == "replay" and not self.verdict_log:
            raise OracleConfigError("replay oracle requires verdict_log")
        if self.max_retries < 0:
            raise OracleConfigError("max_retries must be >= 0")
        if self.max_in_flight < 1 or self.rpm_limit < 1:
            raise OracleConfigError("max_in_flight and rpm_limit must be >= 1")
        if not (self.request_timeout > 0 and math.isfinite(self.request_timeout)):
            raise OracleConfigError("request_timeout must be a positive number of seconds")

    @classmethod
    def from_dict(cls, data: TMapping[str, Any]) -> "OracleConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise OracleConfigError(f"unknown oracle option(s): {sorted(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def identity(self) -> str:
        """Name used in cache keys and reports; stable across record and replay."""
        if self.label:
            return self.label
        if self.kind == "simulated":
            return f"simulated(error_rate={self.error_rate:g},seed={self.seed})"
        return self.model_name or "replay"


@dataclass(frozen=True)
class OracleVerdict:
    mapping_key: MappingKey
    decision: Decision
    attempts: int = 1
    latency: float = field(default=0.0, compare=False)
    raw_response: str | None = None
    input_tokens: int | None = None
    output_tokens: int | None = None
    cached: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mapping_key", tuple(self.mapping_key))
        object.__setattr__(self, "decision", Decision(self.decision))
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT

    def to_record(self) -> dict:
        return {
            "key": list(self.mapping_key),
            "decision": self.decision.value,
            "attempts": self.attempts,
            "latency": round(self.latency, 6),
            "raw_response": self.raw_response,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
        }

    @classmethod
    def from_record(cls, record: TMapping[str, Any]) -> "OracleVerdict":
        return cls(
            mapping_key=tuple(record["key"]),
            decision=Decision(record["decision"]),
            attempts=int(record.get("attempts", 1)),
            latency=float(record.get("latency", 0.0)),
            raw_response=record.get("raw_response"),
            input_tokens=record.get("input_tokens"),
            output_tokens=record.get("output_tokens"),
        )


class Oracle(Protocol):
    identity: str
    needs_prompt: bool
    max_in_flight: int

    def assess(self, mapping: Mapping, prompt: PromptInstance | None = None) -> OracleVerdict: ...
