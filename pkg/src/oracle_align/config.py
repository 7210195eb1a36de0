"""Declarative experiment configuration (YAML) and the task specs derived from it."""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .ontology import LexicalConfig
from .oracle.base import OracleConfig, OracleConfigError
from .prompts import PromptTemplateId, SystemPromptId

DEFAULT_SWEEP_RATES = (0.0, 0.1, 0.2, 0.3)
BASE_CONFIGURATION = "base"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    task_name: str
    base_alignment: Path
    ask_alignment: Path
    reference_alignment: Path
    output_dir: Path
    source_onto: Path | None = None
    target_onto: Path | None = None
    template: PromptTemplateId = PromptTemplateId.P_NLF_S
    system_prompt: SystemPromptId = SystemPromptId.NONE
    oracle: OracleConfig = field(default_factory=OracleConfig)
    include_subsumption: bool = False
    lexical: LexicalConfig = field(default_factory=LexicalConfig)
    system_texts: dict | None = None

    @property
    def run_dir(self) -> Path:
        return self.output_dir / slug(self.task_name) / slug(self.oracle.identity)

    def validate(self) -> "TaskSpec":
        problems = []
        for name in ("base_alignment", "ask_alignment", "reference_alignment", "source_onto", "target_onto"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                problems.append(f"{name}: {path} not found")
        if self.oracle.kind == "llm" and (self.source_onto is None or self.target_onto is None):
            problems.append("an llm oracle needs source_onto and target_onto to render prompts")
        if self.oracle.kind == "replay" and not Path(self.oracle.verdict_log).is_file():
            problems.append(f"verdict log {self.oracle.verdict_log} not found")
        if problems:
            raise ConfigError(f"task {self.task_name!r}: " + "; ".join(problems))
        return self

    def with_oracle(self, oracle: OracleConfig) -> "TaskSpec":
        return replace(self, oracle=oracle)


@dataclass
class ExperimentConfig:
    """Resolved experiment: tasks crossed with named oracle configurations."""

    tasks: list[dict]
    oracles: dict[str, OracleConfig]
    defaults: dict
    output_dir: Path
    comparisons: list[tuple[str, str]]
    sweep_rates: tuple[float, ...] = DEFAULT_SWEEP_RATES
    sweep_seeds: tuple[int, ...] = (0,)
    raw: dict = field(default_factory=dict)
    source: Path | None = None

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def task_names(self) -> list[str]:
        return [t["name"] for t in self.tasks]

    def specs(self, oracle_names: list[str] | None = None, task_names: list[str] | None = None) -> list[TaskSpec]:
        names = oracle_names or list(self.oracles)
        unknown = [n for n in names if n not in self.oracles]
        if unknown:
            raise ConfigError(f"unknown oracle configuration(s) {unknown}; known: {sorted(self.oracles)}")
        wanted = task_names or self.task_names()
        missing = [n for n in wanted if n not in self.task_names()]
        if missing:
            raise ConfigError(f"unknown task(s) {missing}")
        out = []
        for task in self.tasks:
            if task["name"] not in wanted:
                continue
            for name in names:
                out.append(self._spec(task, self.oracles[name]))
        return out

    def _spec(self, task: dict, oracle: OracleConfig) -> TaskSpec:
        d = self.defaults

        def path(key):
            value = task.get(key)
            return self._path(value) if value is not None else None

        for key in ("base_alignment", "ask_alignment", "reference_alignment"):
            if not task.get(key):
                raise ConfigError(f"task {task['name']!r}: missing {key}")
        try:
            template = PromptTemplateId(task.get("template", d.get("template", "P_NLF_S")))
            system = SystemPromptId(task.get("system_prompt", d.get("system_prompt", "none")))
        except ValueError as exc:
            raise ConfigError(f"task {task['name']!r}: {exc}") from None
        return TaskSpec(
            task_name=task["name"],
            source_onto=path("source_onto"),
            target_onto=path("target_onto"),
            base_alignment=path("base_alignment"),
            ask_alignment=path("ask_alignment"),
            reference_alignment=path("reference_alignment"),
            output_dir=self.output_dir,
            template=template,
            system_prompt=system,
            oracle=oracle,
            include_subsumption=bool(task.get("include_subsumption", d.get("include_subsumption", False))),
            lexical=LexicalConfig.from_dict(task.get("lexical", d.get("lexical"))),
            system_texts=d.get("system_texts"),
        )

    def _path(self, value) -> Path:
        p = Path(value)
        if not p.is_absolute() and self.source is not None:
            p = self.source.parent / p
        return p

    def sweep_oracles(self, rates=None, seeds=None, base: OracleConfig | None = None) -> dict[str, OracleConfig]:
        base = base or OracleConfig()
        out = {}
        for rate in rates if rates is not None else self.sweep_rates:
            for seed in seeds if seeds is not None else self.sweep_seeds:
                label = f"Or{rate * 100:g}-seed{seed}"
                out[label] = replace(base, kind="simulated", error_rate=float(rate), seed=int(seed), label=label)
        return out


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._=-]+", "_", text).strip("_") or "_"


def _merge(base: dict, override: dict | None) -> dict:
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def build_config(raw: dict, source: Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve a raw config mapping; ``overrides`` (from CLI flags) patch ``defaults``."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    raw = copy.deepcopy(raw)
    overrides = copy.deepcopy(overrides or {})
    oracle_override = overrides.pop("oracle", None)
    if overrides:
        raw["defaults"] = _merge(raw.get("defaults", {}), overrides)
    if oracle_override:
        raw["defaults"] = _merge(raw.get("defaults", {}), {"oracle": oracle_override})
        for cfg in (raw.get("oracles") or {}).values():
            cfg.update(oracle_override)
    defaults = raw.get("defaults", {}) or {}
    tasks = raw.get("tasks") or []
    if not tasks:
        raise ConfigError("configuration defines no tasks")
    names = [t.get("name") for t in tasks]
    if any(not n for n in names):
        raise ConfigError("every task needs a name")
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError(f"duplicate task name(s): {dupes}")

    base_oracle = defaults.get("oracle", {}) or {}
    named = raw.get("oracles") or {}
    try:
        if named:
            oracles = {}
            for name, cfg in named.items():
                merged = _merge(base_oracle, cfg)
                merged.setdefault("label", name)
                oracles[name] = OracleConfig.from_dict(merged)
        else:
            oracle = OracleConfig.from_dict(base_oracle)
            oracles = {oracle.identity: oracle}
    except (OracleConfigError, TypeError) as exc:
        raise ConfigError(f"oracle configuration: {exc}") from None
    if source is not None:
        for name, cfg in list(oracles.items()):
            if cfg.verdict_log and not Path(cfg.verdict_log).is_absolute():
                oracles[name] = replace(cfg, verdict_log=str(source.parent / cfg.verdict_log))

    comparisons = [tuple(pair) for pair in raw.get("comparisons") or []]
    known = set(oracles) | {BASE_CONFIGURATION}
    for pair in comparisons:
        if len(pair) != 2 or any(p not in known for p in pair):
            raise ConfigError(f"comparison {list(pair)} must name two of {sorted(known)}")

    sweep = raw.get("sweep") or {}
    out_dir = Path(raw.get("output_dir", "runs"))
    if not out_dir.is_absolute() and source is not None:
        out_dir = source.parent / out_dir
    cfg = ExperimentConfig(
        tasks=tasks,
        oracles=oracles,
        defaults=defaults,
        output_dir=out_dir,
        comparisons=comparisons,
        sweep_rates=tuple(float(r) for r in sweep.get("error_rates", DEFAULT_SWEEP_RATES)),
        sweep_seeds=tuple(int(s) for s in sweep.get("seeds", (0,))),
        raw=raw,
        source=source,
    )
    cfg.specs()  # surfaces per-task template / path-key errors early
    return cfg


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return build_config(raw, source=path.resolve(), overrides=overrides)


def config_overrides(template=None, system_prompt=None, error_rate=None, seed=None) -> dict:
    out: dict[str, Any] = {}
    if template is not None:
        out["template"] = template
    if system_prompt is not None:
        out["system_prompt"] = system_prompt
    oracle = {}
    if error_rate is not None:
        oracle["error_rate"] = error_rate
    if seed is not None:
        oracle["seed"] = seed
    if oracle:
        out["oracle"] = oracle
    return out
