"""End-to-end experiment runs: oracle over the ask set, merge, evaluate, report."""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from itertools import combinations
from pathlib import Path
from statistics import fmean
from typing import Iterable, Sequence

from . import __version__
from .alignment import (
    AlignmentSet,
    Decision,
    Role,
    confusion,
    merge_decisions,
    parse_alignment,
    write_alignment,
)
from .config import BASE_CONFIGURATION, ExperimentConfig, TaskSpec, slug
from .evaluation import DiagnosticReport, OneClassError, TaskReport, diagnose, precision_recall_f
from .ontology import load_ontology
from .oracle import OracleVerdict, TokenBucket, VerdictStore, batch_assess, make_oracle
from .prompts import TEMPLATE_VERSION, render
from .reporting import (
    DIAGNOSTIC_COLUMNS,
    PVALUE_COLUMNS,
    TASK_COLUMNS,
    diagnostic_row,
    pvalue_row,
    task_row,
    write_csv,
    write_json,
)
from .stats import paired_tests

log = logging.getLogger(__name__)

POLICIES = {
    "abstention": "an abstained mapping keeps the base system's decision",
    "feedback_propagation": "not applied; oracle decisions are merged mapping by mapping",
    "wilcoxon_zero_differences": "dropped before ranking",
    "confidence": "accepted mappings keep their original confidence",
}


@dataclass
class TaskResult:
    spec: TaskSpec
    diagnostic: DiagnosticReport | None
    base_diagnostic: DiagnosticReport | None
    base: TaskReport
    merged: TaskReport
    verdicts: list[OracleVerdict]
    report: dict
    manifest_entry: dict


@dataclass
class LimiterPool:
    """One token bucket per endpoint, shared by every task that talks to it."""

    _buckets: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def get(self, spec: TaskSpec) -> TokenBucket | None:
        if spec.oracle.kind != "llm":
            return None
        key = (spec.oracle.endpoint_url, spec.oracle.model_name)
        with self._lock:
            if key not in self._buckets:
                self._buckets[key] = TokenBucket(spec.oracle.rpm_limit)
            return self._buckets[key]


def _load_sets(spec: TaskSpec) -> tuple[AlignmentSet, AlignmentSet, AlignmentSet]:
    base = parse_alignment(spec.base_alignment, role=Role.SYSTEM_OUTPUT)
    ask = parse_alignment(spec.ask_alignment, role=Role.ASK_SET)
    reference = parse_alignment(spec.reference_alignment, role=Role.REFERENCE)
    if not spec.include_subsumption:
        base, ask, reference = base.equivalences(), ask.equivalences(), reference.equivalences()
    return base, ask, reference


def _diagnose_or_none(counts) -> tuple[DiagnosticReport | None, dict]:
    try:
        report = diagnose(counts)
        return report, report.to_dict()
    except OneClassError as exc:
        return None, {
            "tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn,
            "positives": counts.positives, "negatives": counts.negatives,
            "sensitivity": None, "specificity": None, "youden_index": None,
            "note": str(exc),
        }


def run_task(spec: TaskSpec, limiters: LimiterPool | None = None) -> TaskResult:
    """Ask the oracle about every ask mapping, merge the answers and score everything."""
    spec.validate()
    run_dir = spec.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    base, ask, reference = _load_sets(spec)
    ask_list = ask.sorted()

    oracle = make_oracle(
        spec.oracle,
        reference=reference,
        limiter=(limiters or LimiterPool()).get(spec),
        template=spec.template.value,
        system=spec.system_prompt.value,
    )
    prompt_for = None
    if oracle.needs_prompt:
        source_onto = load_ontology(spec.source_onto, spec.lexical)
        target_onto = load_ontology(spec.target_onto, spec.lexical)

        def prompt_for(m):
            return render(spec.template, m, source_onto, target_onto, spec.system_prompt, spec.system_texts)

    log_path = run_dir / "verdicts.jsonl"
    with VerdictStore(log_path) as store:
        try:
            verdicts = batch_assess(
                ask_list, oracle, cache=store, prompt_for=prompt_for,
                template=spec.template.value, system=spec.system_prompt.value,
            )
            store.compact()
        finally:
            close = getattr(oracle, "close", None)
            if close is not None:
                close()

    decisions = {v.mapping_key: v.decision for v in verdicts}
    resolved = {k: (d is Decision.ACCEPT) if d is not Decision.ABSTAIN else (k in base) for k, d in decisions.items()}
    oracle_counts = confusion(ask, resolved, reference)
    base_counts = confusion(ask, {m.key: m in base for m in ask}, reference)
    diagnostic, diagnostic_dict = _diagnose_or_none(oracle_counts)
    base_diagnostic, base_diagnostic_dict = _diagnose_or_none(base_counts)

    merged = merge_decisions(base, ask, decisions)
    base_report = precision_recall_f(base, reference)
    merged_report = precision_recall_f(merged, reference)

    tally = {d.value: 0 for d in Decision}
    for v in verdicts:
        tally[v.decision.value] += 1
    if sum(tally.values()) != len(ask):
        raise AssertionError("verdict count does not match the ask set")

    report = {
        "task": spec.task_name,
        "oracle": spec.oracle.identity,
        "template": spec.template.value,
        "system_prompt": spec.system_prompt.value,
        "template_version": TEMPLATE_VERSION,
        "scored_relations": "all" if spec.include_subsumption else "equivalence",
        "ask": {
            "size": len(ask),
            "positives": oracle_counts.positives,
            "negatives": oracle_counts.negatives,
            "verdicts": tally,
        },
        "oracle_diagnostic": diagnostic_dict,
        "base_diagnostic": base_diagnostic_dict,
        "base": base_report.to_dict(),
        "merged": merged_report.to_dict(),
        "policies": POLICIES,
    }
    paths = {
        "report": write_json(run_dir / "report.json", report),
        "diagnostics": write_csv(run_dir / "diagnostics.csv", DIAGNOSTIC_COLUMNS, [diagnostic_row(report)]),
        "task_metrics": write_csv(run_dir / "task_metrics.csv", TASK_COLUMNS, [task_row(report)]),
        "merged_alignment": write_alignment(merged, run_dir / "merged.rdf"),
        "decisions": _write_decisions(run_dir / "decisions.tsv", ask_list, decisions, reference),
    }
    entry = {
        "task": spec.task_name,
        "oracle": spec.oracle.identity,
        "status": "ok",
        "report": str(paths["report"]),
        "verdict_log": str(log_path),
        "abstentions": tally["abstain"],
        "cached_verdicts": sum(v.cached for v in verdicts),
        "wall_time": round(time.perf_counter() - started, 3),
    }
    return TaskResult(spec, diagnostic, base_diagnostic, base_report, merged_report, verdicts, report, entry)


def _write_decisions(path: Path, ask_list, decisions, reference) -> Path:
    lines = ["source\ttarget\trelation\tdecision\tin_reference\n"]
    for m in ask_list:
        lines.append(f"{m.source}\t{m.target}\t{m.relation.symbol}\t{decisions[m.key].value}\t{m in reference}\n")
    path.write_text("".join(lines), encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------------------
# multi-task runs


@dataclass
class RunOutcome:
    results: list[TaskResult]
    failures: list[dict]
    manifest: dict
    suite: dict | None = None


def run_specs(specs: Sequence[TaskSpec], parallel_tasks: int = 1) -> tuple[list[TaskResult], list[dict]]:
    """Run every spec; a failing task is recorded and the rest carry on."""
    names = [(s.task_name, s.oracle.identity) for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("task/oracle pairs must be unique within a run")
    limiters = LimiterPool()

    def one(spec):
        try:
            return run_task(spec, limiters), None
        except Exception as exc:  # noqa: BLE001 - recorded in the manifest
            log.error("task %s with %s failed: %s", spec.task_name, spec.oracle.identity, exc)
            return None, {
                "task": spec.task_name,
                "oracle": spec.oracle.identity,
                "status": "failed",
                "error": f"{type(exc).__name__}: {exc}",
                "verdict_log": str(spec.run_dir / "verdicts.jsonl"),
            }

    if parallel_tasks > 1:
        with ThreadPoolExecutor(max_workers=parallel_tasks) as pool:
            outcomes = list(pool.map(one, specs))
    else:
        outcomes = [one(s) for s in specs]
    results = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    return results, failures


def f_score_table(results: Iterable[TaskResult]) -> dict[str, dict[str, float]]:
    """configuration -> task -> merged F-score; the base system appears as ``base``."""
    table: dict[str, dict[str, float]] = {}
    for r in results:
        table.setdefault(r.spec.oracle.identity, {})[r.spec.task_name] = r.merged.f_score
        table.setdefault(BASE_CONFIGURATION, {})[r.spec.task_name] = r.base.f_score
    return table


def compare(table: dict[str, dict[str, float]], first: str, second: str) -> dict:
    """Paired tests of ``first`` against ``second`` over the tasks both completed."""
    a, b = table.get(first, {}), table.get(second, {})
    tasks = sorted(set(a) & set(b))
    entry = {"comparison": f"{first} vs {second}", "first": first, "second": second,
             "tasks": tasks, "n": len(tasks), "t_test": None, "wilcoxon": None}
    if len(tasks) < 2:
        entry["note"] = "insufficient n"
        log.warning("%s: only %d shared task(s); statistics skipped", entry["comparison"], len(tasks))
        return entry
    t, w = paired_tests([a[k] for k in tasks], [b[k] for k in tasks])
    entry["t_test"] = t.to_dict()
    entry["wilcoxon"] = w.to_dict() if w is not None else None
    if w is None:
        entry["note"] = "degenerate sample: all differences are zero"
    return entry


def run_suite(specs: Sequence[TaskSpec], comparisons: Sequence[tuple[str, str]] | None = None,
              output_dir: Path | None = None, parallel_tasks: int = 1, config_hash: str = "") -> RunOutcome:
    if not specs:
        raise ValueError("a suite needs at least one task spec")
    started = time.perf_counter()
    results, failures = run_specs(specs, parallel_tasks)
    table = f_score_table(results)
    configs = [c for c in dict.fromkeys(s.oracle.identity for s in specs)]
    if comparisons is None or not comparisons:
        comparisons = list(combinations(configs, 2)) + [(c, BASE_CONFIGURATION) for c in configs]
    entries = [compare(table, a, b) for a, b in comparisons]
    suite = {
        "configurations": configs,
        "f_scores": table,
        "comparisons": entries,
        "t_test_variant": "paired, n-1 degrees of freedom",
    }
    out = Path(output_dir or specs[0].output_dir)
    write_json(out / "suite.json", suite)
    task_names = sorted({s.task_name for s in specs})
    columns = ["task", BASE_CONFIGURATION, *configs]
    rows = [{"task": t, **{c: table.get(c, {}).get(t) for c in columns[1:]}} for t in task_names]
    write_csv(out / "fscores.csv", columns, rows)
    write_csv(out / "pvalues.csv", PVALUE_COLUMNS, [pvalue_row(e) for e in entries])
    _write_tables(out, results)
    manifest = write_manifest(out, results, failures, config_hash, time.perf_counter() - started)
    return RunOutcome(results, failures, manifest, suite)


def run_sweep(specs: Sequence[TaskSpec], oracles: dict, output_dir: Path | None = None,
              parallel_tasks: int = 1, config_hash: str = "") -> RunOutcome:
    """Cross every task with simulated oracles over an error-rate by seed grid."""
    expanded = [s.with_oracle(o) for s in specs for o in oracles.values()]
    started = time.perf_counter()
    results, failures = run_specs(expanded, parallel_tasks)
    rows = []
    groups: dict[tuple[str, float], list[TaskResult]] = {}
    for r in sorted(results, key=lambda r: (r.spec.task_name, r.spec.oracle.error_rate, r.spec.oracle.seed)):
        o = r.spec.oracle
        rows.append(_sweep_row(r.spec.task_name, o.error_rate, o.seed, [r]))
        groups.setdefault((r.spec.task_name, o.error_rate), []).append(r)
    for (task, rate), group in sorted(groups.items()):
        rows.append(_sweep_row(task, rate, "mean", group))
    out = Path(output_dir or (expanded[0].output_dir if expanded else "."))
    write_csv(out / "sweep.csv",
              ["task", "error_rate", "seed", "base_F", "Pr", "Re", "F", "Se", "Sp", "YI"], rows)
    _write_tables(out, results)
    manifest = write_manifest(out, results, failures, config_hash, time.perf_counter() - started)
    return RunOutcome(results, failures, manifest)


def _sweep_row(task, rate, seed, group: list[TaskResult]) -> dict:
    def avg(values):
        values = [v for v in values if v is not None]
        return fmean(values) if values else None

    return {
        "task": task,
        "error_rate": f"{rate:g}",
        "seed": seed,
        "base_F": avg(r.base.f_score for r in group),
        "Pr": avg(r.merged.precision for r in group),
        "Re": avg(r.merged.recall for r in group),
        "F": avg(r.merged.f_score for r in group),
        "Se": avg(r.diagnostic.sensitivity if r.diagnostic else None for r in group),
        "Sp": avg(r.diagnostic.specificity if r.diagnostic else None for r in group),
        "YI": avg(r.diagnostic.youden_index if r.diagnostic else None for r in group),
    }


def _write_tables(out: Path, results: Sequence[TaskResult]):
    ordered = sorted(results, key=lambda r: (r.spec.task_name, r.spec.oracle.identity))
    write_csv(out / "diagnostics.csv", DIAGNOSTIC_COLUMNS, [diagnostic_row(r.report) for r in ordered])
    write_csv(out / "task_metrics.csv", TASK_COLUMNS, [task_row(r.report) for r in ordered])


def write_manifest(out: Path, results, failures, config_hash: str, wall_time: float) -> dict:
    manifest = {
        "config_hash": config_hash,
        "tool_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time": round(wall_time, 3),
        "tasks": [r.manifest_entry for r in results] + list(failures),
        "abstentions": sum(r.manifest_entry["abstentions"] for r in results),
    }
    write_json(Path(out) / "manifest.json", manifest)
    return manifest


def run_experiment(config: ExperimentConfig, oracle_names=None, task_names=None,
                   parallel_tasks: int = 1) -> RunOutcome:
    """Run the tasks of a config without statistics."""
    specs = config.specs(oracle_names, task_names)
    started = time.perf_counter()
    results, failures = run_specs(specs, parallel_tasks)
    _write_tables(config.output_dir, results)
    manifest = write_manifest(config.output_dir, results, failures, config.config_hash,
                              time.perf_counter() - started)
    return RunOutcome(results, failures, manifest)


def replay_specs(specs: Sequence[TaskSpec], recorded_dir: Path, output_dir: Path) -> list[TaskSpec]:
    """Specs that answer from the verdict logs of an earlier run instead of the oracle."""
    out = []
    for spec in specs:
        log_path = Path(recorded_dir) / slug(spec.task_name) / slug(spec.oracle.identity) / "verdicts.jsonl"
        identity = spec.oracle.identity
        oracle = replace(spec.oracle, kind="replay", verdict_log=str(log_path), label=identity)
        out.append(replace(spec, oracle=oracle, output_dir=Path(output_dir)))
    return out
