"""Report files: JSON documents and flat CSV tables."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

from .evaluation import round3

DIAGNOSTIC_COLUMNS = [
    "task", "oracle", "template", "P", "N",
    "base_Se", "base_Sp", "base_YI", "oracle_Se", "oracle_Sp", "oracle_YI",
    "accepted", "rejected", "abstained",
]
TASK_COLUMNS = [
    "task", "oracle", "base_Pr", "base_Re", "base_F", "merged_Pr", "merged_Re", "merged_F",
]
PVALUE_COLUMNS = [
    "comparison", "n", "t_greater", "t_less", "t_two_sided",
    "wilcoxon_greater", "wilcoxon_less", "wilcoxon_two_sided", "wilcoxon_method", "note",
]


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                    encoding="utf-8", newline="\n")
    return path


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    return path


def _cell(value):
    if isinstance(value, float):
        return f"{round3(value):.3f}"
    return "" if value is None else value


def diagnostic_row(report: dict) -> dict:
    ask = report["ask"]
    base = report["base_diagnostic"]
    orc = report["oracle_diagnostic"]
    return {
        "task": report["task"],
        "oracle": report["oracle"],
        "template": report["template"],
        "P": ask["positives"],
        "N": ask["negatives"],
        "base_Se": base.get("sensitivity"),
        "base_Sp": base.get("specificity"),
        "base_YI": base.get("youden_index"),
        "oracle_Se": orc.get("sensitivity"),
        "oracle_Sp": orc.get("specificity"),
        "oracle_YI": orc.get("youden_index"),
        "accepted": ask["verdicts"]["accept"],
        "rejected": ask["verdicts"]["reject"],
        "abstained": ask["verdicts"]["abstain"],
    }


def task_row(report: dict) -> dict:
    b, m = report["base"], report["merged"]
    return {
        "task": report["task"],
        "oracle": report["oracle"],
        "base_Pr": b["precision"], "base_Re": b["recall"], "base_F": b["f_score"],
        "merged_Pr": m["precision"], "merged_Re": m["recall"], "merged_F": m["f_score"],
    }


def pvalue_row(entry: dict) -> dict:
    t = entry.get("t_test") or {}
    w = entry.get("wilcoxon") or {}
    return {
        "comparison": entry["comparison"],
        "n": entry["n"],
        "t_greater": _p(t.get("p_greater")),
        "t_less": _p(t.get("p_less")),
        "t_two_sided": _p(t.get("p_two_sided")),
        "wilcoxon_greater": _p(w.get("p_greater")),
        "wilcoxon_less": _p(w.get("p_less")),
        "wilcoxon_two_sided": _p(w.get("p_two_sided")),
        "wilcoxon_method": w.get("method", ""),
        "note": entry.get("note", ""),
    }


def _p(value):
    return "" if value is None else f"{round3(value):.3f}"
