"""Alignment-level and oracle-level scores."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .alignment import AlignmentSet, ConfusionCounts


class OneClassError(ValueError):
    """Sensitivity or specificity is undefined because one class is absent."""


def round3(value: float | None) -> float | None:
    """Three decimals, halves rounded away from zero (table presentation)."""
    if value is None:
        return None
    return float(Decimal(repr(float(value))).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class TaskReport:
    precision: float
    recall: float
    f_score: float
    system_size: int
    reference_size: int
    intersection_size: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_score": self.f_score,
            "system_size": self.system_size,
            "reference_size": self.reference_size,
            "intersection_size": self.intersection_size,
        }


@dataclass(frozen=True)
class DiagnosticReport:
    counts: ConfusionCounts
    sensitivity: float
    specificity: float
    youden_index: float

    def to_dict(self) -> dict:
        c = self.counts
        return {
            "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn,
            "positives": c.positives, "negatives": c.negatives,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "youden_index": self.youden_index,
        }


def f_measure(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def precision_recall_f(system: AlignmentSet, reference: AlignmentSet) -> TaskReport:
    if len(reference) == 0:
        raise ValueError("reference alignment is empty")
    common = len(system.keys() & reference.keys())
    precision = common / len(system) if len(system) else 0.0
    recall = common / len(reference)
    # same value as the harmonic mean of Pr and Re, with a single rounding step
    f_score = 2 * common / (len(system) + len(reference))
    return TaskReport(
        precision=precision,
        recall=recall,
        f_score=f_score,
        system_size=len(system),
        reference_size=len(reference),
        intersection_size=common,
    )


def diagnose(counts: ConfusionCounts) -> DiagnosticReport:
    if counts.tp + counts.fn == 0 or counts.fp + counts.tn == 0:
        raise OneClassError(
            f"ask set has {counts.positives} positive and {counts.negatives} negative mappings; "
            "sensitivity/specificity need both, report the raw counts instead"
        )
    se = counts.tp / (counts.tp + counts.fn)
    sp = counts.tn / (counts.fp + counts.tn)
    return DiagnosticReport(counts=counts, sensitivity=se, specificity=sp, youden_index=se + sp - 1)
