"""Paired significance tests over per-task scores.

The Student t CDF is evaluated through the regularised incomplete beta
function (Lentz continued fraction). The Wilcoxon signed-rank null
distribution is exact for up to ``EXACT_MAX`` non-zero differences: the number
of sign assignments reaching each rank sum is counted by dynamic programming
over doubled ranks, which is the full 2**m enumeration without listing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

EXACT_MAX = 20


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class PairedTestResult:
    method: str  # "t-test" | "wilcoxon-exact" | "wilcoxon-normal-approx"
    statistic: float
    p_greater: float
    p_less: float
    p_two_sided: float
    n: int
    zeros_dropped: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "statistic": self.statistic,
            "p_greater": self.p_greater,
            "p_less": self.p_less,
            "p_two_sided": self.p_two_sided,
            "n": self.n,
            "zeros_dropped": self.zeros_dropped,
        }


# ---------------------------------------------------------------------------
# special functions


def _beta_cf(a: float, b: float, x: float, eps: float = 1e-16, max_iter: int = 500) -> float:
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _beta_cf(b, a, 1.0 - x) / b


def t_sf(t: float, df: float) -> float:
    """P(T >= t) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * betainc(df / 2.0, 0.5, df / (df + t * t))
    return tail if t > 0 else 1.0 - tail


def t_cdf(t: float, df: float) -> float:
    return t_sf(-t, df)


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# tests


def _differences(x: Sequence[float], y: Sequence[float]) -> list[float]:
    if len(x) != len(y):
        raise ValueError(f"paired samples differ in length ({len(x)} vs {len(y)})")
    if len(x) < 2:
        raise ValueError("paired tests need at least two pairs")
    return [float(a) - float(b) for a, b in zip(x, y)]


def paired_t_test(x: Sequence[float], y: Sequence[float]) -> PairedTestResult:
    d = _differences(x, y)
    n = len(d)
    mean = math.fsum(d) / n
    var = math.fsum((v - mean) ** 2 for v in d) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return PairedTestResult("t-test", 0.0, 0.5, 0.5, 1.0, n)
        t = math.copysign(math.inf, mean)
    else:
        t = mean / math.sqrt(var / n)
    p_greater = t_sf(t, n - 1)
    p_less = t_cdf(t, n - 1)
    return PairedTestResult("t-test", t, p_greater, p_less, min(1.0, 2.0 * min(p_greater, p_less)), n)


def signed_ranks(d: Sequence[float]) -> list[float]:
    """Mid-ranks of |d| for the non-zero differences, signed like d."""
    nonzero = [v for v in d if v != 0]
    order = sorted(range(len(nonzero)), key=lambda i: abs(nonzero[i]))
    ranks = [0.0] * len(nonzero)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and abs(nonzero[order[j + 1]]) == abs(nonzero[order[i]]):
            j += 1
        mid = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return [math.copysign(r, v) for r, v in zip(ranks, nonzero)]


def signed_rank_counts(ranks: Sequence[float]) -> list[int]:
    """counts[s] = number of sign assignments whose positive-rank sum equals s / 2."""
    doubled = [int(round(2 * abs(r))) for r in ranks]
    counts = [0] * (sum(doubled) + 1)
    counts[0] = 1
    reach = 0
    for r in doubled:
        for s in range(reach, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        reach += r
    return counts


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float], exact_max: int = EXACT_MAX) -> PairedTestResult:
    d = _differences(x, y)
    ranks = signed_ranks(d)
    m = len(ranks)
    zeros = len(d) - m
    if m == 0:
        raise DegenerateSampleError("degenerate sample: every paired difference is zero")
    w_plus = math.fsum(r for r in ranks if r > 0)
    if m <= exact_max:
        counts = signed_rank_counts(ranks)
        total = 2**m
        w2 = int(round(2 * w_plus))
        p_greater = sum(counts[w2:]) / total
        p_less = sum(counts[: w2 + 1]) / total
        method = "wilcoxon-exact"
    else:
        mean = m * (m + 1) / 4.0
        abs_ranks = [abs(r) for r in ranks]
        ties = {}
        for r in abs_ranks:
            ties[r] = ties.get(r, 0) + 1
        var = m * (m + 1) * (2 * m + 1) / 24.0 - sum(t**3 - t for t in ties.values()) / 48.0
        z = (w_plus - mean) / math.sqrt(var)
        p_greater = normal_sf(z)
        p_less = normal_sf(-z)
        method = "wilcoxon-normal-approx"
    p_two = min(1.0, 2.0 * min(p_greater, p_less))
    return PairedTestResult(method, w_plus, p_greater, p_less, p_two, m, zeros_dropped=zeros)


def paired_tests(x: Sequence[float], y: Sequence[float]) -> tuple[PairedTestResult, PairedTestResult | None]:
    """Paired t-test and Wilcoxon signed-rank test of x against y.

    "greater" means x tends to exceed y. The Wilcoxon slot is None when every
    difference is zero.
    """
    t = paired_t_test(x, y)
    try:
        w = wilcoxon_signed_rank(x, y)
    except DegenerateSampleError:
        w = None
    return t, w
