import itertools
import math
import random

import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle_align.evaluation import round3
from oracle_align.stats import (
    DegenerateSampleError,
    betainc,
    paired_t_test,
    paired_tests,
    signed_ranks,
    t_cdf,
    t_sf,
    wilcoxon_signed_rank,
)


def brute_force_wilcoxon(x, y):
    """Enumerate every sign vector over the non-zero |d| mid-ranks."""
    d = [a - b for a, b in zip(x, y) if a != b]
    absd = sorted(abs(v) for v in d)
    rank = {}
    for v in set(absd):
        positions = [i + 1 for i, a in enumerate(absd) if a == v]
        rank[v] = sum(positions) / len(positions)
    ranks = [rank[abs(v)] for v in d]
    observed = sum(r for r, v in zip(ranks, d) if v > 0)
    ge = le = 0
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        w = sum(r for r, s in zip(ranks, signs) if s)
        ge += w >= observed - 1e-9
        le += w <= observed + 1e-9
    total = 2 ** len(ranks)
    return ge / total, le / total


def test_t_distribution_against_scipy():
    rng = random.Random(0)
    worst = 0.0
    for df in (1, 2, 3, 5, 8, 15, 30, 100):
        for _ in range(60):
            t = rng.uniform(-12, 12)
            worst = max(worst, abs(t_cdf(t, df) - scipy.stats.t.cdf(t, df)))
            worst = max(worst, abs(t_sf(t, df) - scipy.stats.t.sf(t, df)))
    assert worst < 1e-9


def test_betainc_against_scipy():
    import scipy.special

    rng = random.Random(1)
    for _ in range(300):
        a, b, x = rng.uniform(0.1, 40), rng.uniform(0.1, 40), rng.random()
        assert betainc(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), abs=1e-10)


def test_paired_t_against_scipy():
    rng = random.Random(3)
    for n in (2, 3, 9, 25):
        x = [rng.random() for _ in range(n)]
        y = [rng.random() for _ in range(n)]
        ours = paired_t_test(x, y)
        for alt, p in (("greater", ours.p_greater), ("less", ours.p_less), ("two-sided", ours.p_two_sided)):
            ref = scipy.stats.ttest_rel(x, y, alternative=alt)
            assert p == pytest.approx(ref.pvalue, abs=1e-9)
        assert ours.statistic == pytest.approx(scipy.stats.ttest_rel(x, y).statistic)


def test_t_zero_mean_and_zero_variance():
    r = paired_t_test([1, 2, 3, 4], [2, 1, 4, 3])
    assert r.statistic == 0 and r.p_two_sided == 1.0
    same = paired_t_test([0.5, 0.5], [0.5, 0.5])
    assert same.statistic == 0 and same.p_two_sided == 1.0
    shifted = paired_t_test([1, 2, 3], [0, 1, 2])
    assert shifted.p_greater == 0.0 and shifted.p_less == 1.0


def test_nine_uniform_differences():
    worse = [0.70, 0.71, 0.72, 0.73, 0.74, 0.75, 0.76, 0.77, 0.78]
    better = [w + 0.01 * (i + 1) for i, w in enumerate(worse)]
    w = wilcoxon_signed_rank(worse, better)
    assert w.method == "wilcoxon-exact"
    assert w.p_less == 1 / 512
    assert w.p_greater == 1.0
    assert w.p_two_sided == 2 / 512
    assert f"{round3(w.p_less):.3f}" == "0.002"


def test_zeros_dropped_and_ties_midranked():
    assert signed_ranks([0, 1, -1, 2, 0]) == [1.5, -1.5, 3.0]
    w = wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 1, 4, 2, 5])
    assert w.zeros_dropped == 2 and w.n == 3
    assert (w.p_greater, w.p_less) == brute_force_wilcoxon([1, 2, 3, 4, 5], [1, 1, 4, 2, 5])


def test_degenerate_sample():
    with pytest.raises(DegenerateSampleError, match="degenerate"):
        wilcoxon_signed_rank([0.3, 0.4], [0.3, 0.4])
    t, w = paired_tests([0.3, 0.4], [0.3, 0.4])
    assert w is None and t.p_two_sided == 1.0


def test_length_checks():
    with pytest.raises(ValueError):
        paired_tests([1, 2], [1])
    with pytest.raises(ValueError):
        paired_tests([1], [2])


def test_exact_matches_enumeration_on_random_vectors():
    rng = random.Random(42)
    for _ in range(200):
        n = rng.randint(2, 12)
        # coarse values so ties and zeros happen
        x = [rng.randint(0, 6) / 4 for _ in range(n)]
        y = [rng.randint(0, 6) / 4 for _ in range(n)]
        if x == y:
            continue
        w = wilcoxon_signed_rank(x, y)
        ge, le = brute_force_wilcoxon(x, y)
        assert w.p_greater == pytest.approx(ge, abs=1e-12)
        assert w.p_less == pytest.approx(le, abs=1e-12)
        assert w.p_two_sided == pytest.approx(min(1.0, 2 * min(ge, le)), abs=1e-12)


def test_exact_matches_scipy_without_ties():
    rng = random.Random(7)
    for _ in range(50):
        n = rng.randint(3, 20)
        d = rng.sample(range(1, 200), n)
        d = [v if rng.random() < 0.5 else -v for v in d]
        x, y = d, [0] * n
        ours = wilcoxon_signed_rank(x, y)
        ref = scipy.stats.wilcoxon(x, y, alternative="greater", method="exact")
        assert ours.p_greater == pytest.approx(ref.pvalue, abs=1e-12)


def test_normal_approximation_above_twenty():
    rng = random.Random(9)
    x = [rng.random() for _ in range(40)]
    y = [rng.random() for _ in range(40)]
    ours = wilcoxon_signed_rank(x, y)
    assert ours.method == "wilcoxon-normal-approx"
    ref = scipy.stats.wilcoxon(x, y, alternative="greater", method="approx", correction=False)
    assert ours.p_greater == pytest.approx(ref.pvalue, abs=1e-9)


vectors = st.lists(st.tuples(st.integers(-4, 4), st.integers(-4, 4)), min_size=2, max_size=12)


@settings(max_examples=150, deadline=None)
@given(pairs=vectors)
def test_wilcoxon_property(pairs):
    x = [a for a, _ in pairs]
    y = [b for _, b in pairs]
    if x == y:
        with pytest.raises(DegenerateSampleError):
            wilcoxon_signed_rank(x, y)
        return
    w = wilcoxon_signed_rank(x, y)
    ge, le = brute_force_wilcoxon(x, y)
    assert math.isclose(w.p_greater, ge, abs_tol=1e-12) and math.isclose(w.p_less, le, abs_tol=1e-12)
    assert 0 <= w.p_two_sided <= 1
    assert w.p_greater + w.p_less >= 1 - 1e-12
    # swapping the samples swaps the one-sided p-values
    s = wilcoxon_signed_rank(y, x)
    assert math.isclose(s.p_greater, w.p_less, abs_tol=1e-12)
