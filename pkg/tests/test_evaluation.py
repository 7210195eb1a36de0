import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracle_align.alignment import AlignmentSet, ConfusionCounts, Mapping
from oracle_align.evaluation import OneClassError, diagnose, f_measure, precision_recall_f, round3


def maps(names):
    return [Mapping(f"http://s#{n}", f"http://t#{n}") for n in names]


def test_prf_hand_example():
    # |S| = 10, |RA| = 8, |S & RA| = 6
    system = AlignmentSet(maps(range(10)))
    reference = AlignmentSet(maps(list(range(6)) + ["x", "y"]))
    r = precision_recall_f(system, reference)
    assert (r.system_size, r.reference_size, r.intersection_size) == (10, 8, 6)
    assert r.precision == 0.6 and r.recall == 0.75
    assert r.f_score == pytest.approx(float(Fraction(2) * Fraction(6, 10) * Fraction(3, 4) / (Fraction(6, 10) + Fraction(3, 4))))
    assert (round3(r.precision), round3(r.recall), round3(r.f_score)) == (0.6, 0.75, 0.667)


def test_prf_identity_disjoint_empty():
    ref = AlignmentSet(maps("abc"))
    assert precision_recall_f(ref, ref).f_score == 1.0
    d = precision_recall_f(AlignmentSet(maps("xyz")), ref)
    assert (d.precision, d.recall, d.f_score) == (0, 0, 0)
    e = precision_recall_f(AlignmentSet(), ref)
    assert e.precision == 0.0 and e.f_score == 0.0
    with pytest.raises(ValueError):
        precision_recall_f(ref, AlignmentSet())


def test_f_measure_zero():
    assert f_measure(0.0, 0.0) == 0.0


def test_diagnose_reconstructed_counts():
    r = diagnose(ConfusionCounts(tp=157, fp=24, tn=70, fn=8))
    # hand arithmetic: 157/165 and 70/94
    assert r.sensitivity == 157 / 165
    assert r.specificity == 70 / 94
    assert r.youden_index == pytest.approx(157 / 165 + 70 / 94 - 1, abs=1e-15)
    assert (round3(r.sensitivity), round3(r.specificity), round3(r.youden_index)) == (0.952, 0.745, 0.696)


def test_diagnose_boundaries():
    always_yes = diagnose(ConfusionCounts(tp=5, fp=3, tn=0, fn=0))
    assert (always_yes.sensitivity, always_yes.specificity, always_yes.youden_index) == (1.0, 0.0, 0.0)
    perfect = diagnose(ConfusionCounts(tp=2, fp=0, tn=3, fn=0))
    assert perfect.youden_index == 1.0
    with pytest.raises(OneClassError, match="counts"):
        diagnose(ConfusionCounts(tp=3, fp=0, tn=0, fn=1))
    with pytest.raises(OneClassError):
        diagnose(ConfusionCounts(0, 0, 0, 0))


def test_youden_identity_random_tuples():
    rng = random.Random(2024)
    for _ in range(1000):
        c = ConfusionCounts(rng.randint(0, 2000), rng.randint(0, 2000), rng.randint(0, 2000), rng.randint(0, 2000))
        if c.positives == 0 or c.negatives == 0:
            continue
        r = diagnose(c)
        assert r.youden_index == r.sensitivity + r.specificity - 1
        assert 0 <= r.sensitivity <= 1 and 0 <= r.specificity <= 1 and -1 <= r.youden_index <= 1


def test_round3_half_away_from_zero():
    assert round3(1 / 512) == 0.002
    assert round3(0.0005) == 0.001
    assert round3(0.6665) == 0.667
    assert round3(-0.1065) == -0.107
    assert round3(2.675) == 2.675
    assert round3(None) is None


names = st.sets(st.integers(0, 30), max_size=20)


@given(s=names, ref=names.filter(bool), extra=st.integers(0, 30))
def test_recall_monotone(s, ref, extra):
    ref_set = AlignmentSet(maps(ref))
    before = precision_recall_f(AlignmentSet(maps(s)), ref_set)
    added = next(iter(ref)) if extra not in ref else extra
    after = precision_recall_f(AlignmentSet(maps(s | {added})), ref_set)
    assert after.recall >= before.recall
    assert 0 <= after.f_score <= 1
    if before.precision + before.recall:
        assert before.f_score == pytest.approx(2 * before.precision * before.recall / (before.precision + before.recall))
