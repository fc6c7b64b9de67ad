import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edufair.errors import (
    EmptyInput,
    InvalidPartition,
    LengthMismatch,
    OverlappingGroups,
    SingleGroup,
    UnknownGroup,
)
from edufair.metrics import (
    NOTIONS,
    GroupRates,
    Notion,
    accuracy,
    aggregate_audit,
    confusion,
    fairness_gap,
    gap_from_rates,
    group_rates,
    subgroup_audit,
)


def brute_gap(notion, y_true, y_pred, group, focal, reference):
    """Exact gap by direct counting; None when a denominator is empty."""
    def rate(members, cond, event):
        rows = [i for i in range(len(y_true)) if group[i] in members and cond(i)]
        if not rows:
            return None
        return Fraction(sum(1 for i in rows if event(i)), len(rows))

    def diff(cond, event):
        a, b = rate(focal, cond, event), rate(reference, cond, event)
        return None if a is None or b is None else a - b

    every = lambda i: True
    pos = lambda i: y_true[i] == 1
    neg = lambda i: y_true[i] == 0
    pred1 = lambda i: y_pred[i] == 1
    pred0 = lambda i: y_pred[i] == 0
    if notion == "SP":
        return diff(every, pred1)
    if notion == "EOpp":
        return diff(pos, pred0)
    if notion == "PE":
        return diff(neg, pred1)
    tpr, fpr = diff(pos, pred1), diff(neg, pred1)
    return None if tpr is None or fpr is None else (tpr + fpr) / 2


# ---------------------------------------------------------------- confusion

def test_confusion_hand_enumeration():
    c = confusion([1, 1, 0, 0], [1, 0, 1, 0])
    assert (c.tp, c.fn, c.fp, c.tn) == (1, 1, 1, 1)


def test_confusion_identity():
    c = confusion([1, 0, 1], [1, 0, 1])
    assert (c.tp, c.tn, c.fp, c.fn) == (2, 1, 0, 0)


def test_confusion_total_miss():
    c = confusion([1, 1, 1], [0, 0, 0])
    assert (c.fn, c.tp, c.fp, c.tn) == (3, 0, 0, 0)


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([1, 0], [1])
    with pytest.raises(EmptyInput):
        confusion([], [])


# -------------------------------------------------------------- group_rates

def test_group_rates_hand():
    group = ["A", "A", "B", "B"]
    r = group_rates([1, 0, 1, 0], [1, 1, 0, 0], group, "A")
    assert (r.ppr, r.tpr, r.fpr, r.fnr) == (1.0, 1.0, 1.0, 0.0)
    assert (r.n, r.n_pos, r.n_neg) == (2, 1, 1)


def test_group_rates_undefined_fpr():
    r = group_rates([1, 1, 0], [1, 0, 0], ["A", "A", "B"], "A")
    assert r.fpr is None and r.tpr == 0.5


def test_group_rates_unknown_group():
    with pytest.raises(UnknownGroup):
        group_rates([1, 0], [1, 0], ["A", "A"], "Z")


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=40))
def test_rates_invariants(rows):
    yt, yp = zip(*rows)
    r = group_rates(yt, yp, [0] * len(yt), 0)
    if r.n_pos:
        assert r.tpr + r.fnr == pytest.approx(1.0, abs=1e-15)
    assert (r.fpr is not None) == (r.n_neg > 0)
    assert r.ppr is not None


# --------------------------------------------------------------- gaps

def test_sp_gap_quoted_rates():
    f = GroupRates(0.63, None, None, None, 100, 0, 0)
    r = GroupRates(0.91, None, None, None, 100, 0, 0)
    assert gap_from_rates(Notion.SP, f, r).value == pytest.approx(-0.28, abs=1e-12)


def test_eopp_gap_quoted_rates():
    f = GroupRates(None, 0.80, None, 0.20, 100, 50, 50)
    r = GroupRates(None, 0.954, None, 0.046, 100, 50, 50)
    assert gap_from_rates(Notion.EOPP, f, r).value == pytest.approx(0.154, abs=1e-12)


def test_identical_groups_zero_gaps():
    yt = [1, 0, 1, 1, 0, 1] * 2
    yp = [1, 0, 0, 1, 1, 1] * 2
    g = ["A"] * 6 + ["B"] * 6
    for notion in NOTIONS:
        gap = fairness_gap(notion, yt, yp, g, {"A"}, {"B"})
        assert gap.value == 0.0


def test_eodds_components():
    yt = [1, 1, 0, 0, 1, 1, 0, 0]
    yp = [1, 1, 1, 0, 1, 0, 0, 0]
    g = ["A"] * 4 + ["B"] * 4
    gap = fairness_gap("EOdds", yt, yp, g, {"A"}, {"B"})
    assert gap.components == (0.5, 0.5)
    assert gap.value == 0.5


def test_gap_preconditions():
    with pytest.raises(OverlappingGroups):
        fairness_gap("SP", [1, 0], [1, 0], ["A", "B"], {"A"}, {"A", "B"})
    with pytest.raises(InvalidPartition):
        fairness_gap("SP", [1, 0], [1, 0], ["A", "B"], set(), {"B"})


def test_undefined_propagates():
    # reference group has no negatives: PE and EOdds undefined, not zero
    gap = fairness_gap("PE", [1, 0, 1], [1, 1, 1], ["A", "A", "B"], {"A"}, {"B"})
    assert gap.value is None and not gap.defined
    assert fairness_gap("EOdds", [1, 0, 1], [1, 1, 1], ["A", "A", "B"], {"A"}, {"B"}).value is None


def test_oracle_small_exhaustive():
    """All labelings of 5 rows split 3/2 between groups."""
    group = ["A", "A", "A", "B", "B"]
    for yt in itertools.product((0, 1), repeat=5):
        for yp in itertools.product((0, 1), repeat=5):
            for notion in ("SP", "EOpp", "PE", "EOdds"):
                got = fairness_gap(notion, yt, yp, group, {"A"}, {"B"}).value
                want = brute_gap(notion, yt, yp, group, {"A"}, {"B"})
                assert (got is None) == (want is None)
                if want is not None:
                    assert abs(got - float(want)) < 1e-12


# ------------------------------------------------------------ properties

labels = st.integers(2, 30).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.sampled_from("AB"), min_size=n, max_size=n)))


@settings(max_examples=200)
@given(labels)
def test_two_group_antisymmetry(data):
    yt, yp, g = data
    if len(set(g)) < 2:
        return
    for notion in NOTIONS:
        ab = fairness_gap(notion, yt, yp, g, {"A"}, {"B"}).value
        ba = fairness_gap(notion, yt, yp, g, {"B"}, {"A"}).value
        assert (ab is None) == (ba is None)
        if ab is not None:
            assert ab == -ba
            assert -1.0 <= ab <= 1.0


@settings(max_examples=100)
@given(labels, st.randoms(use_true_random=False))
def test_permutation_invariance(data, rnd):
    yt, yp, g = data
    if len(set(g)) < 2:
        return
    perm = list(range(len(yt)))
    rnd.shuffle(perm)
    pt, pp, pg = ([seq[i] for i in perm] for seq in (yt, yp, g))
    a = subgroup_audit(yt, yp, g)
    b = subgroup_audit(pt, pp, pg)
    for x, y in zip(a, b):
        assert x.focal_group == y.focal_group and x.notion == y.notion
        assert (x.value is None and y.value is None) or x.value == pytest.approx(y.value, abs=1e-15)
    assert accuracy(yt, yp) == accuracy(pt, pp)


@settings(max_examples=100)
@given(labels)
def test_perfect_classifier(data):
    yt, _, g = data
    if len(set(g)) < 2:
        return
    for gap in subgroup_audit(yt, yt, g):
        if gap.notion in (Notion.EOPP, Notion.PE) and gap.value is not None:
            assert gap.value == 0.0
    sp = fairness_gap("SP", yt, yt, g, {"A"}, {"B"}).value
    yt_a = [y for y, gg in zip(yt, g) if gg == "A"]
    yt_b = [y for y, gg in zip(yt, g) if gg == "B"]
    assert sp == pytest.approx(np.mean(yt_a) - np.mean(yt_b), abs=1e-15)


# ------------------------------------------------------------------ audits

def five_group_data(seed=0, n=400):
    rng = np.random.default_rng(seed)
    g = rng.choice(["Asian", "Black", "Hispanic", "2+", "White"], n)
    return rng.integers(0, 2, n), rng.integers(0, 2, n), g


def test_subgroup_audit_shape():
    yt, yp, g = five_group_data()
    gaps = subgroup_audit(yt, yp, g)
    assert len(gaps) == 20
    assert {x.focal_group for x in gaps} == {"Asian", "Black", "Hispanic", "2+", "White"}


def test_subgroup_audit_single_group():
    with pytest.raises(SingleGroup):
        subgroup_audit([1, 0], [1, 0], ["A", "A"])


def test_two_group_subgroup_antisymmetry():
    yt, yp = [1, 0, 1, 1, 0, 0, 1, 0], [1, 1, 1, 0, 0, 0, 1, 1]
    g = ["A", "A", "A", "A", "B", "B", "B", "B"]
    gaps = {(x.focal_group, x.notion): x.value for x in subgroup_audit(yt, yp, g)}
    assert gaps[("A", Notion.SP)] == -gaps[("B", Notion.SP)]


def test_aggregate_reduces_to_pairwise():
    yt, yp, _ = five_group_data(1, 50)
    g = np.where(np.arange(50) % 2 == 0, "A", "B")
    agg = aggregate_audit(yt, yp, g, {"A"})
    for gap in agg:
        pair = fairness_gap(gap.notion, yt, yp, g, {"A"}, {"B"})
        assert gap.value == pair.value


def test_aggregate_default_privileged():
    yt, yp, g = five_group_data(2)
    agg = aggregate_audit(yt, yp, g)
    ref = fairness_gap("SP", yt, yp, g, {"White", "Asian"}, {"Black", "Hispanic", "2+"})
    assert agg[0].notion is Notion.SP and agg[0].value == ref.value


def test_aggregate_invalid_partition():
    yt, yp, g = five_group_data(3)
    with pytest.raises(InvalidPartition):
        aggregate_audit(yt, yp, g, {"Asian", "Black", "Hispanic", "2+", "White"})
    with pytest.raises(InvalidPartition):
        aggregate_audit(yt, yp, g, set())


def test_accuracy_values():
    assert accuracy([1, 1, 0, 0], [1, 0, 1, 0]) == 0.5
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    assert accuracy([1, 0, 1], [0, 1, 0]) == 0.0
    with pytest.raises(EmptyInput):
        accuracy([], [])
