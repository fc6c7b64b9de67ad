"""Confusion counts, per-group rates and signed fairness gaps.

Every gap is focal-minus-reference and keeps its sign.  A rate whose
denominator is empty is ``None`` (undefined), and so is any gap built from
it; nothing is coerced to zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Collection, Hashable, Iterable

import numpy as np

from .errors import (
    EmptyInput,
    InvalidPartition,
    LengthMismatch,
    OverlappingGroups,
    SingleGroup,
    UnknownGroup,
)


class Notion(str, Enum):
    SP = "SP"
    EOPP = "EOpp"
    PE = "PE"
    EODDS = "EOdds"


NOTIONS = tuple(Notion)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class GroupRates:
    ppr: float | None
    tpr: float | None
    fpr: float | None
    fnr: float | None
    n: int
    n_pos: int
    n_neg: int

    @classmethod
    def from_counts(cls, c: ConfusionCounts) -> "GroupRates":
        n_pos, n_neg = c.tp + c.fn, c.fp + c.tn
        n = n_pos + n_neg
        return cls(
            ppr=(c.tp + c.fp) / n if n else None,
            tpr=c.tp / n_pos if n_pos else None,
            fpr=c.fp / n_neg if n_neg else None,
            fnr=c.fn / n_pos if n_pos else None,
            n=n,
            n_pos=n_pos,
            n_neg=n_neg,
        )


@dataclass(frozen=True)
class GapValue:
    notion: Notion
    focal_group: str
    value: float | None
    components: tuple[float | None, float | None] | None = None

    @property
    def defined(self) -> bool:
        return self.value is not None


def _binary(v, name) -> np.ndarray:
    a = np.asarray(v).reshape(-1)
    if a.size and not ((a == 0) | (a == 1)).all():
        raise ValueError(f"{name} must contain only 0/1")
    return a.astype(np.int64)


def _aligned(y_true, y_pred, group=None):
    yt, yp = _binary(y_true, "y_true"), _binary(y_pred, "y_pred")
    if yt.size != yp.size:
        raise LengthMismatch(f"y_true has {yt.size} rows, y_pred {yp.size}")
    if group is not None:
        g = np.asarray(group).reshape(-1)
        if g.size != yt.size:
            raise LengthMismatch(f"group has {g.size} rows, labels {yt.size}")
        return yt, yp, g
    return yt, yp


def confusion(y_true, y_pred) -> ConfusionCounts:
    yt, yp = _aligned(y_true, y_pred)
    if yt.size == 0:
        raise EmptyInput("confusion of zero rows")
    tp = int(np.sum((yt == 1) & (yp == 1)))
    fp = int(np.sum((yt == 0) & (yp == 1)))
    fn = int(np.sum((yt == 1) & (yp == 0)))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=yt.size - tp - fp - fn)


def _counts_where(yt, yp, mask) -> ConfusionCounts:
    t, p = yt[mask], yp[mask]
    n_t, n_p = int(np.count_nonzero(t)), int(np.count_nonzero(p))
    tp = int(np.count_nonzero(t & p))
    return ConfusionCounts(tp, n_p - tp, n_t - tp, int(t.size) - n_t - n_p + tp)


def _member_mask(grp, members) -> np.ndarray:
    members = list(members)
    if len(members) == 1:
        return grp == members[0]
    return np.logical_or.reduce([grp == m for m in members])


def group_rates(y_true, y_pred, group, g: Hashable) -> GroupRates:
    yt, yp, grp = _aligned(y_true, y_pred, group)
    mask = grp == g
    if not mask.any():
        raise UnknownGroup(f"group {g!r} has no rows")
    return GroupRates.from_counts(_counts_where(yt, yp, mask))


def pooled_rates(y_true, y_pred, group, members: Collection) -> GroupRates:
    """Rates over the union of ``members`` (micro-averaged)."""
    yt, yp, grp = _aligned(y_true, y_pred, group)
    return GroupRates.from_counts(_counts_where(yt, yp, _member_mask(grp, members)))


def _diff(a, b):
    return None if a is None or b is None else a - b


def gap_from_rates(notion: Notion, focal: GroupRates, ref: GroupRates, label: str = "") -> GapValue:
    notion = Notion(notion)
    if notion is Notion.SP:
        return GapValue(notion, label, _diff(focal.ppr, ref.ppr))
    if notion is Notion.EOPP:
        return GapValue(notion, label, _diff(focal.fnr, ref.fnr))
    if notion is Notion.PE:
        return GapValue(notion, label, _diff(focal.fpr, ref.fpr))
    d_tpr, d_fpr = _diff(focal.tpr, ref.tpr), _diff(focal.fpr, ref.fpr)
    value = None if d_tpr is None or d_fpr is None else 0.5 * (d_tpr + d_fpr)
    return GapValue(notion, label, value, (d_tpr, d_fpr))


def _label(members) -> str:
    return "+".join(sorted(str(m) for m in members))


def fairness_gap(notion, y_true, y_pred, group, focal: Collection, reference: Collection,
                 label: str | None = None) -> GapValue:
    """Signed gap of ``notion`` between the pooled focal and reference groups.

    SP compares positive-prediction rates, EOpp false-negative rates, PE
    false-positive rates; EOdds is the mean of the TPR and FPR differences,
    with both differences kept in ``components``.
    """
    focal, reference = set(focal), set(reference)
    if not focal or not reference:
        raise InvalidPartition("focal and reference groups must be nonempty")
    if focal & reference:
        raise OverlappingGroups(f"groups {sorted(map(str, focal & reference))} are on both sides")
    yt, yp, grp = _aligned(y_true, y_pred, group)
    f = GroupRates.from_counts(_counts_where(yt, yp, _member_mask(grp, focal)))
    r = GroupRates.from_counts(_counts_where(yt, yp, _member_mask(grp, reference)))
    return gap_from_rates(notion, f, r, _label(focal) if label is None else label)


def subgroup_audit(y_true, y_pred, group, notions: Iterable[Notion] = NOTIONS) -> list[GapValue]:
    """Each group against the pooled rest: 4 notions x G groups."""
    yt, yp, grp = _aligned(y_true, y_pred, group)
    present = list(np.unique(grp))
    if len(present) < 2:
        raise SingleGroup("one-vs-rest audit needs at least two groups")
    out = []
    for g in present:
        rest = [h for h in present if h != g]
        f = pooled_rates(yt, yp, grp, [g])
        r = pooled_rates(yt, yp, grp, rest)
        out.extend(gap_from_rates(n, f, r, str(g)) for n in notions)
    return out


def aggregate_audit(y_true, y_pred, group, privileged: Collection = ("White", "Asian"),
                    notions: Iterable[Notion] = NOTIONS) -> list[GapValue]:
    """Privileged pool against the complement pool of all other groups."""
    yt, yp, grp = _aligned(y_true, y_pred, group)
    present = set(np.unique(grp).tolist())
    priv = set(privileged)
    if not priv or not priv <= present:
        raise InvalidPartition(f"privileged groups {sorted(map(str, priv - present))} absent from data"
                               if priv else "privileged set is empty")
    unpriv = present - priv
    if not unpriv:
        raise InvalidPartition("privileged set covers every group")
    f = pooled_rates(yt, yp, grp, priv)
    r = pooled_rates(yt, yp, grp, unpriv)
    return [gap_from_rates(n, f, r, "privileged") for n in notions]


def accuracy(y_true, y_pred) -> float:
    c = confusion(y_true, y_pred)
    return (c.tp + c.tn) / c.n
