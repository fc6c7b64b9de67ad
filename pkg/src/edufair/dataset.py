"""Tabular datasets with one sensitive attribute and a binary outcome.

The pipeline is ``load_csv -> drop_missing -> one_hot_encode`` (the last two
commute), followed by ``stratified_split`` per experiment repetition.  A
calibrated synthetic generator stands in for restricted-use survey data.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EmptyAfterCleaning,
    EmptyDataset,
    EmptyStratum,
    MissingColumn,
    SchemaError,
    UnexpectedColumn,
    UnknownLevel,
    UnparseableNumeric,
)

ROLES = ("feature", "sensitive", "outcome")
KINDS = ("numeric", "categorical")

# Bachelor's-or-higher attainment rate per race/ethnicity group.
TABLE1_POSITIVE_RATES = {
    "Asian": 0.73984,
    "Black": 0.62766,
    "Hispanic": 0.67470,
    "2+": 0.69697,
    "White": 0.76005,
}

# Group shares are not published alongside the rates; these approximate the
# survey's post-deletion composition and only shape the generator.
DEFAULT_GROUP_PROPORTIONS = {
    "Asian": 0.10,
    "Black": 0.11,
    "Hispanic": 0.12,
    "2+": 0.05,
    "White": 0.62,
}

DEFAULT_PRIVILEGED = ("White", "Asian")


@dataclass(frozen=True)
class Column:
    name: str
    role: str
    kind: str
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(str(lv) for lv in self.levels))
        if self.kind == "categorical":
            if not self.levels:
                raise SchemaError(f"categorical column {self.name!r} needs levels")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"column {self.name!r} has duplicate levels")


@dataclass(frozen=True)
class Schema:
    """Column roles and level dictionaries for a CSV file.

    The outcome column must be categorical with two levels; the level at
    index 1 is the favorable outcome and is encoded as 1.
    """

    columns: tuple[Column, ...]
    missing_sentinel: str = ""

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        n_sens = sum(c.role == "sensitive" for c in self.columns)
        n_out = sum(c.role == "outcome" for c in self.columns)
        if n_sens != 1 or n_out != 1:
            raise SchemaError(
                f"need exactly one sensitive and one outcome column, got {n_sens} and {n_out}"
            )
        if self.sensitive.kind != "categorical":
            raise SchemaError("sensitive column must be categorical")
        out = self.outcome
        if out.kind != "categorical" or len(out.levels) != 2:
            raise SchemaError("outcome column must be categorical with exactly 2 levels")

    @property
    def sensitive(self) -> Column:
        return next(c for c in self.columns if c.role == "sensitive")

    @property
    def outcome(self) -> Column:
        return next(c for c in self.columns if c.role == "outcome")

    @property
    def features(self) -> tuple[Column, ...]:
        return tuple(c for c in self.columns if c.role == "feature")

    def to_dict(self) -> dict:
        cols = []
        for c in self.columns:
            d = {"name": c.name, "role": c.role, "kind": c.kind}
            if c.levels is not None:
                d["levels"] = list(c.levels)
            cols.append(d)
        return {"columns": cols, "missing_sentinel": self.missing_sentinel}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Schema":
        try:
            cols = tuple(
                Column(c["name"], c["role"], c["kind"], c.get("levels")) for c in d["columns"]
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema manifest: {exc}") from exc
        return cls(cols, d.get("missing_sentinel", ""))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Schema":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable table: feature matrix, group codes, binary outcome, weights.

    ``feature_kinds`` tags each column as ``numeric``, ``categorical`` (raw
    level codes, before one-hot encoding) or ``indicator``.  Missing cells are
    NaN in ``features`` and -1 in ``group``/``outcome``.  ``row_id`` follows
    rows through subsetting so train/test hygiene can be checked.
    """

    features: np.ndarray
    feature_names: tuple[str, ...]
    group: np.ndarray
    group_names: tuple[str, ...]
    outcome: np.ndarray
    weights: np.ndarray | None = None
    feature_kinds: tuple[str, ...] | None = None
    schema: Schema | None = None
    row_id: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2:
            X = X.reshape(len(np.asarray(self.group)), -1)
        n = X.shape[0]
        group = np.asarray(self.group, dtype=np.int64).reshape(-1)
        outcome = np.asarray(self.outcome, dtype=np.int64).reshape(-1)
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        rid = np.arange(n) if self.row_id is None else np.asarray(self.row_id, dtype=np.int64)
        if not (len(group) == len(outcome) == len(w) == len(rid) == n):
            raise ValueError("features, group, outcome, weights and row_id must align")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names does not match feature width")
        kinds = self.feature_kinds or ("numeric",) * X.shape[1]
        if len(kinds) != X.shape[1]:
            raise ValueError("feature_kinds does not match feature width")
        if n and (group.max() >= len(self.group_names) or group.min() < -1):
            raise ValueError("group codes outside the name table")
        if n and (outcome.max() > 1 or outcome.min() < -1):
            raise ValueError("outcome must be 0/1 (or -1 for missing)")
        if np.any(~(w > 0)):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "group", _frozen(group))
        object.__setattr__(self, "outcome", _frozen(outcome))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "row_id", _frozen(rid))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "feature_kinds", tuple(kinds))
        object.__setattr__(self, "group_names", tuple(self.group_names))

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def group_labels(self) -> np.ndarray:
        """Per-row group names (object array)."""
        names = np.array(self.group_names + ("",), dtype=object)
        return names[self.group]

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.features).any(axis=1) | (self.group < 0) | (self.outcome < 0)

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return replace(
            self,
            features=self.features[idx],
            group=self.group[idx],
            outcome=self.outcome[idx],
            weights=self.weights[idx],
            row_id=self.row_id[idx],
        )

    def with_weights(self, weights) -> "Dataset":
        return replace(self, weights=weights)

    def with_features(self, features) -> "Dataset":
        return replace(self, features=features)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    ratio: float


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic generator.

    Features are Gaussian.  Each row's mean is displaced along a fixed
    "success" direction by ``signal_strength * (y - 1/2)`` and along a proxy
    direction (shared with half the features) by
    ``group_feature_shift * (logit(rate_g) - logit(pooled rate))``, so groups
    with lower attainment also look less successful in feature space.
    """

    group_proportions: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_GROUP_PROPORTIONS)
    )
    positive_rates: Mapping[str, float] = field(
        default_factory=lambda: dict(TABLE1_POSITIVE_RATES)
    )
    n_features: int = 8
    signal_strength: float = 1.5
    group_feature_shift: float = 1.0
    seed: int = 0

    def __post_init__(self):
        props, rates = dict(self.group_proportions), dict(self.positive_rates)
        if set(props) != set(rates):
            raise ValueError("group_proportions and positive_rates must share group names")
        if not props:
            raise ValueError("need at least one group")
        if abs(sum(props.values()) - 1.0) > 1e-9:
            raise ValueError("group proportions must sum to 1")
        if any(p < 0 for p in props.values()):
            raise ValueError("group proportions must be nonnegative")
        if any(not 0.0 <= r <= 1.0 for r in rates.values()):
            raise ValueError("positive rates must lie in [0, 1]")
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.signal_strength < 0 or self.group_feature_shift < 0:
            raise ValueError("signal_strength and group_feature_shift must be >= 0")
        object.__setattr__(self, "group_proportions", props)
        object.__setattr__(self, "positive_rates", rates)

    @classmethod
    def table1(cls, **overrides) -> "SynthSpec":
        return cls(**overrides)

    def to_dict(self) -> dict:
        return {
            "group_proportions": dict(self.group_proportions),
            "positive_rates": dict(self.positive_rates),
            "n_features": self.n_features,
            "signal_strength": self.signal_strength,
            "group_feature_shift": self.group_feature_shift,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthSpec":
        return cls(**d)


# ---------------------------------------------------------------- loading

def load_csv(path, schema: Schema) -> Dataset:
    """Parse a CSV file against ``schema``.

    Missing cells (the schema's sentinel, or empty) are kept and flagged, not
    dropped.  Categorical features come back as level codes; call
    :func:`one_hot_encode` to expand them.
    """
    sentinel = schema.missing_sentinel
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(schema.columns[0].name) from None
        declared = {c.name for c in schema.columns}
        for c in schema.columns:
            if c.name not in header:
                raise MissingColumn(c.name)
        for h in header:
            if h not in declared:
                raise UnexpectedColumn(h)
        pos = {h: i for i, h in enumerate(header)}
        rows = list(reader)

    feat_cols = schema.features
    n = len(rows)
    X = np.empty((n, len(feat_cols)))
    sens, out = schema.sensitive, schema.outcome
    group = np.empty(n, dtype=np.int64)
    outcome = np.empty(n, dtype=np.int64)
    lookup = {c.name: {lv: k for k, lv in enumerate(c.levels)} for c in schema.columns if c.levels}

    def categorical(rownum, col, cell):
        if cell == sentinel or cell == "":
            return -1
        try:
            return lookup[col.name][cell]
        except KeyError:
            raise UnknownLevel(rownum, col.name, cell) from None

    for r, row in enumerate(rows):
        rownum = r + 1
        if len(row) != len(header):
            raise UnparseableNumeric(rownum, "<row>", f"{len(row)} fields, expected {len(header)}")
        for j, col in enumerate(feat_cols):
            cell = row[pos[col.name]]
            if col.kind == "categorical":
                code = categorical(rownum, col, cell)
                X[r, j] = np.nan if code < 0 else code
            elif cell == sentinel or cell == "":
                X[r, j] = np.nan
            else:
                try:
                    v = float(cell)
                except ValueError:
                    raise UnparseableNumeric(rownum, col.name, cell) from None
                if not math.isfinite(v):
                    raise UnparseableNumeric(rownum, col.name, cell)
                X[r, j] = v
        group[r] = categorical(rownum, sens, row[pos[sens.name]])
        outcome[r] = categorical(rownum, out, row[pos[out.name]])

    return Dataset(
        features=X,
        feature_names=tuple(c.name for c in feat_cols),
        feature_kinds=tuple(c.kind for c in feat_cols),
        group=group,
        group_names=sens.levels,
        outcome=outcome,
        schema=schema,
    )


def write_csv(data: Dataset, path) -> None:
    """Write ``data`` in the format :func:`load_csv` reads (needs a schema)."""
    schema = data.schema if data.schema is not None else schema_for(data)
    sens, out = schema.sensitive, schema.outcome
    fcols = {c.name: c for c in schema.features}
    sentinel = schema.missing_sentinel
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + [sens.name, out.name])
        for i in range(data.n_rows):
            cells = []
            for j, name in enumerate(data.feature_names):
                v = data.features[i, j]
                col = fcols.get(name)
                if math.isnan(v):
                    cells.append(sentinel)
                elif col is not None and col.kind == "categorical":
                    cells.append(col.levels[int(v)])
                else:
                    cells.append(repr(float(v)))
            g, y = data.group[i], data.outcome[i]
            cells.append(sentinel if g < 0 else data.group_names[g])
            cells.append(sentinel if y < 0 else out.levels[y])
            w.writerow(cells)


def schema_for(data: Dataset, sensitive="race", outcome="outcome") -> Schema:
    """Schema describing a dataset whose features are all numeric."""
    cols = [Column(n, "feature", "numeric") for n in data.feature_names]
    cols.append(Column(sensitive, "sensitive", "categorical", data.group_names))
    cols.append(Column(outcome, "outcome", "categorical", ("0", "1")))
    return Schema(tuple(cols))


# --------------------------------------------------------------- cleaning

def one_hot_encode(raw: Dataset) -> Dataset:
    """Expand every categorical feature of L levels into L indicator columns.

    Full one-hot (no reference level is dropped).  Missing categorical cells
    become NaN in all of their indicators so ``drop_missing`` still sees them.
    """
    if "categorical" not in raw.feature_kinds:
        return raw
    levels = {}
    if raw.schema is not None:
        levels = {c.name: c.levels for c in raw.schema.features if c.kind == "categorical"}
    blocks, names, kinds = [], [], []
    for j, (name, kind) in enumerate(zip(raw.feature_names, raw.feature_kinds)):
        col = raw.features[:, j]
        if kind != "categorical":
            blocks.append(col[:, None])
            names.append(name)
            kinds.append(kind)
            continue
        lv = levels.get(name)
        if lv is None:
            n_levels = int(np.nanmax(col)) + 1 if np.isfinite(col).any() else 1
            lv = tuple(str(k) for k in range(n_levels))
        codes = np.arange(len(lv))
        ind = (col[:, None] == codes[None, :]).astype(float)
        ind[np.isnan(col)] = np.nan
        blocks.append(ind)
        names.extend(f"{name}={level}" for level in lv)
        kinds.extend(["indicator"] * len(lv))
    X = np.hstack(blocks) if blocks else np.empty((raw.n_rows, 0))
    return replace(raw, features=X, feature_names=tuple(names), feature_kinds=tuple(kinds))


def drop_missing(raw: Dataset) -> Dataset:
    """Listwise deletion: remove every row with any missing cell."""
    mask = raw.missing_mask()
    if not mask.any():
        return raw
    keep = np.flatnonzero(~mask)
    if keep.size == 0:
        raise EmptyAfterCleaning(f"all {raw.n_rows} rows contain missing values")
    return raw.take(keep)


def prepare(raw: Dataset) -> Dataset:
    """``drop_missing`` followed by ``one_hot_encode``."""
    return one_hot_encode(drop_missing(raw))


# -------------------------------------------------------------- splitting

def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratum_train_count(m: int, ratio: float) -> int:
    """Rows of a stratum of size ``m`` that go to training."""
    k = _round_half_up(ratio * m)
    if m >= 2 and k >= m:
        k = m - 1
    return k


def strata(data: Dataset) -> list[tuple[int, int, np.ndarray]]:
    """(group, outcome, row indices) for every stratum, in a fixed order.

    Raises EmptyStratum if a group present in the data lacks one outcome.
    """
    out = []
    for g in np.unique(data.group):
        for y in (0, 1):
            idx = np.flatnonzero((data.group == g) & (data.outcome == y))
            if idx.size == 0:
                raise EmptyStratum(data.group_names[g], y)
            out.append((int(g), y, idx))
    return out


def stratified_split(data: Dataset, ratio: float = 0.8, seed: int = 0) -> SplitPair:
    """Seeded train/test split stratified on (group, outcome).

    Each stratum of size m sends ``round_half_up(ratio * m)`` rows to training,
    keeping at least one test row whenever m >= 2.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if data.n_rows == 0:
        raise EmptyDataset("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for _, _, idx in strata(data):
        perm = idx[rng.permutation(idx.size)]
        k = stratum_train_count(idx.size, ratio)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    return SplitPair(data.take(tr), data.take(te), seed, ratio)


# -------------------------------------------------------------- synthetic

def _logit(p: float) -> float:
    p = min(max(p, 1e-6), 1 - 1e-6)
    return math.log(p / (1 - p))


def synth_generate(spec: SynthSpec, n: int) -> Dataset:
    """Draw ``n`` rows from the synthetic model described by ``spec``.

    Group sizes are multinomial.  Within a group of size m exactly
    ``round_half_up(rate * m)`` rows are positive (their positions are
    random), which pins each group's empirical rate to within 1/(2m).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    names = tuple(spec.group_proportions)
    props = np.array([spec.group_proportions[g] for g in names])
    rates = np.array([spec.positive_rates[g] for g in names])
    p = spec.n_features
    rng = np.random.default_rng(spec.seed)

    counts = rng.multinomial(n, props / props.sum())
    group = np.repeat(np.arange(len(names)), counts)
    group = group[rng.permutation(n)]
    outcome = np.zeros(n, dtype=np.int64)
    for g, m in enumerate(counts):
        idx = np.flatnonzero(group == g)
        k = _round_half_up(rates[g] * m)
        outcome[idx[rng.permutation(m)[:k]]] = 1

    pooled = float(props @ rates)
    offset = np.array([_logit(r) - _logit(pooled) for r in rates])
    signal_dir = np.full(p, 1.0 / math.sqrt(p))
    n_proxy = max(1, p // 2)
    proxy_dir = np.zeros(p)
    proxy_dir[:n_proxy] = 1.0 / math.sqrt(n_proxy)

    X = rng.standard_normal((n, p))
    X += spec.signal_strength * (outcome[:, None] - 0.5) * signal_dir[None, :]
    X += spec.group_feature_shift * offset[group][:, None] * proxy_dir[None, :]

    ds = Dataset(
        features=X,
        feature_names=tuple(f"x{j + 1}" for j in range(p)),
        group=group,
        group_names=names,
        outcome=outcome,
    )
    return replace(ds, schema=schema_for(ds))


# ---------------------------------------------------------------- summary

@dataclass(frozen=True)
class SummaryRow:
    group: str
    label: int
    proportion: float
    count: int
    group_count: int


def summarize(data: Dataset) -> list[SummaryRow]:
    """Per-group outcome distribution, two rows per group (label 1 then 0)."""
    if data.n_rows == 0:
        raise EmptyDataset("cannot summarize an empty dataset")
    rows = []
    valid = data.outcome >= 0
    for g in np.unique(data.group[data.group >= 0]):
        sel = (data.group == g) & valid
        m = int(sel.sum())
        if m == 0:
            continue
        n1 = int(data.outcome[sel].sum())
        p1 = n1 / m
        rows.append(SummaryRow(data.group_names[g], 1, p1, n1, m))
        rows.append(SummaryRow(data.group_names[g], 0, 1.0 - p1, m - n1, m))
    if not rows:
        raise EmptyDataset("no rows with a known group and outcome")
    return rows


def format_summary(rows: Iterable[SummaryRow]) -> str:
    lines = [f"{'group':<12}{'label':>6}{'proportion':>12}{'count':>8}"]
    for r in rows:
        lines.append(f"{r.group:<12}{r.label:>6}{r.proportion:>12.5f}{r.count:>8}")
    return "\n".join(lines)


def encoded_width(schema: Schema) -> int:
    """Number of model features after one-hot encoding."""
    return sum(len(c.levels) if c.kind == "categorical" else 1 for c in schema.features)
