"""Repeated-split experiment protocol and box-plot-ready reports.

For split i (seed ``base_seed + i``): stratified 80/20 split, per-model
hyperparameter search by k-fold CV on the training part, then for every
mitigation train, predict the test part, and record the subgroup audit
(each group vs. the rest), the aggregate audit (privileged vs.
unprivileged) and test accuracy.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import platform
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from . import __version__
from .dataset import DEFAULT_PRIVILEGED, Dataset, stratified_split
from .errors import EdufairError, EmptyResults, ReportIOError
from .metrics import NOTIONS, accuracy, aggregate_audit, subgroup_audit
from .mitigation import BinaryGroupMap, binarize_groups, dir_repair, exgr_fit, metac_fit, reweigh
from .models import ModelKind, cross_validate, default_grid, fit, make_params

log = logging.getLogger(__name__)

CSV_HEADER = ("split", "model", "mitigation", "scope", "group", "notion", "value", "defined")
QUARTILE_METHOD = "linear"

MITIGATION_DEFAULTS = {
    "Baseline": {},
    "ReW": {},
    "DIR": {"lam": 1.0, "repair_indicators": False},
    "ExGR": {"constraint": "SP", "eps": 0.05, "iterations": 50, "bound": None, "step": 0.5},
    "MetaC": {"metric": "sr", "tau": 0.8, "grid_resolution": 51},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    grid: tuple | None = None
    name: str | None = None

    def __post_init__(self):
        kind = ModelKind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        grid = default_grid(kind) if self.grid is None else [make_params(kind, g) for g in self.grid]
        object.__setattr__(self, "grid", tuple(grid))
        if self.name is None:
            object.__setattr__(self, "name", kind.short)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "name": self.name, "grid": [asdict(g) for g in self.grid]}

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        if isinstance(d, str):
            return cls(d)
        return cls(d["kind"], d.get("grid"), d.get("name"))


@dataclass(frozen=True)
class MitigationSpec:
    kind: str
    params: dict = field(default_factory=dict)
    name: str | None = None

    def __post_init__(self):
        if self.kind not in MITIGATION_DEFAULTS:
            raise ValueError(f"unknown mitigation {self.kind!r}; choose from {sorted(MITIGATION_DEFAULTS)}")
        unknown = set(self.params) - set(MITIGATION_DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        object.__setattr__(self, "params", {**MITIGATION_DEFAULTS[self.kind], **self.params})
        if self.name is None:
            object.__setattr__(self, "name", self.kind)
        p = self.params
        if self.kind == "DIR" and not 0.0 <= p["lam"] <= 1.0:
            raise ValueError("DIR lam must lie in [0, 1]")
        if self.kind == "ExGR" and (p["eps"] <= 0 or p["constraint"] not in ("SP", "EOdds")):
            raise ValueError("ExGR needs eps > 0 and constraint SP or EOdds")
        if self.kind == "MetaC" and not 0.0 <= p["tau"] <= 1.0:
            raise ValueError("MetaC tau must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "name": self.name, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d) -> "MitigationSpec":
        if isinstance(d, str):
            return cls(d)
        return cls(d["kind"], dict(d.get("params", {})), d.get("name"))


@dataclass(frozen=True)
class ExperimentConfig:
    n_splits: int = 30
    split_ratio: float = 0.8
    models: tuple[ModelSpec, ...] = field(
        default_factory=lambda: tuple(ModelSpec(k) for k in ModelKind))
    mitigations: tuple[MitigationSpec, ...] = field(
        default_factory=lambda: tuple(MitigationSpec(k) for k in MITIGATION_DEFAULTS))
    privileged: tuple[str, ...] = DEFAULT_PRIVILEGED
    base_seed: int = 0
    cv_per_split: bool = True
    cv_folds: int = 5
    jobs: int = 1

    def __post_init__(self):
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie in (0, 1)")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        models = tuple(m if isinstance(m, ModelSpec) else ModelSpec.from_dict(m) for m in self.models)
        mits = tuple(m if isinstance(m, MitigationSpec) else MitigationSpec.from_dict(m)
                     for m in self.mitigations)
        for label, names in (("model", [m.name for m in models]), ("mitigation", [m.name for m in mits])):
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate {label} names {names}")
        object.__setattr__(self, "models", models)
        object.__setattr__(self, "mitigations", mits)
        object.__setattr__(self, "privileged", tuple(self.privileged))

    def to_dict(self) -> dict:
        return {
            "n_splits": self.n_splits,
            "split_ratio": self.split_ratio,
            "models": [m.to_dict() for m in self.models],
            "mitigations": [m.to_dict() for m in self.mitigations],
            "privileged": list(self.privileged),
            "base_seed": self.base_seed,
            "cv_per_split": self.cv_per_split,
            "cv_folds": self.cv_folds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        kw: dict[str, Any] = {k: d[k] for k in ("n_splits", "split_ratio", "base_seed", "cv_per_split",
                                                 "cv_folds", "jobs") if k in d}
        if "models" in d:
            kw["models"] = tuple(ModelSpec.from_dict(m) for m in d["models"])
        if "mitigations" in d:
            kw["mitigations"] = tuple(MitigationSpec.from_dict(m) for m in d["mitigations"])
        if "privileged" in d:
            kw["privileged"] = tuple(d["privileged"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ----------------------------------------------------------------- results

@dataclass(frozen=True)
class Record:
    split: int
    model: str
    mitigation: str
    scope: str
    group: str
    notion: str
    value: float | None

    @property
    def cell(self) -> tuple[str, str, str, str, str]:
        return (self.model, self.mitigation, self.scope, self.group, self.notion)


@dataclass
class ResultsTable:
    """Long-form records plus run metadata (seeds, chosen hyperparameters, failures)."""

    records: list[Record] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def gaps(self) -> list[Record]:
        return [r for r in self.records if r.scope in ("subgroup", "aggregate")]

    def accuracies(self) -> list[Record]:
        return [r for r in self.records if r.scope == "overall"]

    def failures(self) -> list[Record]:
        return [r for r in self.records if r.scope == "failure"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            defined = r.value is not None
            w.writerow([r.split, r.model, r.mitigation, r.scope, r.group, r.notion,
                        repr(float(r.value)) if defined else "", int(defined)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path) -> "ResultsTable":
        records = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
            for row in reader:
                value = float(row["value"]) if row["defined"] == "1" else None
                records.append(Record(int(row["split"]), row["model"], row["mitigation"],
                                      row["scope"], row["group"], row["notion"], value))
        return cls(records)


# ------------------------------------------------------------------ running

def cell_seed(split_seed: int, model: str, mitigation: str) -> int:
    """Seed for one (split, model, mitigation) cell, independent of run order."""
    tag = zlib.crc32(f"{model}/{mitigation}".encode())
    return int(np.random.SeedSequence([split_seed, tag]).generate_state(1)[0])


def fit_cell(model: ModelSpec, hp, mit: MitigationSpec, train: Dataset, s_train,
             seed: int) -> Callable[[Dataset, np.ndarray], np.ndarray]:
    """Train one model under one mitigation; returns a test-set predictor."""
    p = mit.params
    kind = mit.kind
    if kind == "Baseline":
        m = fit(model.kind, hp, train, seed)
        return lambda test, s: m.predict(test.features)
    if kind == "ReW":
        m = fit(model.kind, hp, train.with_weights(reweigh(train, s_train)), seed)
        return lambda test, s: m.predict(test.features)
    if kind == "DIR":
        repaired = dir_repair(train, s_train, p["lam"], repair_indicators=p["repair_indicators"], seed=seed)
        m = fit(model.kind, hp, repaired, seed)

        def predict_dir(test, s):
            fixed = dir_repair(test, s, p["lam"], repair_indicators=p["repair_indicators"], seed=seed)
            return m.predict(fixed.features)
        return predict_dir
    if kind == "ExGR":
        mix = exgr_fit(model.kind, hp, train, s_train, p["constraint"], p["eps"], p["iterations"],
                       p["bound"], p["step"], seed=seed)
        return lambda test, s: mix.predict(test.features)
    mc = metac_fit(train, s_train, p["metric"], p["tau"], p["grid_resolution"], kind=model.kind,
                   hp=hp, seed=seed)
    return lambda test, s: mc.predict(test.features, s)


def _audit_records(i, model, mit, test, y_pred, privileged) -> list[Record]:
    labels = test.group_labels
    out = []
    for gap in subgroup_audit(test.outcome, y_pred, labels):
        out.append(Record(i, model, mit, "subgroup", gap.focal_group, gap.notion.value, gap.value))
    for gap in aggregate_audit(test.outcome, y_pred, labels, privileged):
        out.append(Record(i, model, mit, "aggregate", "privileged", gap.notion.value, gap.value))
    out.append(Record(i, model, mit, "overall", "all", "accuracy", accuracy(test.outcome, y_pred)))
    return out


def choose_hyperparams(config: ExperimentConfig, model: ModelSpec, train: Dataset, seed: int):
    if len(model.grid) == 1:
        return model.grid[0]
    return cross_validate(model.kind, list(model.grid), train, config.cv_folds, seed)


def run_split(config: ExperimentConfig, data: Dataset, i: int, fixed_hp: dict | None = None):
    """Records and metadata for split ``i``."""
    split_seed = config.base_seed + i
    pair = stratified_split(data, config.split_ratio, split_seed)
    train, test = pair.train, pair.test
    gmap = BinaryGroupMap(config.privileged)
    s_train, s_test = binarize_groups(train, gmap), binarize_groups(test, gmap)
    records, chosen, failures = [], {}, []
    for model in config.models:
        try:
            if fixed_hp is not None and model.name in fixed_hp:
                hp = fixed_hp[model.name]
            else:
                hp = choose_hyperparams(config, model, train, split_seed)
        except EdufairError as exc:
            for mit in config.mitigations:
                records.append(Record(i, model.name, mit.name, "failure", type(exc).__name__, "error", None))
                failures.append({"split": i, "model": model.name, "mitigation": mit.name,
                                 "stage": "cv", "error": f"{type(exc).__name__}: {exc}"})
            continue
        chosen[model.name] = hp
        for mit in config.mitigations:
            seed = cell_seed(split_seed, model.name, mit.name)
            try:
                predictor = fit_cell(model, hp, mit, train, s_train, seed)
                y_pred = predictor(test, s_test)
                records.extend(_audit_records(i, model.name, mit.name, test, y_pred, config.privileged))
            except EdufairError as exc:
                log.warning("split %d %s/%s failed: %s", i, model.name, mit.name, exc)
                records.append(Record(i, model.name, mit.name, "failure", type(exc).__name__, "error", None))
                failures.append({"split": i, "model": model.name, "mitigation": mit.name,
                                 "stage": "fit", "error": f"{type(exc).__name__}: {exc}"})
    meta = {"seed": split_seed, "hyperparams": {k: asdict(v) for k, v in chosen.items()},
            "n_train": train.n_rows, "n_test": test.n_rows}
    return records, meta, failures, chosen


def _run_split_job(args):
    config, data, i, fixed = args
    records, meta, failures, _ = run_split(config, data, i, fixed)
    return records, meta, failures


def run_experiment(config: ExperimentConfig, data: Dataset, jobs: int | None = None) -> ResultsTable:
    """Run the repeated-split protocol; identical output for identical inputs.

    With ``cv_per_split=False`` hyperparameters chosen on split 0 are reused.
    Splits run in worker processes when ``jobs > 1``; the table is assembled
    in split order either way.
    """
    jobs = config.jobs if jobs is None else jobs
    first = run_split(config, data, 0)
    fixed = None if config.cv_per_split else first[3]
    outputs = [first[:3]]
    rest = [(config, data, i, fixed) for i in range(1, config.n_splits)]
    if jobs > 1 and rest:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs.extend(pool.map(_run_split_job, rest))
    else:
        outputs.extend(_run_split_job(a) for a in rest)
    records, splits, failures = [], [], []
    for recs, meta, fails in outputs:
        records.extend(recs)
        splits.append(meta)
        failures.extend(fails)
    return ResultsTable(records, {"splits": splits, "failures": failures})


# -------------------------------------------------------------- statistics

@dataclass(frozen=True)
class BoxStats:
    min: float | None
    q1: float | None
    median: float | None
    q3: float | None
    max: float | None
    mean: float | None
    variance: float | None
    n_defined: int
    n_undefined: int

    @classmethod
    def of(cls, values: Iterable[float | None]) -> "BoxStats":
        values = list(values)
        vals = np.array([v for v in values if v is not None], dtype=float)
        n_undef = len(values) - vals.size
        if vals.size == 0:
            return cls(None, None, None, None, None, None, None, 0, n_undef)
        q = np.percentile(vals, [0, 25, 50, 75, 100], method=QUARTILE_METHOD)
        var = float(np.var(vals, ddof=1)) if vals.size > 1 else 0.0
        return cls(*(float(v) for v in q), float(np.mean(vals)), var, int(vals.size), n_undef)


def cell_key(cell) -> str:
    return "/".join(cell)


def boxplot_stats(results: ResultsTable) -> dict[str, BoxStats]:
    """BoxStats per (model, mitigation, scope, group, notion) cell.

    Accuracy is additionally pooled over models under model ``ALL``.
    Failure records are not statistics and are skipped.
    """
    cells: dict[tuple, list] = {}
    for r in results.records:
        if r.scope == "failure":
            continue
        cells.setdefault(r.cell, []).append(r.value)
        if r.scope == "overall":
            cells.setdefault(("ALL",) + r.cell[1:], []).append(r.value)
    if not cells:
        raise EmptyResults("no records to summarize")
    return {cell_key(c): BoxStats.of(v) for c, v in sorted(cells.items())}


def stats_json(stats: dict[str, BoxStats]) -> str:
    return json.dumps({k: asdict(v) for k, v in stats.items()}, indent=2, sort_keys=True) + "\n"


def _versions() -> dict:
    return {"edufair": __version__, "python": platform.python_version(), "numpy": np.__version__}


def build_manifest(results: ResultsTable, config: ExperimentConfig | None = None,
                   extra: dict | None = None) -> dict:
    manifest = {
        "config": config.to_dict() if config is not None else None,
        "base_seed": config.base_seed if config is not None else None,
        "splits": results.meta.get("splits", []),
        "failures": results.meta.get("failures", []),
        "conventions": {
            "gap_sign": "focal minus reference",
            "eodds": "mean of TPR and FPR differences",
            "quartiles": "linear interpolation of order statistics (type 7)",
            "variance": "sample variance (ddof=1); 0 for a single value",
            "undefined": "gaps with an empty rate denominator are counted in n_undefined",
        },
        "versions": _versions(),
    }
    if extra:
        manifest.update(extra)
    return manifest


def emit_report(results: ResultsTable, stats: dict[str, BoxStats], out_dir, fmt: str = "csv",
                config: ExperimentConfig | None = None, extra: dict | None = None) -> list[Path]:
    """Write results (CSV or JSON), ``boxstats.json`` and ``manifest.json``."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    out = Path(out_dir)
    if fmt == "csv":
        results_name, results_text = "results.csv", results.to_csv()
    else:
        rows = [asdict(r) for r in results.records]
        results_name, results_text = "results.json", json.dumps(rows, indent=2) + "\n"
    manifest = json.dumps(build_manifest(results, config, extra), indent=2, sort_keys=True) + "\n"
    files = [(results_name, results_text), ("boxstats.json", stats_json(stats)),
             ("manifest.json", manifest)]
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files:
            path = out / name
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(path)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {out}: {exc}") from exc
    return written


def accuracy_summary(results: ResultsTable) -> dict:
    """Mean test accuracy per (model, mitigation) and pooled over models."""
    per: dict[tuple, list] = {}
    for r in results.accuracies():
        per.setdefault((r.model, r.mitigation), []).append(r.value)
        per.setdefault(("ALL", r.mitigation), []).append(r.value)
    return {f"{m}/{g}": float(np.mean(v)) for (m, g), v in sorted(per.items())}
