"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .dataset import (
    DEFAULT_PRIVILEGED,
    Schema,
    SynthSpec,
    format_summary,
    load_csv,
    prepare,
    stratified_split,
    summarize,
    synth_generate,
    write_csv,
)
from .errors import DataError, EdufairError
from .harness import (
    ExperimentConfig,
    ResultsTable,
    accuracy_summary,
    boxplot_stats,
    build_manifest,
    emit_report,
    run_experiment,
    stats_json,
)
from .metrics import aggregate_audit, group_rates, subgroup_audit
from .models import ModelKind, cross_validate, default_grid, fit, make_params

log = logging.getLogger("edufair")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load(args):
    schema = Schema.load(args.schema)
    return prepare(load_csv(args.data, schema))


def _privileged(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


# ------------------------------------------------------------- subcommands

def cmd_synth(args) -> int:
    if args.spec == "table1":
        spec_d = SynthSpec.table1().to_dict()
    else:
        spec_d = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    for key, val in (("seed", args.seed), ("signal_strength", args.signal_strength),
                     ("group_feature_shift", args.group_shift), ("n_features", args.n_features)):
        if val is not None:
            spec_d[key] = val
    try:
        spec = SynthSpec.from_dict(spec_d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid synthetic spec: {exc}") from exc
    data = synth_generate(spec, args.n)
    out = Path(args.out)
    write_csv(data, out)
    schema_path = Path(args.schema_out) if args.schema_out else out.with_suffix(".schema.json")
    data.schema.save(schema_path)
    _write_json(out.with_suffix(".manifest.json"), {
        "command": "synth", "n": args.n, "spec": spec.to_dict(),
        "data": str(out), "schema": str(schema_path),
    })
    print(f"wrote {data.n_rows} rows to {out} (schema {schema_path})")
    return EXIT_OK


def cmd_summarize(args) -> int:
    data = _load(args)
    rows = summarize(data)
    print(format_summary(rows))
    if args.out:
        _write_json(Path(args.out), [asdict(r) for r in rows])
    return EXIT_OK


def cmd_audit(args) -> int:
    data = _load(args)
    pair = stratified_split(data, args.ratio, args.seed)
    kind = ModelKind.parse(args.model)
    hp = (cross_validate(kind, default_grid(kind), pair.train, 5, args.seed)
          if args.cv else make_params(kind))
    model = fit(kind, hp, pair.train, args.seed)
    test = pair.test
    y_pred = model.predict(test.features)
    labels = test.group_labels
    privileged = _privileged(args.privileged)

    rates = {}
    print(f"{'group':<12}{'n':>7}{'PPR':>9}{'TPR':>9}{'FPR':>9}{'FNR':>9}")
    for g in sorted(set(labels)):
        r = group_rates(test.outcome, y_pred, labels, g)
        rates[g] = asdict(r)
        cells = "".join(f"{v:>9.4f}" if v is not None else f"{'-':>9}" for v in (r.ppr, r.tpr, r.fpr, r.fnr))
        print(f"{g:<12}{r.n:>7}{cells}")
    gaps = subgroup_audit(test.outcome, y_pred, labels) + aggregate_audit(test.outcome, y_pred, labels, privileged)
    print()
    print(f"{'focal':<12}{'notion':<8}{'gap':>9}")
    for gp in gaps:
        v = f"{gp.value:>9.4f}" if gp.value is not None else f"{'undef':>9}"
        print(f"{gp.focal_group:<12}{gp.notion.value:<8}{v}")
    acc = float(np.mean(y_pred == test.outcome))
    print(f"\naccuracy {acc:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "audit.json", {
            "rates": rates,
            "gaps": [{"focal": g.focal_group, "notion": g.notion.value, "value": g.value,
                      "components": g.components} for g in gaps],
            "accuracy": acc,
        })
        _write_json(out / "manifest.json", {
            "command": "audit", "data": str(args.data), "schema": str(args.schema),
            "model": kind.value, "hyperparams": asdict(hp), "seed": args.seed, "ratio": args.ratio,
            "privileged": list(privileged),
        })
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        overrides = {}
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if args.n_splits is not None:
            overrides["n_splits"] = args.n_splits
        if args.jobs is not None:
            overrides["jobs"] = args.jobs
        if overrides:
            config = replace(config, **overrides)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid experiment config: {exc}") from exc
    data = _load(args)
    results = run_experiment(config, data)
    stats = boxplot_stats(results)
    extra = {"data": str(args.data), "schema": str(args.schema),
             "accuracy_summary": accuracy_summary(results)}
    paths = emit_report(results, stats, args.out, args.format, config, extra)
    for p in paths:
        print(f"wrote {p}")
    n_fail = len(results.failures())
    if n_fail:
        print(f"{n_fail} cell(s) failed; see manifest.json", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        results = ResultsTable.from_csv(args.results)
    except (ValueError, KeyError) as exc:
        raise DataError(str(exc)) from exc
    stats = boxplot_stats(results)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "boxstats.json").write_text(stats_json(stats), encoding="utf-8")
    manifest = build_manifest(results, None, {"command": "report", "results": str(args.results),
                                              "accuracy_summary": accuracy_summary(results)})
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {out / 'boxstats.json'}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edufair", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a calibrated synthetic dataset")
    p.add_argument("--spec", default="table1", help="'table1' or a JSON synthetic spec")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--signal-strength", type=float)
    p.add_argument("--group-shift", type=float)
    p.add_argument("--n-features", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out")
    p.set_defaults(func=cmd_synth)

    def data_args(p):
        p.add_argument("--data", required=True)
        p.add_argument("--schema", required=True)

    p = sub.add_parser("summarize", help="per-group outcome distribution")
    data_args(p)
    p.add_argument("--out", help="also write the table as JSON")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("audit", help="single split: train a baseline model and report gaps")
    data_args(p)
    p.add_argument("--model", default="RandomForest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--privileged", default=",".join(DEFAULT_PRIVILEGED))
    p.add_argument("--cv", action="store_true", help="choose hyperparameters by 5-fold CV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", help="full repeated-split experiment")
    data_args(p)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-splits", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="recompute box-plot statistics from a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (DataError, FileNotFoundError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EdufairError, OSError, ValueError, RuntimeError) as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
