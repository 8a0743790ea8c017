"""``bauc`` command line: estimate, experiment, oracle, plot."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bayes import (
    GaussianPopulation,
    LinearModel,
    PriorHyperparams,
    bayes_optimal_auc,
    cbauc,
    ebauc,
    mc_cbauc_oracle,
    posterior_update,
    sample_binormal_auc,
    sample_moments,
)
from .classifiers import LogRegConfig, lda_direction, predict_scores, train_logreg_l2
from .config import ConfigError, load_experiment
from .data import load_csv
from .estimators import cv_auc, empirical_auc
from .harness import ESTIMATORS, TABLE1_BAYES, ScenarioConfig, draw_training_set, run_experiment
from .numerics import derive_stream
from .plot import PlotError, plot_csv

log = logging.getLogger("bauc")

ESTIMATE_NAMES = ("cbauc", "ebauc", "cv", "binormal", "empirical")


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    fmt: str = "csv"

    def add(self, *cells) -> None:
        if len(cells) != len(self.columns):
            raise ValueError(f"row has {len(cells)} cells, table has {len(self.columns)} columns")
        self.rows.append(list(cells))

    @staticmethod
    def cell(v) -> str:
        if v is None:
            return ""
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v)).lower()
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return "nan" if math.isnan(v) else f"{float(v):.9g}"
        return str(v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([self.cell(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        def conv(v):
            if isinstance(v, (float, np.floating)):
                return None if math.isnan(v) else float(f"{float(v):.9g}")
            if isinstance(v, np.integer):
                return int(v)
            return v
        recs = [dict(zip(self.columns, map(conv, row))) for row in self.rows]
        return json.dumps(recs, indent=2) + "\n"

    def render(self) -> str:
        return self.to_json() if self.fmt == "json" else self.to_csv()

    def write(self, path) -> None:
        Path(path).write_text(self.render(), encoding="utf-8", newline="\n")


class CommandError(RuntimeError):
    pass


def _load_weights(path) -> LinearModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return LinearModel(np.array(doc["w"], dtype=float), float(doc.get("b", 0.0)))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise CommandError(f"cannot read weights from {path}: {exc}") from None


def cmd_estimate(args) -> ResultTable:
    data = load_csv(args.dataset, _label_arg(args.label), args.positive)
    data.require_both_classes()
    names = [s.strip() for s in args.estimators.split(",") if s.strip()]
    bad = [n for n in names if n not in ESTIMATE_NAMES]
    if bad:
        raise CommandError(f"unknown estimator(s): {', '.join(bad)}")
    trainer = LogRegConfig(lam=args.lam)
    if "cv" in names and min(data.class_counts()) < args.folds:
        raise CommandError(
            f"cv: class counts {data.class_counts()} are below the fold count {args.folds}"
        )
    if args.weights:
        model = _load_weights(args.weights)
        if model.w.size != data.dim:
            raise CommandError(f"weights have length {model.w.size}, data has {data.dim} features")
    elif args.lda:
        model = lda_direction(sample_moments(data), args.ridge)
    else:
        model = train_logreg_l2(data, trainer)
    stream = derive_stream(args.seed, 0)
    prior = PriorHyperparams.default_for(data.dim)
    runners = {
        "cbauc": lambda: cbauc(model, posterior_update(prior, sample_moments(data))),
        "ebauc": lambda: ebauc(model.w, posterior_update(prior, sample_moments(data)), args.grid),
        "cv": lambda: cv_auc(data, args.folds, trainer, stream.child(1)),
        "binormal": lambda: sample_binormal_auc(model, sample_moments(data)),
        "empirical": lambda: empirical_auc(predict_scores(model, data), data.labels),
    }
    table = ResultTable(["estimator", "value", "wall_us"], fmt=args.format)
    failures = []
    for name in names:
        t0 = time.perf_counter_ns()
        try:
            value = runners[name]()
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            failures.append(f"{name}: {exc}")
            table.add(name, math.nan, None)
            continue
        us = (time.perf_counter_ns() - t0) / 1e3 if not args.no_timing else 0.0
        table.add(name, value, us)
    if failures:
        raise CommandError("; ".join(failures), table)
    return table


def _label_arg(label: str):
    return int(label) if label.isdigit() else label


AGG_COLUMNS = [
    "kind", "P", "n1", "n2", "ratio_or_target", "estimator", "mae", "std_of_error",
    "mean_bias", "reps_used", "mean_wall_us", "mean_true_auc", "bayes_auc",
]
REP_COLUMNS = [
    "scenario", "kind", "P", "n1", "n2", "ratio_or_target", "replication",
    "true_auc", "estimator", "estimate", "wall_us", "failed",
]


def experiment_tables(results) -> tuple[ResultTable, ResultTable, list[str]]:
    agg = ResultTable(AGG_COLUMNS)
    reps = ResultTable(REP_COLUMNS)
    errors = []
    for si, res in enumerate(results):
        cfg: ScenarioConfig = res.config
        ident = (cfg.kind, cfg.P, cfg.n1, cfg.n2, cfg.ratio_or_target)
        if res.aggregate is None:
            errors.append(f"scenario {si} ({cfg.kind}, P={cfg.P}, n={cfg.n1}+{cfg.n2}): {res.error}")
        else:
            a = res.aggregate
            for name, s in a.summaries.items():
                agg.add(*ident, name, s.mae, s.std_of_error, s.mean_bias, a.reps_used,
                        s.mean_wall_us, a.mean_true_auc, a.bayes_auc)
        for r in res.records:
            if r.failed is not None:
                reps.add(si, *ident, r.replication_index, r.true_auc, None, None, None, r.failed)
                continue
            for name in ESTIMATORS:
                if name in r.estimates:
                    reps.add(si, *ident, r.replication_index, r.true_auc, name,
                             r.estimates[name], r.wall_times[name], None)
    return agg, reps, errors


def cmd_experiment(args) -> ResultTable:
    configs, doc = load_experiment(args.config)
    if args.seed is not None:
        configs = [replace(c, master_seed=args.seed) for c in configs]
    if args.no_timing:
        configs = [replace(c, record_timing=False) for c in configs]
    workers = args.workers or doc.get("workers", 1)
    results = run_experiment(configs, workers=workers)
    agg, reps, errors = experiment_tables(results)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    agg.write(out / "aggregates.csv")
    reps.write(out / "replications.csv")
    _print_bayes_note(configs)
    if errors:
        raise CommandError("; ".join(errors), agg)
    return agg


def _print_bayes_note(configs) -> None:
    seen = set()
    for c in configs:
        if c.kind == "equal_cov" and c.P in TABLE1_BAYES and c.P not in seen:
            seen.add(c.P)
            log.info(
                "P=%d: derived Bayes AUC %.5f; printed reference value %.4f",
                c.P, bayes_optimal_auc(c.population), TABLE1_BAYES[c.P],
            )


def oracle_instance(P: int, n1: int, n2: int, stream):
    """Random population -> training set -> default-prior posterior, plus a random unit w."""
    mu1 = stream.normal(P)
    mu2 = stream.normal(P)
    a = stream.normal((P, P))
    sigma = a @ a.T / P + 0.5 * np.eye(P)
    sigma = 0.5 * (sigma + sigma.T)
    pop = GaussianPopulation.shared(mu1, mu2, sigma)
    cfg = ScenarioConfig("custom", P, n1, n2, pop, estimators=("CBAUC",))
    data = draw_training_set(cfg, stream)
    post = posterior_update(PriorHyperparams.default_for(P), sample_moments(data))
    w = stream.normal(P)
    while not np.any(w):
        w = stream.normal(P)
    return post, LinearModel(w / np.linalg.norm(w))


def cmd_oracle(args) -> ResultTable:
    if args.draws < 1000:
        raise CommandError(f"--draws must be at least 1000, got {args.draws}")
    if args.trials < 1:
        raise CommandError(f"--trials must be at least 1, got {args.trials}")
    if args.n1 < 1 or args.n2 < 1 or args.P < 1:
        raise CommandError("--P, --n1 and --n2 must be positive")
    table = ResultTable(["trial", "cbauc", "oracle", "std_error", "z"], fmt=args.format)
    passed = 0
    for trial in range(args.trials):
        stream = derive_stream(args.seed, trial)
        post, model = oracle_instance(args.P, args.n1, args.n2, stream.child(0))
        closed = cbauc(model, post)
        est, se = mc_cbauc_oracle(model, post, stream.child(1), args.draws)
        z = (closed - est) / se if se > 0 else (0.0 if closed == est else math.inf)
        passed += abs(z) <= 3.0
        table.add(trial, closed, est, se, z)
    table.add("pass_fraction", passed / args.trials, None, None, None)
    return table


def cmd_plot(args) -> None:
    plot_csv(args.aggregates, args.x, args.y, args.series, args.output)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bauc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="AUC estimates for one dataset")
    p.add_argument("dataset")
    p.add_argument("--label", required=True, help="label column name or index")
    p.add_argument("--positive", required=True, help="label value mapped to the positive class")
    p.add_argument("--estimators", default="cbauc,ebauc,cv,binormal,empirical")
    p.add_argument("--lda", action="store_true", help="use the pooled-covariance LDA direction")
    p.add_argument("--ridge", type=float, default=0.0, help="ridge for --lda")
    p.add_argument("--weights", help='JSON file {"w": [...], "b": ...}')
    p.add_argument("--lam", type=float, default=1.0, help="logistic L2 strength")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", type=int, default=2001, help="EBAUC threshold count")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--no-timing", action="store_true", help="report wall times as 0")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("experiment", parents=[common], help="run a JSON scenario sweep")
    p.add_argument("config")
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-timing", action="store_true", help="record wall times as 0")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("oracle", parents=[common], help="closed form versus Monte Carlo")
    p.add_argument("--P", type=int, default=2)
    p.add_argument("--n1", type=int, default=10)
    p.add_argument("--n2", type=int, default=10)
    p.add_argument("--draws", type=int, default=200_000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("plot", parents=[common], help="SVG line chart from an aggregates CSV")
    p.add_argument("aggregates")
    p.add_argument("--x", default="n1")
    p.add_argument("--y", default="mae")
    p.add_argument("--series", default="estimator")
    p.add_argument("--output", "-o", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(name)s: %(message)s", stream=sys.stderr,
    )
    if args.command in ("estimate", "oracle") and args.seed is None:
        args.seed = 0
    try:
        table = args.func(args)
    except CommandError as exc:
        if len(exc.args) > 1 and isinstance(exc.args[1], ResultTable):
            sys.stdout.write(exc.args[1].render())
        print(f"bauc {args.command}: {exc.args[0]}", file=sys.stderr)
        return 1
    except (ConfigError, PlotError, OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"bauc {args.command}: {exc}", file=sys.stderr)
        return 1
    if table is not None:
        sys.stdout.write(table.render())
    return 0


if __name__ == "__main__":
    sys.exit(main())
