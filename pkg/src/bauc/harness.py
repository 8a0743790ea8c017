"""Synthetic scenarios, seeded replications and error aggregation.

A replication draws a training set, fits the linear classifier once and
asks every enabled estimator for its AUC estimate. The ground truth is the
binormal AUC of that fitted classifier under the known population, or for
real data the AUC on held-out rows.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .bayes import (
    GaussianPopulation,
    LinearModel,
    PriorHyperparams,
    bayes_optimal_auc,
    cbauc,
    ebauc,
    population_auc,
    posterior_update,
    sample_binormal_auc,
    sample_moments,
)
from .classifiers import ConvergenceError, LogRegConfig, predict_scores, train_logreg_l2
from .data import Dataset
from .estimators import cv_auc, empirical_auc
from .numerics import cholesky, derive_stream, sample_mvn

ESTIMATORS = ("CBAUC", "EBAUC", "CVAUC", "BINORMAL")
DEFAULT_ESTIMATORS = ("CBAUC", "EBAUC", "CVAUC")
KINDS = ("equal_cov", "unequal_cov", "imbalance", "target_auc_sweep", "custom", "holdout")

UNEQUAL_MU2 = (-1.5, -0.75, 0.75, 1.5)
UNEQUAL_SIGMA2 = (0.25, 0.75, 1.25, 1.75)

# Published reference Bayes AUCs keyed by P; logged next to the derived value.
TABLE1_BAYES = {4: 0.9725, 10: 0.9973, 100: 1.0}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    P: int
    n1: int
    n2: int
    population: GaussianPopulation | None
    replications: int = 200
    master_seed: int = 42
    estimators: tuple[str, ...] = DEFAULT_ESTIMATORS
    trainer: LogRegConfig = field(default_factory=LogRegConfig)
    cv_folds: int = 5
    ebauc_grid: int = 2001
    imbalance_ratio: float | None = None
    target_auc: float | None = None
    n_total: int | None = None
    record_timing: bool = True
    # holdout kind only
    dataset: Dataset | None = None
    train_fraction: float | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ScenarioError("replications must be at least 1")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise ScenarioError(f"unknown or empty estimator set: {bad or self.estimators}")
        if self.kind != "holdout":
            lo = max(2, self.cv_folds) if "CVAUC" in self.estimators else 1
            if min(self.n1, self.n2) < lo:
                raise ScenarioError(f"per-class counts ({self.n1}, {self.n2}) below {lo}")

    @property
    def ratio_or_target(self) -> float | None:
        if self.imbalance_ratio is not None:
            return self.imbalance_ratio
        if self.target_auc is not None:
            return self.target_auc
        return self.train_fraction


def _ones(p):
    return np.ones(p)


def resolve_scenario(
    kind: str,
    *,
    P: int | None = None,
    n_per_class: int | None = None,
    n1: int | None = None,
    n2: int | None = None,
    n_total: int | None = None,
    ratio: float | None = None,
    target: float | None = None,
    population: GaussianPopulation | None = None,
    **options,
) -> ScenarioConfig:
    """Build a ``ScenarioConfig`` from a scenario kind and its raw parameters.

    ``options`` pass through to ``ScenarioConfig`` (replications, seed,
    estimators and so on).
    """
    if kind not in KINDS or kind == "holdout":
        raise ScenarioError(f"unsupported scenario kind {kind!r}")

    def counts():
        if n1 is not None and n2 is not None:
            return int(n1), int(n2)
        if n_per_class is not None:
            return int(n_per_class), int(n_per_class)
        raise ScenarioError(f"{kind}: give n_per_class or both n1 and n2")

    ratio_out = target_out = None
    if kind == "equal_cov":
        if P is None:
            raise ScenarioError("equal_cov needs P")
        pop = GaussianPopulation.shared(np.zeros(P), _ones(P), np.eye(P))
        c1, c2 = counts()
    elif kind == "unequal_cov":
        if P not in (None, 4):
            raise ScenarioError(f"unequal_cov is defined for P=4 only, got P={P}")
        P = 4
        pop = GaussianPopulation(np.zeros(4), np.array(UNEQUAL_MU2), np.eye(4), np.diag(UNEQUAL_SIGMA2))
        c1, c2 = counts()
    elif kind == "imbalance":
        if P is None or n_total is None or ratio is None:
            raise ScenarioError("imbalance needs P, n_total and ratio")
        if not 0.0 < ratio <= 0.5:
            raise ScenarioError(f"imbalance ratio must lie in (0, 0.5], got {ratio}")
        pop = GaussianPopulation.shared(np.zeros(P), _ones(P), np.eye(P))
        c1 = math.ceil(round(ratio * n_total, 9))
        c2 = n_total - c1
        ratio_out = float(ratio)
    elif kind == "target_auc_sweep":
        if P not in (None, 2):
            raise ScenarioError(f"target_auc_sweep is defined for P=2 only, got P={P}")
        if target is None or not 0.5 < target < 1.0:
            raise ScenarioError(f"target AUC must lie in (0.5, 1), got {target}")
        P = 2
        sigma = 1.0 / norm.ppf(target)
        pop = GaussianPopulation.shared(np.zeros(2), _ones(2), sigma**2 * np.eye(2))
        c1, c2 = counts()
        target_out = float(target)
    else:  # custom
        if population is None:
            raise ScenarioError("custom scenario needs a population")
        pop = population
        P = pop.P
        c1, c2 = counts()
    return ScenarioConfig(
        kind=kind, P=int(P), n1=c1, n2=c2, population=pop,
        imbalance_ratio=ratio_out, target_auc=target_out,
        n_total=n_total if kind == "imbalance" else None, **options,
    )


def holdout_scenario(dataset: Dataset, train_fraction: float, **options) -> ScenarioConfig:
    """Real-data scenario: train on a stratified subsample, score the rest."""
    if not 0.0 < train_fraction < 1.0:
        raise ScenarioError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    dataset.require_both_classes()
    n1, n2 = dataset.class_counts()
    return ScenarioConfig(
        kind="holdout", P=dataset.dim, n1=n1, n2=n2, population=None,
        dataset=dataset, train_fraction=float(train_fraction), **options,
    )


@dataclass
class ReplicationRecord:
    replication_index: int
    true_auc: float = math.nan
    estimates: dict[str, float] = field(default_factory=dict)
    wall_times: dict[str, float] = field(default_factory=dict)
    failed: str | None = None


def draw_training_set(config: ScenarioConfig, stream) -> Dataset:
    pop = config.population
    x1 = sample_mvn(stream, pop.mu1, cholesky(pop.sigma1), config.n1)
    x2 = sample_mvn(stream, pop.mu2, cholesky(pop.sigma2), config.n2)
    return Dataset.from_classes(x1, x2)


def _holdout_split(config: ScenarioConfig, stream) -> tuple[Dataset, Dataset]:
    data = config.dataset
    train = np.zeros(data.n, dtype=bool)
    for c in (1, 2):
        idx = np.flatnonzero(data.labels == c)
        k = min(max(2, round(config.train_fraction * idx.size)), idx.size - 1)
        train[idx[stream.permutation(idx.size)[:k]]] = True
    return data.subset(train), data.subset(~train)


def _timed(fn, record_timing: bool):
    t0 = time.perf_counter_ns()
    value = fn()
    elapsed = (time.perf_counter_ns() - t0) / 1e3 if record_timing else 0.0
    return value, elapsed


def run_replication(config: ScenarioConfig, replication_index: int) -> ReplicationRecord:
    """One seeded replication; a pure function of ``(config, replication_index)``
    apart from the recorded wall times."""
    stream = derive_stream(config.master_seed, replication_index)
    data_stream, cv_stream = stream.child(0), stream.child(1)
    rec = ReplicationRecord(replication_index)
    if config.kind == "holdout":
        train, test = _holdout_split(config, data_stream)
    else:
        train, test = draw_training_set(config, data_stream), None
    try:
        model = train_logreg_l2(train, config.trainer)
    except ConvergenceError as exc:
        rec.failed = f"training: {exc}"
        return rec
    if not np.any(model.w):
        rec.failed = "training: zero weight vector"
        return rec
    if test is not None:
        rec.true_auc = empirical_auc(predict_scores(model, test), test.labels)
    else:
        rec.true_auc = population_auc(model, config.population)

    prior = PriorHyperparams.default_for(config.P)

    def bayes_post():
        return posterior_update(prior, sample_moments(train))

    runners = {
        "CBAUC": lambda: cbauc(model, bayes_post()),
        "EBAUC": lambda: ebauc(model.w, bayes_post(), config.ebauc_grid),
        "CVAUC": lambda: cv_auc(train, config.cv_folds, config.trainer, cv_stream),
        "BINORMAL": lambda: sample_binormal_auc(model, sample_moments(train)),
    }
    for name in config.estimators:
        try:
            value, us = _timed(runners[name], config.record_timing)
        except (ArithmeticError, ValueError, ConvergenceError) as exc:
            rec.failed = f"{name}: {exc}"
            return rec
        rec.estimates[name] = value
        rec.wall_times[name] = us
    return rec


@dataclass(frozen=True)
class EstimatorSummary:
    mae: float
    std_of_error: float
    mean_bias: float
    mean_wall_us: float


@dataclass(frozen=True)
class AggregateRecord:
    kind: str
    P: int
    n1: int
    n2: int
    ratio_or_target: float | None
    summaries: dict[str, EstimatorSummary]
    reps_used: int
    reps_failed: int
    mean_true_auc: float
    bayes_auc: float | None


def summarize_errors(errors: np.ndarray) -> tuple[float, float, float]:
    """(MAE, sample std with n-1 divisor, mean bias); std is 0 for one record."""
    errors = np.asarray(errors, dtype=float)
    std = float(np.std(errors, ddof=1)) if errors.size > 1 else 0.0
    return float(np.mean(np.abs(errors))), std, float(np.mean(errors))


def aggregate(records, config: ScenarioConfig | None = None) -> AggregateRecord:
    records = list(records)
    ok = [r for r in records if r.failed is None]
    if not ok:
        raise ScenarioError(f"all {len(records)} replications failed")
    names = [n for n in ESTIMATORS if n in ok[0].estimates]
    truth = np.array([r.true_auc for r in ok])
    summaries = {}
    for name in names:
        est = np.array([r.estimates[name] for r in ok])
        mae, std, bias = summarize_errors(est - truth)
        wall = float(np.mean([r.wall_times.get(name, 0.0) for r in ok]))
        summaries[name] = EstimatorSummary(mae, std, bias, wall)
    bayes = None
    if config is not None and config.population is not None and config.population.equal_covariance:
        bayes = bayes_optimal_auc(config.population)
    return AggregateRecord(
        kind=config.kind if config else "",
        P=config.P if config else 0,
        n1=config.n1 if config else 0,
        n2=config.n2 if config else 0,
        ratio_or_target=config.ratio_or_target if config else None,
        summaries=summaries,
        reps_used=len(ok),
        reps_failed=len(records) - len(ok),
        mean_true_auc=float(truth.mean()),
        bayes_auc=bayes,
    )


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    records: list[ReplicationRecord]
    aggregate: AggregateRecord | None
    error: str | None = None


def run_experiment(configs, workers: int = 1, progress=None) -> list[ScenarioResult]:
    """Run every replication of every config and aggregate per config, in sweep order.

    Replications are independent, so ``workers`` only changes wall time.
    A config whose aggregation fails carries the error instead of aborting
    the sweep.
    """
    configs = list(configs)
    tasks = [(ci, r) for ci, cfg in enumerate(configs) for r in range(cfg.replications)]

    def work(task):
        ci, r = task
        return run_replication(configs[ci], r)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(work, tasks))
    else:
        records = []
        for t in tasks:
            records.append(work(t))
            if progress is not None:
                progress(len(records), len(tasks))
    results = []
    pos = 0
    for cfg in configs:
        recs = records[pos:pos + cfg.replications]
        pos += cfg.replications
        try:
            results.append(ScenarioResult(cfg, recs, aggregate(recs, cfg)))
        except ScenarioError as exc:
            results.append(ScenarioResult(cfg, recs, None, str(exc)))
    return results


def with_overrides(config: ScenarioConfig, **changes) -> ScenarioConfig:
    return replace(config, **changes)
