import math

import numpy as np
import pytest
from scipy.stats import norm

from bauc.bayes import GaussianPopulation, bayes_optimal_auc
from bauc.classifiers import LogRegConfig
from bauc.data import Dataset
from bauc.harness import (
    ReplicationRecord,
    ScenarioError,
    aggregate,
    holdout_scenario,
    resolve_scenario,
    run_experiment,
    run_replication,
    summarize_errors,
    with_overrides,
)


def strip_timing(agg):
    return {k: (s.mae, s.std_of_error, s.mean_bias) for k, s in agg.summaries.items()}


class TestResolveScenario:
    def test_equal_cov(self):
        cfg = resolve_scenario("equal_cov", P=4, n_per_class=10)
        pop = cfg.population
        assert np.array_equal(pop.mu1, np.zeros(4)) and np.array_equal(pop.mu2, np.ones(4))
        assert np.array_equal(pop.sigma1, np.eye(4)) and pop.equal_covariance
        assert bayes_optimal_auc(pop) == pytest.approx(0.92135, abs=1e-5)

    def test_unequal_cov(self):
        cfg = resolve_scenario("unequal_cov", n_per_class=10)
        assert cfg.P == 4
        assert np.allclose(cfg.population.mu2, [-1.5, -0.75, 0.75, 1.5])
        assert np.allclose(np.diag(cfg.population.sigma2), [0.25, 0.75, 1.25, 1.75])
        with pytest.raises(ScenarioError):
            resolve_scenario("unequal_cov", P=3, n_per_class=10)

    @pytest.mark.parametrize("ratio,n_total,expected", [(0.5, 20, (10, 10)), (0.1, 100, (10, 90)), (0.3, 100, (30, 70)), (0.15, 50, (8, 42))])
    def test_imbalance_counts(self, ratio, n_total, expected):
        cfg = resolve_scenario("imbalance", P=2, n_total=n_total, ratio=ratio)
        assert (cfg.n1, cfg.n2) == expected and cfg.ratio_or_target == ratio

    @pytest.mark.parametrize("ratio", [0.0, 0.6, -0.1])
    def test_imbalance_bad_ratio(self, ratio):
        with pytest.raises(ScenarioError):
            resolve_scenario("imbalance", P=2, n_total=100, ratio=ratio)

    def test_target_sweep_unit_sigma(self):
        cfg = resolve_scenario("target_auc_sweep", target=0.8413, n_per_class=10)
        sigma = 1.0 / norm.ppf(0.8413)
        assert sigma == pytest.approx(1.0, abs=5e-4)  # 0.8413 is Phi(1) rounded
        assert np.allclose(cfg.population.sigma1, sigma**2 * np.eye(2))
        assert bayes_optimal_auc(cfg.population) == pytest.approx(0.8413, abs=1e-12)

    @pytest.mark.parametrize("target", [0.6, 0.7, 0.8, 0.9, 0.95])
    def test_target_sweep_hits_target(self, target):
        cfg = resolve_scenario("target_auc_sweep", target=target, n_per_class=10)
        assert bayes_optimal_auc(cfg.population) == pytest.approx(target, abs=1e-9)

    @pytest.mark.parametrize("target", [0.5, 1.0, 0.3])
    def test_target_out_of_range(self, target):
        with pytest.raises(ScenarioError):
            resolve_scenario("target_auc_sweep", target=target, n_per_class=10)

    def test_custom_and_unknown(self):
        pop = GaussianPopulation.shared(np.zeros(3), np.ones(3), 2 * np.eye(3))
        assert resolve_scenario("custom", population=pop, n1=6, n2=9).P == 3
        with pytest.raises(ScenarioError):
            resolve_scenario("custom", n_per_class=5)
        with pytest.raises(ScenarioError):
            resolve_scenario("bogus", P=2, n_per_class=5)

    def test_counts_below_fold_count(self):
        with pytest.raises(ScenarioError):
            resolve_scenario("equal_cov", P=2, n_per_class=3)
        resolve_scenario("equal_cov", P=2, n_per_class=3, estimators=("CBAUC",))

    def test_replications_positive(self):
        with pytest.raises(ScenarioError):
            resolve_scenario("equal_cov", P=2, n_per_class=10, replications=0)


class TestRunReplication:
    def test_deterministic(self):
        cfg = resolve_scenario("equal_cov", P=3, n_per_class=12, record_timing=False,
                               estimators=("CBAUC", "EBAUC", "CVAUC", "BINORMAL"))
        a, b = run_replication(cfg, 4), run_replication(cfg, 4)
        assert a == b and a.failed is None
        assert set(a.estimates) == {"CBAUC", "EBAUC", "CVAUC", "BINORMAL"}
        assert all(v == 0.0 for v in a.wall_times.values())

    def test_single_estimator(self):
        cfg = resolve_scenario("equal_cov", P=2, n_per_class=10, estimators=("CBAUC",))
        rec = run_replication(cfg, 0)
        assert list(rec.estimates) == ["CBAUC"] and rec.wall_times["CBAUC"] > 0

    def test_truth_bounded_by_bayes(self):
        cfg = resolve_scenario("equal_cov", P=2, n_per_class=50, estimators=("CBAUC",))
        best = bayes_optimal_auc(cfg.population)
        for r in range(30):
            rec = run_replication(cfg, r)
            assert 0.5 < rec.true_auc <= best + 1e-12
            assert 0.0 <= rec.estimates["CBAUC"] <= 1.0

    def test_training_failure_is_flagged(self):
        cfg = resolve_scenario("equal_cov", P=2, n_per_class=10, estimators=("CBAUC",))
        cfg = with_overrides(cfg, population=GaussianPopulation.shared(np.zeros(2), 100 * np.ones(2), np.eye(2)))
        rec = run_replication(with_overrides(cfg, trainer=LogRegConfig(lam=0.0, max_iters=5)), 0)
        assert rec.failed is not None and rec.failed.startswith("training")

    def test_holdout(self):
        rng = np.random.default_rng(0)
        ds = Dataset.from_classes(rng.normal(size=(40, 3)), rng.normal(size=(30, 3)) + 1)
        cfg = holdout_scenario(ds, 0.5, replications=3, record_timing=False)
        assert cfg.ratio_or_target == 0.5
        rec = run_replication(cfg, 0)
        assert rec.failed is None and 0.5 < rec.true_auc <= 1.0
        with pytest.raises(ScenarioError):
            holdout_scenario(ds, 1.0)


class TestAggregate:
    def test_exact_single(self):
        rec = ReplicationRecord(0, 0.8, {"CBAUC": 0.8}, {"CBAUC": 1.0})
        agg = aggregate([rec])
        s = agg.summaries["CBAUC"]
        assert (s.mae, s.mean_bias, s.std_of_error) == (0.0, 0.0, 0.0)

    def test_two_records(self):
        recs = [ReplicationRecord(0, 0.7, {"CBAUC": 0.8}), ReplicationRecord(1, 0.7, {"CBAUC": 0.6})]
        s = aggregate(recs).summaries["CBAUC"]
        assert s.mae == pytest.approx(0.1, abs=1e-15)
        assert s.mean_bias == pytest.approx(0.0, abs=1e-15)
        assert s.std_of_error == pytest.approx(0.1 * math.sqrt(2), abs=1e-15)

    def test_failed_excluded(self):
        recs = [ReplicationRecord(0, 0.7, {"CBAUC": 0.75}), ReplicationRecord(1, failed="training: x")]
        agg = aggregate(recs)
        assert agg.reps_used == 1 and agg.reps_failed == 1
        assert agg.summaries["CBAUC"].mae == pytest.approx(0.05)

    def test_all_failed(self):
        with pytest.raises(ScenarioError):
            aggregate([ReplicationRecord(0, failed="x"), ReplicationRecord(1, failed="y")])

    def test_summarize_errors(self):
        mae, std, bias = summarize_errors(np.array([0.1, -0.3, 0.2]))
        assert mae == pytest.approx(0.2) and bias == pytest.approx(0.0, abs=1e-15)
        assert std == pytest.approx(np.std([0.1, -0.3, 0.2], ddof=1))


class TestRunExperiment:
    def test_single_config(self):
        cfg = resolve_scenario("equal_cov", P=2, n_per_class=10, replications=5, record_timing=False)
        (res,) = run_experiment([cfg])
        direct = aggregate([run_replication(cfg, r) for r in range(5)], cfg)
        assert res.aggregate == direct

    def test_order_and_error_propagation(self):
        ok = resolve_scenario("equal_cov", P=2, n_per_class=10, replications=3, estimators=("CBAUC",))
        pop = GaussianPopulation.shared(np.zeros(2), 100 * np.ones(2), np.eye(2))
        bad = with_overrides(ok, population=pop, trainer=LogRegConfig(lam=0.0, max_iters=3))
        results = run_experiment([ok, bad, ok])
        assert results[0].aggregate is not None and results[2].aggregate is not None
        assert results[1].aggregate is None and "failed" in results[1].error

    def test_thread_count_invariance(self):
        cfgs = [resolve_scenario("equal_cov", P=4, n_per_class=n, replications=20, record_timing=False)
                for n in (10, 20)]
        serial = run_experiment(cfgs, workers=1)
        threaded = run_experiment(cfgs, workers=8)
        for a, b in zip(serial, threaded):
            assert a.aggregate == b.aggregate
            assert [r.estimates for r in a.records] == [r.estimates for r in b.records]

    def test_thread_count_invariance_with_timing(self):
        cfg = resolve_scenario("equal_cov", P=2, n_per_class=10, replications=10)
        a = run_experiment([cfg], workers=1)[0].aggregate
        b = run_experiment([cfg], workers=4)[0].aggregate
        assert strip_timing(a) == strip_timing(b)

    def test_error_shrinks_with_sample_size(self):
        cfgs = [resolve_scenario("equal_cov", P=4, n_per_class=n, replications=200) for n in (10, 50)]
        small, large = (r.aggregate for r in run_experiment(cfgs))
        for name in ("CBAUC", "EBAUC", "CVAUC"):
            assert large.summaries[name].mae <= small.summaries[name].mae
