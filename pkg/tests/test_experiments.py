import csv
from dataclasses import replace

import numpy as np
import pytest

from cprpw.experiments import (
    ExperimentConfig,
    emit_traces,
    resolve_threads,
    run_e2e_benchmark,
    run_gs_benchmark,
    verify_summary,
    write_e2e_records,
    write_gs_records,
)
from cprpw.gs import GsConfig
from cprpw.pipeline import PipelineConfig, run_algorithm1
from cprpw.signal import BandlimitedSignal


def gs_config(trials=50, seed=1, **kw):
    return ExperimentConfig(kind="gs-bench", trials=trials, seed=seed, **kw)


def cheap_pipeline(restarts=3, iters=60):
    return PipelineConfig(gs=GsConfig(max_iterations=iters, restarts=restarts))


class TestConfig:
    def test_seed_required(self):
        with pytest.raises(ValueError, match="seed"):
            ExperimentConfig(kind="gs-bench")

    def test_counts_positive(self):
        with pytest.raises(ValueError):
            gs_config(trials=0)

    @pytest.mark.parametrize("kw", [{"kind": "nope"}, {"classify": "both"}, {"format": "xml"}])
    def test_bad_values(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**{"seed": 1, **kw})

    def test_threads(self, monkeypatch):
        monkeypatch.delenv("CPR_THREADS", raising=False)
        assert resolve_threads() == 1
        monkeypatch.setenv("CPR_THREADS", "3")
        assert resolve_threads() == 3
        assert resolve_threads(2) == 2
        with pytest.raises(ValueError):
            resolve_threads(0)


class TestGsBenchmark:
    def test_summary_is_consistent(self):
        s = run_gs_benchmark(gs_config(trials=80))
        assert verify_summary(s)
        assert s.rate == s.success_count / 80
        its = [r.iterations_to_threshold for r in s.records if r.success]
        assert s.median_iterations == np.median(its)

    def test_verifier_detects_tampering(self):
        s = run_gs_benchmark(gs_config(trials=30))
        s.success_count += 1
        assert not verify_summary(s)

    def test_deterministic_and_thread_independent(self):
        cfg = gs_config(trials=600, gs=GsConfig(max_iterations=100, restarts=1))
        a = run_gs_benchmark(cfg)
        b = run_gs_benchmark(replace(cfg, threads=3))
        assert a.records == b.records

    def test_prefix_stable(self):
        # trial t uses its own streams, so fewer trials give a prefix
        a = run_gs_benchmark(gs_config(trials=20))
        b = run_gs_benchmark(gs_config(trials=10))
        assert a.records[:10] == b.records

    def test_residual_classification(self):
        a = run_gs_benchmark(gs_config(trials=60))
        b = run_gs_benchmark(gs_config(trials=60, classify="residual"))
        assert abs(a.success_count - b.success_count) <= 6

    def test_records_file(self, tmp_path):
        s = run_gs_benchmark(gs_config(trials=5))
        p = tmp_path / "r.csv"
        write_gs_records(p, s)
        rows = list(csv.DictReader(p.open()))
        assert len(rows) == 5
        assert [int(r["trial_id"]) for r in rows] == list(range(5))
        for r, rec in zip(rows, s.records):
            assert bool(int(r["success"])) == rec.success
            assert float(r["final_epsilon"]) == pytest.approx(rec.final_epsilon, rel=1e-11)

    def test_lines(self):
        s = run_gs_benchmark(gs_config(trials=10))
        assert s.lines()[0].startswith(f"successful reconstructions: {s.success_count} / 10")


@pytest.fixture(scope="module")
def traces(tmp_path_factory):
    p = tmp_path_factory.mktemp("tr") / "traces.csv"
    cfg = gs_config(trials=60, seed=2)
    summary = emit_traces(cfg, p)
    with p.open() as fh:
        rows = list(csv.reader(fh))
    eps = np.array([float(r[4]) for r in rows[1:]]).reshape(60, 900)
    return summary, rows, eps


class TestTraces:
    def test_row_count(self, traces):
        _, rows, _ = traces
        assert rows[0] == ["trial_id", "restart_id", "iteration", "residual", "epsilon"]
        assert len(rows) == 60 * 900 + 1
        assert rows[1][2] == "1" and rows[900][2] == "900"

    def test_successful_traces_end_below_tolerance(self, traces):
        s, _, eps = traces
        ok = [r.trial_id for r in s.records if r.success]
        assert ok
        assert np.all(eps[ok, -10:] < 1e-8)

    def test_unsuccessful_traces_plateau(self, traces):
        s, _, eps = traces
        bad = [r.trial_id for r in s.records if not r.success]
        assert bad
        for t in bad:
            assert eps[t, -1] >= 1e-8
        # at least one failure is stuck: the error barely moves over the last 100 steps
        drift = [abs(eps[t, -1] - eps[t, -100]) / eps[t, -1] for t in bad]
        assert min(drift) < 1e-3

    def test_some_trace_is_non_monotone(self, traces):
        _, _, eps = traces
        assert np.any(np.diff(eps, axis=1) > 1e-12)

    def test_file_matches_summary(self, traces):
        s, _, eps = traces
        np.testing.assert_allclose(eps[:, -1], [r.final_epsilon for r in s.records], rtol=1e-11)


class TestE2e:
    def test_best_is_monotone_in_betas(self):
        base = ExperimentConfig(kind="e2e-bench", instances=2, seed=5, pipeline=cheap_pipeline())
        bests = [run_e2e_benchmark(replace(base, betas_per_instance=b)).best for b in (1, 2, 3)]
        assert np.all(bests[1] <= bests[0]) and np.all(bests[2] <= bests[1])

    def test_nested_draws(self):
        base = ExperimentConfig(kind="e2e-bench", instances=1, seed=5, pipeline=cheap_pipeline())
        a = run_e2e_benchmark(replace(base, betas_per_instance=2))
        b = run_e2e_benchmark(replace(base, betas_per_instance=3))
        assert a.records == b.records[:2]

    def test_thread_independent(self):
        base = ExperimentConfig(
            kind="e2e-bench", instances=3, betas_per_instance=1, seed=6, pipeline=cheap_pipeline()
        )
        assert run_e2e_benchmark(base).records == run_e2e_benchmark(replace(base, threads=3)).records

    def test_records_file(self, tmp_path):
        cfg = ExperimentConfig(
            kind="e2e-bench", instances=1, betas_per_instance=2, seed=7, pipeline=cheap_pipeline()
        )
        s = run_e2e_benchmark(cfg)
        p = tmp_path / "e.csv"
        write_e2e_records(p, s)
        rows = list(csv.DictReader(p.open()))
        assert list(rows[0]) == [
            "instance", "draw", "beta", "relative_error", "max_column_residual", "colinear_overlaps",
        ]
        assert min(float(r["relative_error"]) for r in rows) == pytest.approx(s.max_best, rel=1e-11)
        assert s.lines()[0] == "instances: 1"


@pytest.fixture(scope="module")
def delta_best():
    f = BandlimitedSignal.delta()
    cfg = PipelineConfig()
    return min(run_algorithm1(f, cfg, stream_index=(0, j)).relative_error for j in range(20))


@pytest.mark.slow
class TestDeltaInstance:
    @pytest.mark.xfail(strict=True, reason="real columns converge sublinearly under GS; 900 iterations leave ~5e-3")
    def test_delta_claim(self, delta_best):
        assert delta_best <= 1e-3

    def test_delta_attainable(self, delta_best):
        assert delta_best <= 1e-2
