"""pass^k / pass@k estimators, reports and seeded benchmark runs."""

from itertools import combinations

import numpy as np
import pytest

from bench import (
    EvalReport, KExceedsTrials, TaskTrials, TrialMatrix, metric_table, pass_at_k, pass_hat_k,
    run_benchmark, trial_seeds,
)
from rollout import TrajectoryWriter, load_trajectories
from system.storage import read_json


@pytest.mark.parametrize("n, c, k, expected", [
    (4, 4, 4, 1.0),
    (4, 2, 1, 0.5),
    (4, 3, 2, 0.5),
    (4, 0, 1, 0.0),
])
def test_pass_hat_values(n, c, k, expected):
    assert pass_hat_k(TrialMatrix.from_counts([(n, c)]), k) == pytest.approx(expected)


@pytest.mark.parametrize("n, c, k, expected", [
    (4, 0, 4, 0.0),
    (4, 1, 4, 1.0),
    (4, 2, 2, 5 / 6),
])
def test_pass_at_values(n, c, k, expected):
    assert pass_at_k(TrialMatrix.from_counts([(n, c)]), k) == pytest.approx(expected)


def test_estimators_match_subset_enumeration():
    for n in range(1, 7):
        for c in range(n + 1):
            outcomes = [True] * c + [False] * (n - c)
            matrix = TrialMatrix.from_counts([(n, c)])
            for k in range(1, n + 1):
                subsets = list(combinations(outcomes, k))
                all_ok = sum(all(s) for s in subsets) / len(subsets)
                any_ok = sum(any(s) for s in subsets) / len(subsets)
                assert pass_hat_k(matrix, k) == pytest.approx(all_ok)
                assert pass_at_k(matrix, k) == pytest.approx(any_ok)


def test_pass_hat_falls_and_pass_at_rises_with_k():
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        n = int(rng.integers(1, 9))
        rate = rng.random()
        matrix = TrialMatrix([TaskTrials(f"t{i}", [bool(x) for x in rng.random(n) < rate])
                              for i in range(int(rng.integers(1, 6)))])
        hats = [pass_hat_k(matrix, k) for k in range(1, n + 1)]
        ats = [pass_at_k(matrix, k) for k in range(1, n + 1)]
        assert all(a >= b - 1e-12 for a, b in zip(hats, hats[1:]))
        assert all(a <= b + 1e-12 for a, b in zip(ats, ats[1:]))
        assert all(-1e-12 <= v <= 1.0 + 1e-12 for v in hats + ats)
        assert hats[0] == pytest.approx(ats[0])


def test_k_beyond_trials():
    matrix = TrialMatrix.from_counts([(4, 2)])
    with pytest.raises(KExceedsTrials) as info:
        pass_hat_k(matrix, 5)
    assert (info.value.k, info.value.n) == (5, 4)
    with pytest.raises(ValueError):
        pass_at_k(matrix, 0)
    with pytest.raises(ValueError):
        pass_hat_k(matrix, 1, estimator="bootstrap")


def test_matrix_validation():
    with pytest.raises(ValueError):
        TrialMatrix([TaskTrials("a", [True, False]), TaskTrials("b", [True])])
    with pytest.raises(ValueError):
        TrialMatrix([TaskTrials("a", [])])
    with pytest.raises(ValueError):
        TrialMatrix.from_counts([(3, 4)])
    with pytest.raises(ValueError):
        pass_hat_k(TrialMatrix([]), 1)


def test_partition_estimator_uses_disjoint_blocks():
    matrix = TrialMatrix([TaskTrials("a", [True, True, False, True, True, True])])
    assert pass_hat_k(matrix, 2, estimator="partition") == pytest.approx(2 / 3)
    assert pass_hat_k(matrix, 4, estimator="partition") == 0.0
    assert pass_at_k(matrix, 3, estimator="partition") == 1.0
    assert pass_hat_k(matrix, 2) == pytest.approx(10 / 15)


def test_metric_table_keys():
    table = metric_table(TrialMatrix.from_counts([(4, 4), (4, 0)]), [2, 1])
    assert list(table) == ["p^1", "p^2", "p@1", "p@2"]
    assert table["p^1"] == 0.5


def test_report_table_and_save(tmp_path):
    matrix = TrialMatrix.merge([
        TrialMatrix.from_counts([(4, 4)], domain="airline"),
        TrialMatrix.from_counts([(4, 2)], domain="toy"),
    ])
    report = EvalReport.from_matrix(matrix, [1, 4], label="agent", metadata={"seed": 1})
    assert report.columns == ["p^1", "p^4", "p@4"]
    assert set(report.domains) == {"airline", "toy"}
    lines = report.table().splitlines()
    assert lines[0].split(" | ")[0].strip() == "label"
    assert set(lines[1]) <= {"-", "+"}
    assert [c.strip() for c in lines[2].split(" | ")[1:]] == ["75.0", "50.0", "100.0"]
    assert len(lines) == 5

    report.save(tmp_path)
    saved = read_json(tmp_path / "report.json")
    assert saved["metrics"]["p^1"] == 0.75
    assert (tmp_path / "report.txt").read_text(encoding="utf-8") == report.table()


def test_report_rejects_out_of_range():
    with pytest.raises(ValueError):
        EvalReport(label="x", ks=[1], estimator="unbiased", metrics={"p^1": 1.5})


def test_trial_seeds_are_consecutive():
    seeds = trial_seeds(3, "toy_001", 4)
    assert seeds == list(range(seeds[0], seeds[0] + 4))
    assert trial_seeds(3, "toy_002", 4)[0] != seeds[0]


def test_solver_passes_every_trial(toy_env, ten_toy_tasks, solver, toy_user):
    matrix, report = run_benchmark(toy_env, ten_toy_tasks, solver, toy_user, n_trials=4, seed=0,
                                   ks=[1, 2, 3, 4], max_turns=12)
    assert len(matrix.rows) == 10
    assert report.metrics["p^4"] == 1.0
    assert report.metrics["p^1"] == 1.0
    assert report.metadata["agent_id"] == "scripted:toy_agent_solver"


def test_alternating_agent_is_unreliable(toy_env, ten_toy_tasks, alternating, toy_user):
    matrix, report = run_benchmark(toy_env, ten_toy_tasks, alternating, toy_user, n_trials=4, seed=0,
                                   ks=[1, 2, 4], max_turns=12)
    assert all(row.c == 2 for row in matrix.rows)
    assert report.metrics["p^1"] == pytest.approx(0.5)
    assert report.metrics["p^4"] == 0.0
    assert report.metrics["p@4"] == 1.0
    assert report.metrics["p^2"] == pytest.approx(1 / 6)


def test_benchmark_is_reproducible(tmp_path, toy_env, ten_toy_tasks, alternating, toy_user):
    first = run_benchmark(toy_env, ten_toy_tasks[:3], alternating, toy_user, 4, seed=7, ks=[1, 4],
                          max_turns=12)[1]
    with TrajectoryWriter(tmp_path / "t.jsonl", truncate=True) as writer:
        second = run_benchmark(toy_env, ten_toy_tasks[:3], alternating, toy_user, 4, seed=7, ks=[1, 4],
                               max_turns=12, writer=writer)[1]
    assert first.to_json() == second.to_json()
    trajectories = load_trajectories(tmp_path / "t.jsonl")
    assert len(trajectories) == 12
    assert all(t.reward in (0.0, 1.0) for t in trajectories)


def test_benchmark_rejects_bad_arguments(toy_env, ten_toy_tasks, solver, toy_user):
    with pytest.raises(KExceedsTrials):
        run_benchmark(toy_env, ten_toy_tasks, solver, toy_user, n_trials=2, seed=0, ks=[1, 3])
    with pytest.raises(ValueError):
        run_benchmark(toy_env, [], solver, toy_user, n_trials=2, seed=0)
