import math

import pytest

import fedpd_lab


SMALL = {
    "problem": {"kind": "weak", "agents": 3, "samples_per_agent": 20, "dim": 4, "seed": 1},
    "run": {"algorithm": "FedPD-GD", "rounds": 6, "eta": 0.5},
}


def test_run_returns_trace_and_summary():
    trace, summary = fedpd_lab.run(SMALL)
    assert trace["round"] == list(range(1, 7))
    assert summary["rounds_completed"] == 6
    assert summary["config"]["run"]["algorithm"] == "FedPD-GD"
    assert all(g >= 0.0 for g in trace["gap"])


def test_runs_are_deterministic_across_threads():
    a, _ = fedpd_lab.run(SMALL, threads=1)
    b, _ = fedpd_lab.run(SMALL, threads=2)
    assert a == b


def test_unknown_key_raises_config_error():
    bad = {"run": {"etaa": 0.1}}
    with pytest.raises(fedpd_lab.ConfigError, match="run.etaa"):
        fedpd_lab.run(bad)


def test_problem_accessors():
    p = fedpd_lab.weak_noniid(2, 10, 3, seed=4)
    assert (p.num_agents, p.dim, p.total_samples) == (2, 3, 20)
    g = p.grad(0, [0.1, 0.2, 0.3])
    assert g.shape == (3,)
    assert p.stationarity_gap([0.0, 0.0, 0.0]) >= 0.0


def test_quadratic_pair_has_zero_gap():
    q = fedpd_lab.quadratic_pair()
    assert q.stationarity_gap([3.0]) == 0.0


def test_divergence_factor():
    assert math.isclose(fedpd_lab.divergence_factor(0.5, 2), 1.25)


def test_skip_probability_linear_regime():
    eta = (math.sqrt(5.0) - 1.0) / 8.0
    s = fedpd_lab.select_skip_probability(1.0, 1.0, eta, 1.0)
    assert s["regime"] == "linear"
    assert math.isclose(s["p"], 1.0 / (36.0 * eta))


def test_trace_header():
    assert fedpd_lab.trace_header().startswith("round,comm_rounds_cum")
