"""Simulation loop tests: determinism, shared randomness, structure."""

import dataclasses

import numpy as np
import pytest

from netopinion import (ControlConfig, KernelParams, OpinionState, SimConfig,
                        consensus_metric, controlled_fraction,
                        ensemble_degree_marginals, init_network,
                        run_simulation, sweep_c_star)
from netopinion.graph import RewireParams
from netopinion.sim import trajectory_to_dict, write_trajectory_csv

KP = KernelParams(lam=0.01, beta=1.0, delta=0.4)


def small_config(**overrides):
    base = dict(n=24, gamma=4, alpha=0.05, d_rate=5.0, t0=0.0, tf=2.0,
                dt=0.01, kernel=KP, seed=7)
    base.update(overrides)
    return SimConfig(**base)


def controlled_config(c_star=3, **overrides):
    cc = ControlConfig(target=0.8, nu=1.0, kappa=0.1, c_star=c_star, dt=0.01)
    return small_config(control=cc, **overrides)


# ---------------------------------------------------------------------------
# metrics


def test_consensus_metric_cases():
    assert consensus_metric(OpinionState(np.full(5, 0.8)), 0.8) == 0.0
    assert consensus_metric(OpinionState(np.array([0.8, 0.6])), 0.8) == \
        pytest.approx(0.04)
    rng = np.random.default_rng(0)
    w = rng.uniform(-1, 1, 10)
    direct = consensus_metric(OpinionState(w), 0.3)
    shuffled = consensus_metric(OpinionState(w[rng.permutation(10)]), 0.3)
    assert direct == pytest.approx(shuffled, abs=1e-15)
    with pytest.raises(ValueError):
        consensus_metric(OpinionState(np.array([0.5])), 0.0)


def test_controlled_fraction_cases():
    rng = np.random.default_rng(1)
    net = init_network(20, 4, "uniform_degree", rng)
    assert controlled_fraction(net, 0) == 1.0
    assert controlled_fraction(net, 5) == 0.0
    values = [controlled_fraction(net, c) for c in range(8)]
    assert all(b <= a for a, b in zip(values, values[1:]))


# ---------------------------------------------------------------------------
# the loop


def test_record_shape_and_times():
    record = run_simulation(small_config())
    assert record.times.size == 201
    assert record.times[0] == 0.0
    assert record.times[-1] == pytest.approx(2.0)
    assert record.opinions.shape == (201, 24)
    assert record.degrees.shape == (201, 24)
    assert record.control.shape == (201,)
    assert np.all(record.consensus >= 0.0)
    assert record.control[0] == 0.0


def test_bit_exact_determinism():
    cfg = controlled_config()
    a = run_simulation(cfg)
    b = run_simulation(cfg)
    assert np.array_equal(a.opinions, b.opinions)
    assert np.array_equal(a.degrees, b.degrees)
    assert np.array_equal(a.control, b.control)


def test_consensus_initial_state_is_stationary():
    cfg = small_config(init_opinion=np.full(24, 0.3))
    record = run_simulation(cfg)
    assert np.all(record.opinions == 0.3)
    per_step = np.abs(np.diff(record.opinions, axis=0)).max()
    assert per_step < 1e-14


def test_uncontrolled_extremes_are_monotone():
    for seed in (3, 11, 42):
        record = run_simulation(small_config(seed=seed))
        maxima = record.opinions.max(axis=1)
        minima = record.opinions.min(axis=1)
        assert np.all(np.diff(maxima) <= 1e-15)
        assert np.all(np.diff(minima) >= -1e-15)


def test_opinions_stay_in_model_interval():
    record = run_simulation(controlled_config(c_star=0, seed=5))
    assert record.opinions.max() <= 1.0
    assert record.opinions.min() >= -1.0


def test_vanishing_control_bound_recovers_free_dynamics():
    cc = ControlConfig(target=0.8, nu=1.0, kappa=1e-8, c_star=0, dt=0.01)
    controlled = run_simulation(small_config(control=cc, seed=13))
    free = run_simulation(small_config(seed=13))
    assert np.abs(controlled.opinions - free.opinions).max() < 1e-5


def test_uncontrollable_steps_flagged():
    record = run_simulation(controlled_config(c_star=99, seed=5))
    assert record.uncontrollable[1:].all()
    assert np.all(record.control == 0.0)


def test_explicit_initial_opinions_and_validation():
    w0 = np.linspace(-1, 1, 24)
    record = run_simulation(small_config(init_opinion=w0))
    assert np.allclose(record.opinions[0], w0)
    with pytest.raises(ValueError):
        run_simulation(small_config(init_opinion=np.full(24, 1.5)))
    with pytest.raises(ValueError):
        run_simulation(small_config(init_opinion=np.zeros(7)))


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(tf=-1.0)
    with pytest.raises(ValueError):
        small_config(dt=0.013)  # does not divide tf - t0
    with pytest.raises(ValueError):
        controlled_config(dt=0.02)  # control.dt mismatch
    with pytest.raises(ValueError):
        small_config(scheme="heun")
    with pytest.raises(ValueError):
        small_config(snapshot_times=(5.0,))  # outside [t0, tf]


def test_snapshots_recorded_with_opinions():
    cfg = small_config(snapshot_times=(0.0, 1.0, 2.0))
    record = run_simulation(cfg)
    assert len(record.snapshots) == 3
    assert [s["time"] for s in record.snapshots] == [0.0, 1.0, 2.0]
    assert "opinion" in record.snapshots[0]["nodes"][0]


def test_rk4_scheme_runs():
    record = run_simulation(controlled_config(scheme="rk4", seed=9))
    assert np.isfinite(record.opinions).all()


# ---------------------------------------------------------------------------
# sweep


def test_sweep_shares_network_trajectory():
    cfg = controlled_config(seed=21)
    rows = sweep_c_star(cfg, [2, 4, 6])
    assert [r.c_star for r in rows] == [2, 4, 6]
    assert np.array_equal(rows[0].record.degrees, rows[2].record.degrees)
    assert np.allclose(rows[0].record.opinions[0], rows[1].record.opinions[0])
    fractions = [r.final_controlled_fraction for r in rows]
    assert all(b <= a for a, b in zip(fractions, fractions[1:]))


def test_sweep_duplicate_thresholds_identical():
    cfg = controlled_config(seed=22)
    rows = sweep_c_star(cfg, [3, 3])
    assert rows[0].final_consensus == rows[1].final_consensus
    assert np.array_equal(rows[0].record.control, rows[1].record.control)


def test_sweep_requires_control():
    with pytest.raises(ValueError):
        sweep_c_star(small_config(), [1, 2])


# ---------------------------------------------------------------------------
# ensembles and export


def test_ensemble_marginals_match_initial_condition():
    params = RewireParams(0.05, 1.0)
    dists = ensemble_degree_marginals(20, 4, "uniform_degree", params,
                                      [0.0, 5.0], 25, seed=3)
    assert dists[0].probs[4] == 1.0  # exact point mass at start
    for dist in dists:
        assert dist.mean_degree == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(ValueError):
        ensemble_degree_marginals(20, 4, "uniform_degree", params,
                                  [5.0, 1.0], 4, seed=0)


def test_trajectory_csv_round_trip(tmp_path):
    record = run_simulation(controlled_config(seed=30))
    path = tmp_path / "trajectory.csv"
    write_trajectory_csv(record, path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["t", "u", "V", "controlled_fraction"]
    assert header[4] == "w_1" and header[-1] == "w_24"
    assert len(lines) == record.times.size + 1
    first = [float(x) for x in lines[1].split(",")]
    assert first[0] == record.times[0]
    assert np.allclose(first[4:], record.opinions[0])


def test_trajectory_dict_is_json_ready():
    import json

    record = run_simulation(small_config(snapshot_times=(1.0,)))
    payload = trajectory_to_dict(record)
    text = json.dumps(payload)
    assert json.loads(text)["times"][0] == 0.0
