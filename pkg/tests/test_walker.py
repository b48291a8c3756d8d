import math

import numpy as np
import pytest

from manhattan_rw.lattice import ModelSpec, OrientationOracle
from manhattan_rw.walker import (EventCapExceeded, cesaro_average, drift_correlation, estimate_laplace,
                                 estimate_msd, log_time_grid, martingale_diagnostic,
                                 msd_from_laplace_consistency, path_seeds, simulate_path, simulate_paths)


def test_log_time_grid():
    g = log_time_grid(100.0, 0.1, 10)
    assert g[0] == 0.0 and g[1] == pytest.approx(0.1) and g[-1] == pytest.approx(100.0)
    assert np.all(np.diff(g) > 0)
    assert log_time_grid(1.0, include_zero=False)[0] > 0
    with pytest.raises(ValueError):
        log_time_grid(1.0, 2.0)


def test_path_seeds_independent_of_scheduling():
    es, ps = path_seeds(99, 15)
    es2, ps2 = path_seeds(99, 10, start=5)
    np.testing.assert_array_equal(ps[5:], ps2)
    np.testing.assert_array_equal(es[5:], es2)
    qe, _ = path_seeds(99, 5, quenched=True)
    assert len(set(qe.tolist())) == 1


def test_d1_poisson_oracle():
    # d = 1: the walker runs along its line at rate 1, so |X_t| is Poisson(t)
    est = estimate_msd(ModelSpec(1), 20_000, [1.0, 10.0], master_seed=1)
    exact = est.times**2 + est.times
    assert np.all(np.abs(est.mean_sq - exact) < 4 * est.std_err)


def test_d1_laplace_oracle():
    est = estimate_laplace(ModelSpec(1), 20_000, [1.0, 0.5], master_seed=2)
    exact = 2 / est.lambdas**3 + 1 / est.lambdas**2
    assert np.all(np.abs(est.values - exact) < 4 * est.std_err)


def test_cesaro_of_exact_curve():
    t = np.linspace(0, 10, 2001)
    c = cesaro_average(t, t**2 + t)
    assert c[-1] == pytest.approx(100 / 3 + 5, rel=1e-6)
    assert c[0] == 0.0


def test_msd_laplace_trapezoid_consistency():
    est = estimate_msd(ModelSpec(1), 4000, np.linspace(0, 40, 801), master_seed=3)
    val, err = msd_from_laplace_consistency(est, 1.0)
    assert abs(val - 3.0) < 4 * err + 1e-3


def test_event_cap():
    with pytest.raises(EventCapExceeded):
        estimate_msd(ModelSpec(2), 10, [50.0], event_cap=5)
    with pytest.raises(EventCapExceeded):
        estimate_laplace(ModelSpec(2), 10, [0.1], event_cap=5)


def test_single_path_matches_ensemble_member():
    spec = ModelSpec(2, master_seed=8)
    times = log_time_grid(50.0, 0.1, 8)
    ens = simulate_paths(spec, 6, times)
    k = 4
    oracle = OrientationOracle(spec.with_seed(int(ens.env_seeds[k])))
    one = simulate_path(oracle, spec, int(ens.path_seeds[k]), times)
    np.testing.assert_array_equal(one.positions, ens.positions[k])
    assert ens.observers()[k].env_seed == int(ens.env_seeds[k])


@pytest.mark.parametrize("spec", [ModelSpec(2, master_seed=5), ModelSpec(3, {1, 3}, master_seed=6)])
def test_steps_follow_orientations(spec):
    times = np.arange(0, 20, 1e-3)
    ens = simulate_paths(spec, 8, times)
    for k in range(len(ens)):
        oracle = OrientationOracle(spec.with_seed(int(ens.env_seeds[k])))
        pos, ev = ens.positions[k], ens.event_counts[k]
        single = np.flatnonzero(np.diff(ev) == 1)
        assert single.size > 0
        for i in single:
            step = pos[i + 1] - pos[i]
            axis = int(np.flatnonzero(step)[0]) + 1
            assert np.abs(step).sum() == 1
            if spec.is_oriented(axis):
                assert step[axis - 1] == oracle.at(axis, pos[i])


def test_quenched_shares_environment():
    spec = ModelSpec(2, master_seed=4)
    ens = simulate_paths(spec, 5, [1.0], quenched=True)
    assert len(set(ens.env_seeds.tolist())) == 1
    assert len(set(ens.path_seeds.tolist())) == 5


def test_martingale_d2():
    ens = simulate_paths(ModelSpec(2, master_seed=10), 4000, log_time_grid(100.0, 1.0, 6,
                                                                          include_zero=False))
    diag = martingale_diagnostic(ens, (10.0, 100.0))
    assert np.all(np.abs(diag.mart_mean) < 4 * diag.mart_std_err)
    assert diag.rate == pytest.approx(1.0, abs=0.1)
    # list-of-observers input gives the same statistics
    again = martingale_diagnostic(ens.observers()[:50])
    assert again.times.size == ens.sample_times.size


def test_martingale_needs_oriented_first_axis():
    ens = simulate_paths(ModelSpec(2, {2}), 4, [1.0])
    with pytest.raises(ValueError):
        martingale_diagnostic(ens)


def test_drift_correlation_small():
    c = drift_correlation(ModelSpec(2, master_seed=1, period=3), 2000, [0.0, 1.0])
    assert c.value[0] == 1.0 and c.std_err[0] == 0.0
    assert 0.2 < c.value[1] < 0.7


def test_summary_and_csv():
    est = estimate_msd(ModelSpec(2), 8, [1.0, 2.0], master_seed=3)
    lines = est.to_csv().splitlines()
    assert lines[0] == "t,value,std_err,n_paths,cesaro"
    assert len(lines) == 3
    assert est.summary()["n_paths"] == 8
    lap = estimate_laplace(ModelSpec(2), 8, [1.0], master_seed=3)
    assert lap.to_csv().splitlines()[0] == "lambda,value,std_err,n_paths,truncation_time"
    assert math.isclose(float(lap.to_csv().splitlines()[1].split(",")[4]), 40.0)
