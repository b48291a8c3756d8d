import math

import numpy as np
import pytest

from manhattan_rw.bounds import upper_bound
from manhattan_rw.lattice import ModelSpec
from manhattan_rw.torus import (StateSpaceTooLarge, TwoLineFunction, build_torus, check_S_on_two_line,
                                correlation_curve, drift_variance_curve, identity_suite,
                                laplace_of_drift_variance, lemma_report, orbit_limit,
                                resolvent_quadratic, resolvent_quadratic_spectral, stationary_test_function,
                                variational_report, variational_value)
from manhattan_rw.walker import drift_correlation

CASES = [(2, 3, None), (2, 4, None), (3, 2, None), (3, 2, {1, 2})]


@pytest.fixture(scope="module")
def t23():
    return build_torus(2, 3)


@pytest.mark.parametrize("d,L,axes", CASES)
def test_identity_suite(d, L, axes):
    rep = identity_suite(build_torus(d, L, axes), n_random=5, rng=np.random.default_rng(d * L))
    bad = [(c.name, c.residual) for c in rep.checks if not c.passed]
    assert rep.passed, bad


def test_state_space(t23):
    assert t23.m == 6 and t23.n_states == 64
    assert build_torus(3, 2, {1, 2}).n_states == 2**8
    with pytest.raises(StateSpaceTooLarge):
        build_torus(3, 3)
    with pytest.raises(ValueError):
        build_torus(2, 1)


def test_degenerate_L2_warns_and_A_vanishes():
    with pytest.warns(UserWarning, match="L=2"):
        tp = build_torus(2, 2)
    assert tp.degenerate
    assert abs(tp.A).max() == 0.0


def test_dirichlet_form_of_delta(t23):
    # u = delta_0: psi = w(1,0); S psi = (w(1,e2) + w(1,-e2) - 2 w(1,0)) / 2
    u = np.zeros(t23.u_shape(1))
    u.flat[0] = 1.0
    psi = t23.linear_observable(u)
    assert t23.inner(psi, psi) == pytest.approx(1.0)
    assert t23.inner(psi, t23.apply("S", psi)) == pytest.approx(-1.0, abs=1e-14)


def test_lemma_report_many_profiles(t23):
    rng = np.random.default_rng(5)
    for _ in range(20):
        rep = lemma_report(t23, rng.standard_normal(t23.u_shape(1)), lam=0.3)
        assert rep.passed, rep.to_dict()


def test_two_line_on_mixed_model():
    tp = build_torus(3, 2, {1, 2})
    rep = check_S_on_two_line(tp, TwoLineFunction(1, 2, np.arange(16.0)), lam=0.5)
    assert rep.passed
    with pytest.raises(ValueError):
        check_S_on_two_line(tp, TwoLineFunction(1, 3, np.zeros(16)))


@pytest.mark.parametrize("lam", [0.1, 1.0])
def test_variational_formula(t23, lam):
    phi = t23.phi.values
    target = resolvent_quadratic(t23, phi, lam)
    rng = np.random.default_rng(11)
    for _ in range(50):
        assert variational_value(t23, rng.standard_normal(t23.n_states), phi, lam) <= target + 1e-10
    best = stationary_test_function(t23, phi, lam)
    assert variational_value(t23, best, phi, lam) == pytest.approx(target, abs=1e-8)
    assert variational_report(t23, (lam,), 10).passed


def test_resolvent_oracles_and_ordering(t23):
    phi = t23.phi
    for lam in (0.05, 1.0, 20.0):
        g = resolvent_quadratic(t23, phi, lam)
        assert g == pytest.approx(resolvent_quadratic_spectral(t23, phi, lam), rel=1e-10)
        assert 0 < g <= resolvent_quadratic(t23, phi, lam, "S") + 1e-14
    assert 1e6 * resolvent_quadratic(t23, phi, 1e6) == pytest.approx(1.0, rel=1e-5)


def test_symmetric_part_matches_lattice_sum():
    # finite-L torus mean of 1/(lam + dhat/2) at L=3 against a direct sum
    tp = build_torus(2, 3)
    p = 2 * np.pi * np.arange(3) / 3
    exact = np.mean(1.0 / (0.4 + 0.5 * 4 * np.sin(p / 2) ** 2))
    assert resolvent_quadratic(tp, tp.phi, 0.4, "S") == pytest.approx(exact, rel=1e-12)
    # and the infinite-lattice value is the rescaled one-line bound integral
    assert 2 * upper_bound(2, 0.8).value == pytest.approx(
        1 / math.sqrt(0.4 * (0.4 + 2)), rel=1e-12)


def test_correlation_curve_limits(t23):
    c = correlation_curve(t23, t23.phi, [0.0, 200.0])
    assert c[0] == pytest.approx(1.0)
    # translations preserve the orbit: the limit is the orbit-average variance, not zero
    assert c[1] == pytest.approx(orbit_limit(t23), abs=1e-8)
    assert orbit_limit(t23) == pytest.approx(1 / 3)


def test_drift_variance_methods_agree(t23):
    t = [0.5, 3.0, 8.0]
    a = drift_variance_curve(t23, t)
    b = drift_variance_curve(t23, t, method="quadrature")
    np.testing.assert_allclose(a, b, rtol=1e-10)
    # short times: E_G(t) ~ t^2 since the drift starts fully correlated
    assert drift_variance_curve(t23, [1e-4])[0] == pytest.approx(1e-8, rel=1e-3)


def test_laplace_of_drift_variance(t23):
    lt = laplace_of_drift_variance(t23, 1.0)
    assert lt == pytest.approx(2 * resolvent_quadratic(t23, t23.phi, 1.0), rel=1e-6)


def test_mc_correlation_matches_exact(t23):
    times = [0.5, 2.0]
    mc = drift_correlation(ModelSpec(2, master_seed=3, period=3), 20_000, times)
    ex = correlation_curve(t23, t23.phi, times)
    assert np.all(np.abs(mc.value - ex) < 4 * mc.std_err)


def test_export_triplets(tmp_path, t23):
    path = tmp_path / "g.txt"
    t23.export_triplets("G", path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# G 64x64")
    total = sum(float(l.split()[2]) for l in lines[1:])
    assert total == pytest.approx(0.0, abs=1e-12)  # rows sum to zero


def test_antisymmetric_form_nonnegative(t23):
    rng = np.random.default_rng(3)
    for lam in (0.1, 1.0):
        for _ in range(10):
            af = t23.apply("A", rng.standard_normal(t23.n_states))
            assert t23.inner(af, t23.solve_resolvent("S", lam, af)) >= 0
