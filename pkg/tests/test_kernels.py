"""The compiled and pure-numpy kernels consume identical random streams."""

import numpy as np
import pytest

from manhattan_rw import _kernels
from manhattan_rw._accel import HAVE_NUMBA
from manhattan_rw.lattice import ModelSpec
from manhattan_rw.walker import log_time_grid, path_seeds

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")

SPECS = [ModelSpec(1), ModelSpec(2), ModelSpec.mdm(2), ModelSpec(3, {1, 3}), ModelSpec(3, {2}),
         ModelSpec(2, period=3), ModelSpec(4)]


def _samples(use_numba, spec, n=64, seed=17):
    times = log_time_grid(200.0, 0.05, 8)
    es, ps = path_seeds(seed, n)
    pos = np.zeros((n, times.size, spec.d), dtype=np.int64)
    drift = np.zeros((n, times.size))
    ev = np.zeros((n, times.size), dtype=np.int64)
    st = np.zeros(n, dtype=np.int8)
    _kernels.walk_samples(use_numba, spec.d, spec.oriented_mask(), spec.period, es, ps, times,
                          10**7, pos, drift, ev, st)
    return pos, drift, ev, st


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.kind}-d{s.d}-p{s.period}")
def test_sample_kernels_agree(spec):
    a = _samples(True, spec)
    b = _samples(False, spec)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[2], b[2])
    np.testing.assert_array_equal(a[3], b[3])
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("spec", SPECS[:5], ids=lambda s: f"{s.kind}-d{s.d}")
def test_laplace_kernels_agree(spec):
    lams = np.array([1.0, 0.1, 0.02])
    hz = 40.0 / lams
    es, ps = path_seeds(3, 32)
    out = []
    for flag in (True, False):
        acc = np.zeros((32, lams.size))
        st = np.zeros(32, dtype=np.int8)
        _kernels.walk_laplace(flag, spec.d, spec.oriented_mask(), spec.period, es, ps, lams, hz,
                              10**7, acc, st)
        out.append(acc)
    np.testing.assert_allclose(out[0], out[1], rtol=1e-11)


def test_event_cap_status_both_backends():
    spec = ModelSpec(2)
    for flag in (True, False):
        times = np.array([100.0])
        es, ps = path_seeds(1, 4)
        pos = np.zeros((4, 1, 2), dtype=np.int64)
        st = np.zeros(4, dtype=np.int8)
        _kernels.walk_samples(flag, 2, spec.oriented_mask(), 0, es, ps, times, 10, pos,
                              np.zeros((4, 1)), np.zeros((4, 1), dtype=np.int64), st)
        assert np.all(st == _kernels.STATUS_CAP)
