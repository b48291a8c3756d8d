"""Continuous-time walk on the oriented lattice and its ensemble estimators.

The walk jumps at total rate ``d``; at each jump an axis is picked uniformly.
On an oriented axis the walker follows the line direction, on a free axis it
steps +-1 with equal probability.  Estimators are annealed by default: path
``k`` runs in a fresh environment whose seed is derived from the master seed
and ``k`` alone, so the output does not depend on how paths are scheduled.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from ._accel import backend_name, use_numba
from .lattice import (ENV_SALT, ModelSpec, OrientationOracle, derive_env_seed, derive_path_seed,
                      hash_orientation_array, mix64)

DEFAULT_EVENT_CAP = 10**8
TRUNCATION_FACTOR = 40.0
CHUNK_PATHS = 4096


class EventCapExceeded(RuntimeError):
    """A path needed more jumps than the configured cap."""


def log_time_grid(t_max: float, t_min: float = 0.1, per_decade: int = 32,
                  include_zero: bool = True) -> np.ndarray:
    """Log-spaced sample times from ``t_min`` to ``t_max`` (both included)."""
    if not 0 < t_min <= t_max:
        raise ValueError("need 0 < t_min <= t_max")
    n = max(2, int(round(per_decade * math.log10(t_max / t_min))) + 1)
    grid = np.geomspace(t_min, t_max, n)
    return np.concatenate([[0.0], grid]) if include_zero else grid


def _check_times(sample_times) -> np.ndarray:
    times = np.asarray(sample_times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("sample_times must be a non-empty 1-d sequence")
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ValueError("sample_times must be nonnegative and strictly increasing")
    return times


def path_seeds(master_seed: int, n_paths: int, start: int = 0,
               quenched: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """(environment seeds, path seeds) for paths ``start .. start+n_paths-1``."""
    ps = np.array([derive_path_seed(master_seed, k) for k in range(start, start + n_paths)],
                  dtype=np.uint64)
    if quenched:
        es = np.full(n_paths, mix64(master_seed ^ ENV_SALT), dtype=np.uint64)
    else:
        es = np.array([derive_env_seed(int(s)) for s in ps], dtype=np.uint64)
    return es, ps


@dataclass
class PathObserver:
    """One path sampled at fixed times.

    ``drift_integral`` is the running integral of the axis-1 orientation at
    the walker's position (zero when axis 1 is free), so that
    ``positions[:, 0] - drift_integral`` is the martingale part of the first
    coordinate.
    """

    sample_times: np.ndarray
    positions: np.ndarray
    drift_integral: np.ndarray
    event_counts: np.ndarray
    path_seed: int
    env_seed: int = 0

    @property
    def martingale(self) -> np.ndarray:
        return self.positions[:, 0] - self.drift_integral


@dataclass
class PathEnsemble:
    """Many paths on a shared grid, stored as arrays (path, time[, coord])."""

    spec: ModelSpec
    sample_times: np.ndarray
    positions: np.ndarray
    drift_integral: np.ndarray
    event_counts: np.ndarray
    path_seeds: np.ndarray
    env_seeds: np.ndarray

    def __len__(self):
        return self.positions.shape[0]

    def observers(self) -> list:
        return [
            PathObserver(self.sample_times, self.positions[k], self.drift_integral[k],
                         self.event_counts[k], int(self.path_seeds[k]), int(self.env_seeds[k]))
            for k in range(len(self))
        ]


def _run_samples(spec: ModelSpec, env_seeds, p_seeds, times, event_cap):
    n, nt, d = env_seeds.size, times.size, spec.d
    pos = np.zeros((n, nt, d), dtype=np.int64)
    drift = np.zeros((n, nt))
    events = np.zeros((n, nt), dtype=np.int64)
    status = np.zeros(n, dtype=np.int8)
    _kernels.walk_samples(use_numba(), d, spec.oriented_mask(), spec.period, env_seeds, p_seeds,
                          times, int(event_cap), pos, drift, events, status)
    bad = np.flatnonzero(status == _kernels.STATUS_CAP)
    if bad.size:
        raise EventCapExceeded(f"{bad.size} path(s) exceeded the event cap of {event_cap}")
    return pos, drift, events


def simulate_path(oracle: OrientationOracle, spec: ModelSpec, path_seed: int,
                  sample_times: Sequence[float], event_cap: int = DEFAULT_EVENT_CAP) -> PathObserver:
    """Run one path in the environment of ``oracle`` and sample it at ``sample_times``."""
    times = _check_times(sample_times)
    env = np.array([oracle.spec.master_seed], dtype=np.uint64)
    ps = np.array([path_seed], dtype=np.uint64)
    spec = oracle.spec if spec is None else spec
    pos, drift, events = _run_samples(spec, env, ps, times, event_cap)
    return PathObserver(times, pos[0], drift[0], events[0], int(path_seed), int(env[0]))


def simulate_paths(spec: ModelSpec, n_paths: int, sample_times: Sequence[float],
                   master_seed: int | None = None, quenched: bool = False,
                   event_cap: int = DEFAULT_EVENT_CAP) -> PathEnsemble:
    times = _check_times(sample_times)
    seed = spec.master_seed if master_seed is None else master_seed
    es, ps = path_seeds(seed, n_paths, quenched=quenched)
    pos, drift, events = _run_samples(spec, es, ps, times, event_cap)
    return PathEnsemble(spec, times, pos, drift, events, ps, es)


@dataclass
class MsdEstimate:
    """Ensemble mean-square displacement on a time grid."""

    times: np.ndarray
    mean_sq: np.ndarray
    std_err: np.ndarray
    n_paths: int
    cesaro: np.ndarray
    coord_mean_sq: np.ndarray = field(repr=False, default=None)
    coord_std_err: np.ndarray = field(repr=False, default=None)
    mean_pos: np.ndarray = field(repr=False, default=None)
    mean_pos_err: np.ndarray = field(repr=False, default=None)
    spec: ModelSpec | None = None
    master_seed: int = 0
    quenched: bool = False

    def to_csv(self) -> str:
        rows = [(t, v, e, self.n_paths, c)
                for t, v, e, c in zip(self.times, self.mean_sq, self.std_err, self.cesaro)]
        return _csv(["t", "value", "std_err", "n_paths", "cesaro"], rows)

    def summary(self) -> dict:
        return {
            "estimator": "msd",
            "model": self.spec.to_dict() if self.spec else None,
            "master_seed": self.master_seed,
            "quenched": self.quenched,
            "n_paths": self.n_paths,
            "n_times": int(self.times.size),
            "t_range": [float(self.times[0]), float(self.times[-1])],
        }


@dataclass
class LaplaceEstimate:
    lambdas: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    truncation_time: np.ndarray
    n_paths: int
    spec: ModelSpec | None = None
    master_seed: int = 0
    quenched: bool = False

    def to_csv(self) -> str:
        rows = [(l, v, e, self.n_paths, T)
                for l, v, e, T in zip(self.lambdas, self.values, self.std_err, self.truncation_time)]
        return _csv(["lambda", "value", "std_err", "n_paths", "truncation_time"], rows)

    def summary(self) -> dict:
        return {
            "estimator": "laplace",
            "model": self.spec.to_dict() if self.spec else None,
            "master_seed": self.master_seed,
            "quenched": self.quenched,
            "n_paths": self.n_paths,
            "lambdas": [float(x) for x in self.lambdas],
        }


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def cesaro_average(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """``t^-1 * int_0^t E(s) ds`` by the trapezoid rule, anchored at E(0) = 0."""
    if times[0] > 0:
        t = np.concatenate([[0.0], times])
        v = np.concatenate([[0.0], values])
    else:
        t, v = times, values
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = integral[pos] / t[pos]
    return out[-times.size:]


class _Moments:
    """Fixed-order running sums over path chunks."""

    def __init__(self, shape):
        self.n = 0
        self.s1 = np.zeros(shape)
        self.s2 = np.zeros(shape)

    def add(self, x: np.ndarray):
        self.n += x.shape[0]
        self.s1 += x.sum(axis=0)
        self.s2 += (x * x).sum(axis=0)

    def mean_err(self):
        mean = self.s1 / self.n
        var = np.maximum(self.s2 / self.n - mean * mean, 0.0) * self.n / (self.n - 1)
        return mean, np.sqrt(var / self.n)


def estimate_msd(spec: ModelSpec, n_paths: int, sample_times: Sequence[float],
                 master_seed: int | None = None, quenched: bool = False,
                 event_cap: int = DEFAULT_EVENT_CAP) -> MsdEstimate:
    """Monte Carlo estimate of ``E|X_t|^2`` with standard errors and Cesaro average."""
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    times = _check_times(sample_times)
    seed = spec.master_seed if master_seed is None else master_seed
    nt, d = times.size, spec.d
    r2_m, coord_m, pos_m = _Moments(nt), _Moments((nt, d)), _Moments((nt, d))
    for start in range(0, n_paths, CHUNK_PATHS):
        m = min(CHUNK_PATHS, n_paths - start)
        es, ps = path_seeds(seed, m, start, quenched)
        pos, _, _ = _run_samples(spec, es, ps, times, event_cap)
        posf = pos.astype(np.float64)
        sq = posf * posf
        r2_m.add(sq.sum(axis=2))
        coord_m.add(sq)
        pos_m.add(posf)
    mean_sq, err = r2_m.mean_err()
    cmean, cerr = coord_m.mean_err()
    pmean, perr = pos_m.mean_err()
    return MsdEstimate(times, mean_sq, err, n_paths, cesaro_average(times, mean_sq),
                       cmean, cerr, pmean, perr, spec, seed, quenched)


def estimate_laplace(spec: ModelSpec, n_paths: int, lambdas: Sequence[float],
                     master_seed: int | None = None, quenched: bool = False,
                     truncation_factor: float = TRUNCATION_FACTOR,
                     event_cap: int = DEFAULT_EVENT_CAP) -> LaplaceEstimate:
    """Monte Carlo estimate of ``int_0^inf exp(-lambda t) E|X_t|^2 dt``.

    Each path's integral is exact up to the horizon ``truncation_factor /
    lambda`` because ``|X_t|^2`` is piecewise constant between jumps.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    lams = np.asarray(lambdas, dtype=np.float64)
    if lams.ndim != 1 or lams.size == 0 or np.any(lams <= 0):
        raise ValueError("lambdas must be positive")
    horizons = truncation_factor / lams
    seed = spec.master_seed if master_seed is None else master_seed
    mom = _Moments(lams.size)
    for start in range(0, n_paths, CHUNK_PATHS):
        m = min(CHUNK_PATHS, n_paths - start)
        es, ps = path_seeds(seed, m, start, quenched)
        acc = np.zeros((m, lams.size))
        status = np.zeros(m, dtype=np.int8)
        _kernels.walk_laplace(use_numba(), spec.d, spec.oriented_mask(), spec.period, es, ps,
                              lams, horizons, int(event_cap), acc, status)
        if np.any(status == _kernels.STATUS_CAP):
            raise EventCapExceeded(f"path(s) exceeded the event cap of {event_cap}")
        mom.add(acc)
    values, err = mom.mean_err()
    return LaplaceEstimate(lams, values, err, horizons, n_paths, spec, seed, quenched)


@dataclass
class CorrelationEstimate:
    """Monte Carlo estimate of ``E[w(1,0) w(1,X_t)]`` on a periodic environment."""

    times: np.ndarray
    value: np.ndarray
    std_err: np.ndarray
    n_paths: int


def drift_correlation(spec: ModelSpec, n_paths: int, sample_times: Sequence[float],
                      master_seed: int | None = None,
                      event_cap: int = DEFAULT_EVENT_CAP) -> CorrelationEstimate:
    """Correlation of the axis-1 orientation seen by the walker with its initial value.

    With ``spec.period = L`` this is the Monte Carlo counterpart of the exact
    torus correlation ``(phi, exp(tG) phi)``.
    """
    if not spec.is_oriented(1):
        raise ValueError("the drift observable needs an oriented first axis")
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    times = _check_times(sample_times)
    seed = spec.master_seed if master_seed is None else master_seed
    mom = _Moments(times.size)
    for start in range(0, n_paths, CHUNK_PATHS):
        m = min(CHUNK_PATHS, n_paths - start)
        es, ps = path_seeds(seed, m, start)
        pos, _, _ = _run_samples(spec, es, ps, times, event_cap)
        w0 = hash_orientation_array(es, 1, np.zeros((m, spec.d), dtype=np.int64), spec.period)
        base = pos.reshape(-1, spec.d).copy()
        base[:, 0] = 0
        wt = hash_orientation_array(np.repeat(es, times.size), 1, base, spec.period)
        mom.add((w0[:, None] * wt.reshape(m, times.size)).astype(np.float64))
    value, err = mom.mean_err()
    return CorrelationEstimate(times, value, err, n_paths)


@dataclass
class MartingaleDiagnostic:
    """Ensemble statistics of ``M_t = X^1_t - int_0^t phi(eta_s) ds``."""

    times: np.ndarray
    mart_mean: np.ndarray
    mart_std_err: np.ndarray
    mart_sq: np.ndarray
    rate: float
    fit_residual: float
    window: tuple


def martingale_diagnostic(paths, window: tuple | None = None) -> MartingaleDiagnostic:
    """Mean and second moment of the martingale part, with a fit ``E M_t^2 ~ c t``.

    ``paths`` is a :class:`PathEnsemble` or a list of :class:`PathObserver` on a
    common grid.  The fit is a least-squares line through the origin over
    ``window`` (all positive times by default); ``fit_residual`` is the largest
    relative deviation of the fit inside the window.
    """
    if isinstance(paths, PathEnsemble):
        if not paths.spec.is_oriented(1):
            raise ValueError("the drift observable needs an oriented first axis")
        times = paths.sample_times
        mart = paths.positions[:, :, 0] - paths.drift_integral
    else:
        paths = list(paths)
        if not paths:
            raise ValueError("no paths")
        times = paths[0].sample_times
        for p in paths[1:]:
            if p.sample_times.shape != times.shape or np.any(p.sample_times != times):
                raise ValueError("paths do not share a sample grid")
        mart = np.stack([p.martingale for p in paths])
    n = mart.shape[0]
    if n < 2:
        raise ValueError("need at least two paths")
    mean = mart.mean(axis=0)
    err = mart.std(axis=0, ddof=1) / math.sqrt(n)
    sq = (mart * mart).mean(axis=0)
    lo, hi = window if window is not None else (float(times[times > 0][0]), float(times[-1]))
    sel = (times >= lo) & (times <= hi) & (times > 0)
    if not sel.any():
        raise ValueError("empty fit window")
    tw, yw = times[sel], sq[sel]
    c = float(np.dot(tw, yw) / np.dot(tw, tw))
    resid = float(np.max(np.abs(c * tw - yw) / np.abs(yw)))
    return MartingaleDiagnostic(times, mean, err, sq, c, resid, (lo, hi))


def msd_from_laplace_consistency(msd: MsdEstimate, lam: float) -> tuple[float, float]:
    """``int exp(-lam t) E(t) dt`` from a sampled MSD curve (trapezoid), with an error bar.

    The tail beyond the last sample time is not included, so use it only where
    ``lam * t_max`` is large.
    """
    t, v, e = msd.times, msd.mean_sq, msd.std_err
    if t[0] > 0:
        t, v, e = np.r_[0.0, t], np.r_[0.0, v], np.r_[0.0, e]
    w = np.exp(-lam * t)
    dt = np.diff(t)
    weights = np.zeros_like(t)
    weights[:-1] += 0.5 * dt
    weights[1:] += 0.5 * dt
    val = float(np.sum(weights * w * v))
    # errors at neighbouring times are strongly correlated; bound by the sum
    err = float(np.sum(weights * w * e))
    return val, err


def write_estimate(est, csv_path, json_path=None) -> None:
    """Plain (non-atomic) writer; the CLI uses its own atomic writer."""
    with open(csv_path, "w", newline="") as fh:
        fh.write(est.to_csv())
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(est.summary() | {"backend": backend_name()}, fh, indent=2, sort_keys=True)
