"""Fourier-domain bound integrals on the torus and their small-lambda growth laws.

All integrals are normalised torus means ``(2 pi)^-n int_{T^n} ... dp``.  The
integrands depend on the first coordinate not at all (test functions live on
lines of axis 1), so every integral is evaluated over the remaining
coordinates only.

Catalogue
---------
upper_S9       mean of ``1 / (lam + dhat(p^(1)))``, the one-line upper bound.
lower_d2       value of the optimal-profile lower bound for d = 2.
lower_d3       the same for d = 3 (two log-weighted penalty terms).
lower_mdm12    d = 3 with axes 1, 2 oriented and axis 3 free (one penalty term).
lemma_D2/D3    the auxiliary integrals whose ratios define the penalty constants.

Normalisation.  The bound integrals carry the full symbol ``dhat`` in the
one-line terms.  The symmetric part ``S`` of the environment generator (rate
1/2 per direction, see :mod:`manhattan_rw.torus`) has symbol ``-dhat / 2`` on
one-line functions, so ``(phi, (lam - S)^-1 phi) = 2 * upper_S9(2 lam)``; see
:func:`symmetric_resolvent`.  Growth exponents are unaffected by the rescaling.
"""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass, asdict

import numpy as np
import scipy.special

from .quadrature import (QuadratureResult, composite_gauss_legendre, graded_rule,
                         refined_torus_mean, torus_mean)

CATALOGUE = ("upper_S9", "lower_d2", "lower_d3", "lower_mdm12", "lemma_D2", "lemma_D3")
D3_LAMBDA_MAX = 1.0 / 3.0


def dhat(p) -> np.ndarray:
    """Lattice Laplacian symbol ``sum_j 4 sin^2(p_j / 2)`` over the last axis."""
    p = np.asarray(p, dtype=np.float64)
    return np.sum(4.0 * np.sin(p / 2) ** 2, axis=-1)


def punctured(p, j: int) -> np.ndarray:
    """``p`` with its ``j``-th (1-based) coordinate replaced by 0."""
    p = np.array(p, dtype=np.float64, copy=True)
    p[..., j - 1] = 0.0
    return p


def line_mean(a) -> np.ndarray:
    """``(2 pi)^-1 int dt / (a + 4 sin^2(t/2)) = 1 / sqrt(a (a + 4))`` for ``a > 0``."""
    a = np.asarray(a, dtype=np.float64)
    return 1.0 / np.sqrt(a * (a + 4.0))


def _s2(x):
    return 4.0 * np.sin(x / 2) ** 2


def _check_lam(lam: float, upper: float | None = None):
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if upper is not None and lam > upper:
        raise ValueError(f"lambda must be <= {upper:.6g} for this integral")


# ----------------------------------------------------------------------------- upper bound

def upper_bound(d: int, lam: float, method: str = "reduced", nodes: int = 12) -> QuadratureResult:
    """``(2 pi)^-d int 1 / (lam + dhat(p^(1))) dp``.

    ``method``:
      reduced  integrate the last coordinate in closed form (:func:`line_mean`)
               and the other ``d - 2`` by graded quadrature; for ``d >= 5`` the
               separable time representation below is used instead.
      full     graded tensor quadrature over all ``d - 1`` coordinates (d <= 4).
      time     ``int_0^inf exp(-lam t) (e^{-2t} I_0(2t))^(d-1) dt``.
    """
    _check_lam(lam)
    if not 2 <= d <= 6:
        raise ValueError("upper_bound supports 2 <= d <= 6")
    n = d - 1
    scale = 0.25 * math.sqrt(lam)
    if method == "time" or (method == "reduced" and n > 3):
        return _upper_time(n, lam)
    if method == "reduced":
        if n == 1:
            return QuadratureResult(float(line_mean(lam)), 0.0, 0, lam, "upper_S9")

        def f(*xs):
            return line_mean(lam + sum(_s2(x) for x in xs))

        return refined_torus_mean(f, n - 1, scale, nodes, lam, "upper_S9")
    if method == "full":
        if n > 3:
            raise ValueError("full tensor quadrature is limited to d <= 4")

        def f(*xs):
            return 1.0 / (lam + sum(_s2(x) for x in xs))

        return refined_torus_mean(f, n, scale, nodes, lam, "upper_S9")
    raise ValueError(f"unknown method {method!r}")


def symmetric_resolvent(d: int, lam: float) -> float:
    """``(phi, (lam - S)^-1 phi)`` on ``Z^d``: mean of ``1 / (lam + dhat(p^(1)) / 2)``."""
    return 2.0 * upper_bound(d, 2.0 * lam).value


def _upper_time(n: int, lam: float, panel: float = 0.5, nodes: int = 16) -> QuadratureResult:
    """Separable form: the torus mean of ``exp(-t dhat)`` factorises into Bessel terms."""

    def integral(panel_width):
        s_lo, s_hi = math.log(1e-12), math.log(60.0 / lam)
        s, w = composite_gauss_legendre(s_lo, s_hi, math.ceil((s_hi - s_lo) / panel_width), nodes)
        t = np.exp(s)
        vals = np.exp(-lam * t) * scipy.special.i0e(2 * t) ** n * t
        return float(np.sum(w * vals)) + 1e-12  # [0, 1e-12] contributes ~1e-12

    fine, coarse = integral(panel / 2), integral(panel)
    return QuadratureResult(fine, max(abs(fine - coarse), 1e-14 * fine), 0, lam, "upper_S9")


# ----------------------------------------------------------------------------- lemma constants

def lemma_D2_integral(lam, q) -> np.ndarray:
    """``(2 pi)^-2 int (lam + dhat(q^(2) + p^(1)) / 2)^-1 dp`` for d = 2, by quadrature.

    Only ``q_1`` enters; broadcasts over ``lam`` and ``q``.
    """
    lam = np.asarray(lam, dtype=np.float64)[..., None]
    a = lam + 0.5 * _s2(np.asarray(q, dtype=np.float64))[..., None]
    x, w = graded_rule(0.25 * math.sqrt(float(np.min(lam))))
    return np.sum(w / (a + 0.5 * _s2(x)), axis=-1) / math.pi


def lemma_D3_integral(lam, p2) -> np.ndarray:
    """``(2 pi)^-3 int (lam + dhat(q^(2) + p^(1)) / 2)^-1 dq`` for d = 3.

    Depends on ``p_2`` only.  The ``q_3`` integral is done in closed form with
    :func:`line_mean` (scaled by 1/2), the ``q_1`` integral by quadrature.
    """
    lam = np.asarray(lam, dtype=np.float64)[..., None]
    b = lam + 0.5 * _s2(np.asarray(p2, dtype=np.float64))[..., None]
    x, w = graded_rule(0.25 * math.sqrt(float(np.min(lam))))
    c = b + 0.5 * _s2(x)
    # (2 pi)^-1 int dt / (c + 2 sin^2(t/2)) = 2 * line_mean(2c)
    return np.sum(w * 2.0 * line_mean(2.0 * c), axis=-1) / math.pi


def _lambda_grid(lo: float, hi: float, per_decade: int = 9) -> np.ndarray:
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.geomspace(lo, hi, n)


def _p_grid(n: int) -> np.ndarray:
    # uniform on [0, pi] plus geometric points towards 0
    return np.unique(np.concatenate([np.linspace(0, math.pi, n), np.geomspace(1e-6, 1.0, n)]))


def constant_ratio(name: str, lam, p) -> np.ndarray:
    """Ratio of the lemma integral to its claimed bound at ``(lam, p)``."""
    lam = np.asarray(lam, dtype=np.float64)
    if name == "lemma_D2":
        return np.sqrt(lam) * lemma_D2_integral(lam, p)
    if name == "lemma_D3":
        denom = np.abs(np.log(lam + 0.5 * np.sin(np.asarray(p) / 2) ** 2))
        return lemma_D3_integral(lam, p) / denom
    raise ValueError(f"no constant for {name!r}")


def estimate_constant(name: str, per_decade: int = 9, n_p: int = 33, safety: float = 1.1) -> float:
    """1.1 times the grid supremum of the lemma ratio.

    lemma_D2: ``lam^(1/2)`` times the D2 integral over ``lam in [1e-10, 1]``.
    lemma_D3: D3 integral over ``|log(lam + sin^2(p_2/2)/2)|``, ``lam in [1e-10, 1/3]``.
    """
    hi = 1.0 if name == "lemma_D2" else D3_LAMBDA_MAX
    lams = _lambda_grid(1e-10, hi, per_decade)
    ps = _p_grid(n_p)
    ratio = constant_ratio(name, lams[:, None], ps[None, :])
    return safety * float(np.max(ratio))


_CONSTANTS: dict = {}


def default_constant(name: str) -> float:
    """Cached :func:`estimate_constant` for the lemma matching a lower bound."""
    lemma = {"lower_d2": "lemma_D2", "lower_d3": "lemma_D3", "lower_mdm12": "lemma_D3"}.get(name, name)
    if lemma not in _CONSTANTS:
        _CONSTANTS[lemma] = estimate_constant(lemma)
    return _CONSTANTS[lemma]


# ----------------------------------------------------------------------------- lower bounds

def lower_bound_d2(lam: float, C: float | None = None, nodes: int = 12) -> QuadratureResult:
    """``(2 pi)^-1 int (lam + 4 sin^2(p/2) + C lam^(-1/2) sin^2 p)^-1 dp``."""
    _check_lam(lam)
    C = default_constant("lower_d2") if C is None else C
    k = C / math.sqrt(lam)

    def f(x):
        return 1.0 / (lam + _s2(x) + k * np.sin(x) ** 2)

    scale = 0.25 * math.sqrt(lam / (1.0 + k))
    res = refined_torus_mean(f, 1, scale, nodes, lam, "lower_d2")
    res.C_used = C
    return res


def _log_penalty(lam, x):
    return np.abs(np.log(lam + 0.5 * np.sin(x / 2) ** 2)) * np.sin(x) ** 2


def lower_bound_d3(lam: float, C: float | None = None, nodes: int = 12) -> QuadratureResult:
    """``(2 pi)^-3 int (lam + dhat(p^(1)) + C sum_{j=2,3} |log(lam + sin^2(p_j/2)/2)| sin^2 p_j)^-1``."""
    _check_lam(lam, D3_LAMBDA_MAX)
    C = default_constant("lower_d3") if C is None else C

    def f(x, y):
        return 1.0 / (lam + _s2(x) + _s2(y) + C * (_log_penalty(lam, x) + _log_penalty(lam, y)))

    res = refined_torus_mean(f, 2, 0.25 * math.sqrt(lam), nodes, lam, "lower_d3")
    res.C_used = C
    return res


def lower_bound_mdm12(lam: float, C: float | None = None, nodes: int = 12,
                      swapped: bool = False) -> QuadratureResult:
    """d = 3, axes 1 and 2 oriented: only the ``j = 2`` penalty term survives.

    ``swapped`` evaluates the variant with ``sin^2(p_2)`` and ``sin^2(p_2/2)``
    exchanged between the logarithm and the weight.
    """
    _check_lam(lam, D3_LAMBDA_MAX)
    C = default_constant("lower_mdm12") if C is None else C
    if swapped:
        def pen(x):
            return np.abs(np.log(lam + 0.5 * np.sin(x) ** 2)) * np.sin(x / 2) ** 2
    else:
        def pen(x):
            return _log_penalty(lam, x)

    def f(x, y):
        return 1.0 / (lam + _s2(x) + _s2(y) + C * pen(x))

    res = refined_torus_mean(f, 2, 0.25 * math.sqrt(lam), nodes, lam, "lower_mdm12")
    res.C_used = C
    return res


def continuum_comparison(name: str, lam: float, nodes: int = 12) -> float:
    """Continuum stand-in on ``[0, pi]^2`` for the d = 3 type lower bounds (sanity check only)."""
    def pen(x):
        return x * x * np.abs(np.log(lam + x * x))

    if name == "lower_d3":
        def f(x, y):
            return 1.0 / (lam + x * x + y * y + pen(x) + pen(y))
    elif name == "lower_mdm12":
        def f(x, y):
            return 1.0 / (lam + x * x + y * y + pen(x))
    else:
        raise ValueError(name)
    value, _ = torus_mean(f, 2, 0.25 * math.sqrt(lam), nodes)
    return value * math.pi**2


@dataclass
class BoundIntegral:
    name: str
    d: int
    lam: float
    constant_C: float = float("nan")

    @property
    def effective_dims(self) -> int:
        if self.name == "upper_S9":
            return max(0, self.d - 2) if self.d <= 4 else 1
        return {"lower_d2": 1, "lower_d3": 2, "lower_mdm12": 2, "lemma_D2": 1, "lemma_D3": 1}[self.name]

    def evaluate(self) -> QuadratureResult:
        C = None if math.isnan(self.constant_C) else self.constant_C
        if self.name == "upper_S9":
            return upper_bound(self.d, self.lam)
        if self.name == "lower_d2":
            return lower_bound_d2(self.lam, C)
        if self.name == "lower_d3":
            return lower_bound_d3(self.lam, C)
        if self.name == "lower_mdm12":
            return lower_bound_mdm12(self.lam, C)
        if self.name in ("lemma_D2", "lemma_D3"):
            # the lemma integral at the peak p = 0
            f = lemma_D2_integral if self.name == "lemma_D2" else lemma_D3_integral
            v = float(f(self.lam, 0.0))
            return QuadratureResult(v, 1e-14 * v, 0, self.lam, self.name)
        raise ValueError(f"unknown integral {self.name!r}")


def bound_curve(name: str, lambdas, d: int = 2, C: float | None = None) -> list:
    out = []
    for lam in lambdas:
        res = BoundIntegral(name, d, float(lam), float("nan") if C is None else C).evaluate()
        out.append(res)
    return out


def curve_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "value", "error_estimate", "C_used"])
    for r in results:
        w.writerow([repr(float(r.lam)), repr(float(r.value)), repr(float(r.error_estimate)),
                    repr(float(r.C_used))])
    return buf.getvalue()


# ----------------------------------------------------------------------------- fits

FIT_MODELS = ("power", "log", "loglog", "sqrtlog")


@dataclass
class FitResult:
    """Least-squares growth law.

    ``parameter`` is the exponent (power) or the slope against ``log(1/x)``,
    ``log log(1/x)`` or, for sqrtlog, the slope of ``value^2`` against
    ``log(1/x)``.  ``residual`` is the largest relative deviation of the fitted
    curve from the data.
    """

    model: str
    parameter: float
    intercept: float
    residual: float
    x_range: tuple
    n_points: int

    def predict(self, x) -> np.ndarray:
        z = _transform_x(self.model, np.asarray(x, dtype=np.float64))
        y = self.intercept + self.parameter * z
        if self.model == "power":
            return np.exp(y)
        if self.model == "sqrtlog":
            return np.sqrt(np.maximum(y, 0.0))
        return y

    def to_dict(self) -> dict:
        return asdict(self)


def _transform_x(model, x):
    if model == "power":
        return np.log(x)
    if model == "log":
        return np.log(1.0 / x)
    if model == "loglog":
        return np.log(np.log(1.0 / x))
    if model == "sqrtlog":
        return np.log(1.0 / x)
    raise ValueError(f"unknown model {model!r}")


def fit_growth(x, values, model: str = "power") -> FitResult:
    """Fit a growth law by linear least squares in transformed coordinates.

    power: log v against log x.  log: v against log(1/x).  loglog: v against
    log log(1/x).  sqrtlog: v^2 against log(1/x).  ``x`` is typically a
    decreasing lambda grid; for the power model any strictly monotone grid
    (e.g. times) is accepted.
    """
    if model not in FIT_MODELS:
        raise ValueError(f"unknown model {model!r}")
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if x.size < 4 or v.size != x.size:
        raise ValueError("need at least 4 points with matching values")
    dx = np.diff(x)
    if not (np.all(dx < 0) or np.all(dx > 0)):
        raise ValueError("x must be strictly monotone")
    if np.any(v <= 0) or np.any(x <= 0):
        raise ValueError("x and values must be positive")
    if np.ptp(v) == 0:
        raise ValueError("constant data is degenerate for a growth fit")
    if model != "power" and np.any(x >= 1):
        raise ValueError("logarithmic models need x < 1")
    if model == "loglog" and np.any(x >= math.exp(-1)):
        raise ValueError("loglog model needs x < 1/e")
    z = _transform_x(model, x)
    y = {"power": np.log(v), "sqrtlog": v * v}.get(model, v)
    slope, intercept = np.polyfit(z, y, 1)
    res = FitResult(model, float(slope), float(intercept), 0.0, (float(x.min()), float(x.max())), int(x.size))
    res.residual = float(np.max(np.abs(res.predict(x) - v) / v))
    return res
