"""Exact environment process on a finite torus.

The walker's position is quotiented out: a state is the sign vector of all
oriented lines of the torus ``(Z/L)^d``, and the generator acts by cyclic
translations ``tau_k``.  With ``m`` oriented lines there are ``2**m`` states,
so this is an oracle for small instances only.

Lines of axis ``i`` are indexed by their base ``x`` in ``U_i`` (coordinate
``i`` is zero).  Functions on ``U_i`` are stored as arrays of shape ``(L,)*d``
with dimension ``i-1`` collapsed to length 1, so ``np.roll`` along any other
dimension is a torus translation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

DEFAULT_MAX_LINES = 14
HARD_MAX_LINES = 20
DENSE_EXPM_LIMIT = 1024


class StateSpaceTooLarge(ValueError):
    pass


@dataclass
class ObservableVector:
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("observable has non-finite entries")


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, ObservableVector) else np.asarray(f, dtype=np.float64)


class TorusProcess:
    """Generator ``G``, its adjoint, and their symmetric/antisymmetric parts.

    ``G f(w) = sum_k [ (1 + w(k,0))/2 f(tau_k w) + (1 - w(k,0))/2 f(tau_k^-1 w) - f(w) ]``
    for oriented axes ``k``; free axes use rates 1/2, 1/2.  Matrices are kept
    sparse (at most ``2d + 1`` entries per row); :meth:`dense` expands them.
    """

    def __init__(self, d: int, L: int, oriented_axes=None, max_lines: int = DEFAULT_MAX_LINES):
        if d < 1 or L < 2:
            raise ValueError("need d >= 1 and L >= 2")
        axes = frozenset(range(1, d + 1)) if oriented_axes is None else frozenset(oriented_axes)
        if not axes or any(not 1 <= a <= d for a in axes):
            raise ValueError("oriented axes must be a nonempty subset of 1..d")
        self.d, self.L, self.oriented_axes = d, L, axes
        m = len(axes) * L ** (d - 1)
        cap = min(max_lines, HARD_MAX_LINES)
        if m > cap:
            raise StateSpaceTooLarge(f"{m} lines -> 2**{m} states exceeds the cap of 2**{cap}")
        self.degenerate = L == 2
        if self.degenerate:
            warnings.warn("L=2: tau_k and its inverse coincide, so A vanishes and gradient "
                          "identities are trivially satisfied", stacklevel=2)
        self.m = m
        self.n_states = 2 ** m
        self.lines = [(i, x) for i in sorted(axes) for x in np.ndindex(self.u_shape(i))]
        self._line_index = {key: b for b, key in enumerate(self.lines)}
        self.pi = np.full(self.n_states, 1.0 / self.n_states)
        self._lu = {}
        self._build()

    # -- geometry -------------------------------------------------------------

    def u_shape(self, axis: int) -> tuple:
        return tuple(1 if k == axis - 1 else self.L for k in range(self.d))

    def line_index(self, axis: int, base) -> int:
        base = tuple(int(c) % self.L if k != axis - 1 else 0 for k, c in enumerate(base))
        return self._line_index[(axis, base)]

    def axis_lines(self, axis: int) -> np.ndarray:
        """Line indices of axis ``axis`` in C order of :meth:`u_shape`."""
        if axis not in self.oriented_axes:
            raise ValueError(f"axis {axis} is free")
        start = sorted(self.oriented_axes).index(axis) * self.L ** (self.d - 1)
        return np.arange(start, start + self.L ** (self.d - 1))

    @cached_property
    def omega(self) -> np.ndarray:
        """``(n_states, m)`` array of line signs; bit ``b`` set means ``-1``."""
        idx = np.arange(self.n_states, dtype=np.int64)
        bits = (idx[:, None] >> np.arange(self.m)) & 1
        return (1 - 2 * bits).astype(np.int8)

    def _shift_source(self, k: int, sign: int) -> np.ndarray:
        src = np.empty(self.m, dtype=np.int64)
        for b, (j, x) in enumerate(self.lines):
            if j == k:
                src[b] = b
            else:
                y = list(x)
                y[k - 1] = (y[k - 1] + sign) % self.L
                src[b] = self._line_index[(j, tuple(y))]
        return src

    def _state_perm(self, src: np.ndarray) -> np.ndarray:
        idx = np.arange(self.n_states, dtype=np.int64)
        out = np.zeros(self.n_states, dtype=np.int64)
        for b in range(self.m):
            out |= ((idx >> src[b]) & 1) << b
        return out

    def _build(self):
        n, d = self.n_states, self.d
        self.tau = {}
        for k in range(1, d + 1):
            self.tau[k] = self._state_perm(self._shift_source(k, +1))
            self.tau[-k] = self._state_perm(self._shift_source(k, -1))
        rows = np.arange(n)

        def assemble(forward: bool):
            r, c, v = [rows], [rows], [np.full(n, -float(d))]
            for k in range(1, d + 1):
                if k in self.oriented_axes:
                    w = self.omega[:, self.line_index(k, (0,) * d)].astype(np.float64)
                    up, down = (1 + w) / 2, (1 - w) / 2
                    if not forward:
                        up, down = down, up
                else:
                    up = down = np.full(n, 0.5)
                r += [rows, rows]
                c += [self.tau[k], self.tau[-k]]
                v += [up, down]
            return sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                                 shape=(n, n))

        self.G = assemble(True)
        self.Gstar = assemble(False)
        self.S = ((self.G + self.Gstar) * 0.5).tocsr()
        self.A = ((self.G - self.Gstar) * 0.5).tocsr()

    def dense(self, which: str = "G") -> np.ndarray:
        return getattr(self, which).toarray()

    # -- observables ------------------------------------------------------------

    def line_observable(self, axis: int, base=None) -> ObservableVector:
        base = (0,) * self.d if base is None else base
        b = self.line_index(axis, base)
        return ObservableVector(self.omega[:, b].astype(np.float64), f"omega({axis},{tuple(base)})")

    @property
    def phi(self) -> ObservableVector:
        return self.line_observable(1)

    def axis_signs(self, axis: int) -> np.ndarray:
        """``(n_states, L**(d-1))`` signs of all axis-``axis`` lines."""
        return self.omega[:, self.axis_lines(axis)].astype(np.float64)

    def linear_observable(self, u: np.ndarray, axis: int = 1) -> ObservableVector:
        """``psi(w) = sum_x u(x) w(axis, x)`` for ``u`` on ``U_axis``."""
        u = np.asarray(u, dtype=np.float64).reshape(-1)
        return ObservableVector(self.axis_signs(axis) @ u, "psi")

    def two_line_observable(self, i: int, j: int, v: np.ndarray) -> ObservableVector:
        """``zeta(w) = sum_{x,y} v(x,y) w(i,x) w(j,y)``."""
        if i == j:
            raise ValueError("two-line functions need distinct axes")
        nv = self.L ** (self.d - 1)
        v = np.asarray(v, dtype=np.float64).reshape(nv, nv)
        wi, wj = self.axis_signs(i), self.axis_signs(j)
        return ObservableVector(np.einsum("sx,xy,sy->s", wi, v, wj), "zeta")

    def two_line_coefficients(self, i: int, j: int, f) -> np.ndarray:
        """Projection of ``f`` on the products ``w(i,x) w(j,y)`` (flat, ``(nv, nv)``)."""
        wi, wj = self.axis_signs(i), self.axis_signs(j)
        return (wi * _values(f)[:, None]).T @ wj / self.n_states

    # -- inner products and solves -----------------------------------------------

    def inner(self, f, g) -> float:
        return float(np.dot(self.pi, _values(f) * _values(g)))

    def apply(self, which: str, f) -> np.ndarray:
        return getattr(self, which) @ _values(f)

    def solve_resolvent(self, which: str, lam: float, f) -> np.ndarray:
        """``(lam - M)^-1 f`` for ``M`` one of G, Gstar, S."""
        if lam <= 0:
            raise ValueError("lambda must be positive")
        key = (which, float(lam))
        lu = self._lu.get(key)
        if lu is None:
            M = getattr(self, which)
            lu = splu((lam * sp.identity(self.n_states, format="csc") - M).tocsc())
            self._lu[key] = lu
        return lu.solve(_values(f))

    def export_triplets(self, which: str, path) -> None:
        """Write ``row col value`` lines (nonzeros only) for external inspection."""
        M = getattr(self, which).tocoo()
        with open(path, "w") as fh:
            fh.write(f"# {which} {self.n_states}x{self.n_states} nnz={M.nnz}\n")
            for r, c, v in zip(M.row, M.col, M.data):
                if v != 0:
                    fh.write(f"{r} {c} {float(v)!r}\n")


def build_torus(d: int, L: int, oriented_axes=None, max_lines: int = DEFAULT_MAX_LINES) -> TorusProcess:
    return TorusProcess(d, L, oriented_axes, max_lines)


def resolvent_quadratic(tp: TorusProcess, f, lam: float, which: str = "G") -> float:
    """``(f, (lam - M)^-1 f)_pi`` with ``M`` = G (default) or S."""
    return tp.inner(f, tp.solve_resolvent(which, lam, f))


def resolvent_quadratic_spectral(tp: TorusProcess, f, lam: float, which: str = "G") -> float:
    """Same quantity through a full complex Schur decomposition (independent oracle).

    ``M = Q T Q^H`` with ``T`` upper triangular, so the resolvent reduces to a
    triangular solve.  Unlike an eigenvector basis this stays well conditioned
    for the non-normal generator.
    """
    T, Q = scipy.linalg.schur(tp.dense(which).astype(complex), output="complex")
    fv = _values(f)
    rhs = Q.conj().T @ fv
    y = scipy.linalg.solve_triangular(lam * np.eye(tp.n_states) - T, rhs)
    return float(np.real(np.dot(tp.pi, fv * (Q @ y))))


def variational_value(tp: TorusProcess, psi, phi, lam: float) -> float:
    """``2(phi,psi) - (psi,(lam-S)psi) - (A psi, (lam-S)^-1 A psi)``."""
    psi_v = _values(psi)
    a_psi = tp.apply("A", psi_v)
    return (2 * tp.inner(phi, psi_v)
            - tp.inner(psi_v, lam * psi_v - tp.apply("S", psi_v))
            - tp.inner(a_psi, tp.solve_resolvent("S", lam, a_psi)))


def stationary_test_function(tp: TorusProcess, phi, lam: float) -> np.ndarray:
    """Maximiser of :func:`variational_value` from its stationarity system.

    The functional is a concave quadratic ``2(phi,psi) - (psi, H psi)`` with
    ``H = (lam - S) + A^T (lam - S)^-1 A`` (transpose is the pi-adjoint since pi
    is uniform), so the maximiser solves ``H psi = phi``.  Dense; small tori only.
    """
    K = lam * np.eye(tp.n_states) - tp.dense("S")
    Ad = tp.dense("A")
    H = K + Ad.T @ np.linalg.solve(K, Ad)
    return np.linalg.solve(H, _values(phi))


def correlation_curve(tp: TorusProcess, f, times) -> np.ndarray:
    """``(f, exp(tG) f)_pi`` at each time (scaling-and-squaring Pade exponential)."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    fv = _values(f)
    out = np.empty(times.size)
    if tp.n_states <= DENSE_EXPM_LIMIT:
        G = tp.dense("G")
        for k, t in enumerate(times):
            out[k] = tp.inner(fv, scipy.linalg.expm(t * G) @ fv)
    else:
        from scipy.sparse.linalg import expm_multiply

        for k, t in enumerate(times):
            out[k] = tp.inner(fv, expm_multiply(t * tp.G, fv))
    return out


def drift_variance_curve(tp: TorusProcess, times, f=None, method: str = "block",
                         nodes: int = 16, panel: float = 2.0) -> np.ndarray:
    """``E_G(t) = 2 int_0^t (t - s) C(s) ds`` with ``C(s) = (f, exp(sG) f)_pi``.

    ``block`` reads ``int_0^t (t - s) exp(sG) ds`` off the exponential of the
    block matrix ``[[G, I, 0], [0, 0, I], [0, 0, 0]]``; ``quadrature``
    integrates :func:`correlation_curve` with Gauss-Legendre panels.
    """
    from .quadrature import composite_gauss_legendre

    f = tp.phi if f is None else f
    fv = _values(f)
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    out = np.zeros(times.size)
    if method == "block":
        n = tp.n_states
        B = np.zeros((3 * n, 3 * n))
        B[:n, :n] = tp.dense("G")
        B[:n, n:2 * n] = np.eye(n)
        B[n:2 * n, 2 * n:] = np.eye(n)
        for k, t in enumerate(times):
            K = scipy.linalg.expm(t * B)[:n, 2 * n:]
            out[k] = 2.0 * tp.inner(fv, K @ fv)
        return out
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    for k, t in enumerate(times):
        if t > 0:
            s, w = composite_gauss_legendre(0.0, float(t), max(1, math.ceil(t / panel)), nodes)
            out[k] = 2.0 * float(np.sum(w * (t - s) * correlation_curve(tp, fv, s)))
    return out


def laplace_of_drift_variance(tp: TorusProcess, lam: float, f=None, horizon: float = 60.0,
                              nodes: int = 16, panel: float = 4.0) -> float:
    """``int_0^inf exp(-lam t) E_G(t) dt`` by Gauss-Legendre panels on ``[0, horizon/lam]``."""
    from .quadrature import composite_gauss_legendre

    T = horizon / lam
    t, w = composite_gauss_legendre(0.0, T, max(1, math.ceil(T / panel)), nodes)
    eg = drift_variance_curve(tp, t, f)
    return float(np.sum(w * np.exp(-lam * t) * eg))


def orbit_limit(tp: TorusProcess) -> float:
    """Long-time limit of ``(phi, exp(tG) phi)_pi`` on the torus.

    Translations preserve the orbit of the initial environment, so the chain
    is not ergodic on the full state space; the correlation of ``phi`` tends
    to the variance of its orbit average, ``L^-(d-1)``.
    """
    return float(tp.L) ** (1 - tp.d)


# ----------------------------------------------------------------------------- reports

@dataclass
class IdentityCheck:
    name: str
    residual: float
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.residual = float(self.residual)
        self.passed = bool(self.residual < self.tolerance)


@dataclass
class Report:
    label: str
    checks: list = field(default_factory=list)

    def add(self, name: str, residual: float, tolerance: float) -> IdentityCheck:
        c = IdentityCheck(name, residual, tolerance)
        self.checks.append(c)
        return c

    def extend(self, other: "Report") -> None:
        self.checks.extend(other.checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_residual(self) -> float:
        return max((c.residual for c in self.checks), default=0.0)

    def to_dict(self) -> dict:
        return {"label": self.label, "passed": self.passed,
                "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_generator(tp: TorusProcess, tol: float = 1e-12) -> Report:
    """Structural identities: row sums, invariance of pi, adjoint, S/A symmetry."""
    rep = Report(f"generator d={tp.d} L={tp.L} axes={sorted(tp.oriented_axes)}")
    G, Gs, S, A = tp.G, tp.Gstar, tp.S, tp.A
    ones = np.ones(tp.n_states)
    rep.add("G_row_sums", np.abs(G @ ones).max(), tol)
    rep.add("Gstar_row_sums", np.abs(Gs @ ones).max(), tol)
    rep.add("pi_invariant_G", np.abs(G.T @ tp.pi).max() * tp.n_states, tol)
    rep.add("pi_invariant_Gstar", np.abs(Gs.T @ tp.pi).max() * tp.n_states, tol)
    off = G - sp.diags(G.diagonal())
    rep.add("G_offdiag_nonnegative", max(0.0, -off.min()), tol)
    # with pi uniform the pi-adjoint is the transpose
    rep.add("Gstar_is_adjoint", abs(Gs - G.T).max(), tol)
    rep.add("S_self_adjoint", abs(S - S.T).max(), tol)
    rep.add("A_antisymmetric", abs(A + A.T).max(), tol)
    rep.add("G_equals_S_plus_A", abs(G - S - A).max(), tol)
    # the operator sum_k w(k,0)(f(tau_k w) - f(tau_k^-1 w)) is G - G*, i.e. twice A
    n, rows = tp.n_states, np.arange(tp.n_states)
    D = sp.csr_matrix((n, n))
    for k in sorted(tp.oriented_axes):
        w = tp.omega[:, tp.line_index(k, (0,) * tp.d)].astype(np.float64)
        D = D + sp.csr_matrix((w, (rows, tp.tau[k])), shape=(n, n)) \
              - sp.csr_matrix((w, (rows, tp.tau[-k])), shape=(n, n))
    rep.add("drift_operator_equals_2A", abs(D - 2 * A).max(), tol)
    # S from its own formula: 1/2 sum_k (f(tau_k) + f(tau_k^-1) - 2f), all axes
    Sf = sp.csr_matrix((n, n))
    for k in range(1, tp.d + 1):
        Sf = Sf + 0.5 * (sp.csr_matrix((np.ones(n), (rows, tp.tau[k])), shape=(n, n))
                         + sp.csr_matrix((np.ones(n), (rows, tp.tau[-k])), shape=(n, n)))
    Sf = Sf - tp.d * sp.identity(n)
    rep.add("S_matches_translation_formula", abs(Sf - S).max(), tol)
    evals = np.linalg.eigvalsh(tp.dense("S")) if n <= 4096 else None
    if evals is not None:
        rep.add("S_nonpositive_spectrum", max(0.0, evals.max()), 1e-10)
    return rep


def _grad_plus(u: np.ndarray, k: int) -> np.ndarray:
    return np.roll(u, -1, axis=k - 1) - u


def _grad_central(u: np.ndarray, k: int) -> np.ndarray:
    return np.roll(u, -1, axis=k - 1) - np.roll(u, 1, axis=k - 1)


def lemma_report(tp: TorusProcess, u: np.ndarray, lam: float = 1.0, tol: float = 1e-12) -> Report:
    """Identities for ``psi = sum_x u(x) w(1,x)`` (``u`` of shape ``tp.u_shape(1)``)."""
    if 1 not in tp.oriented_axes:
        raise ValueError("axis 1 must be oriented")
    u = np.asarray(u, dtype=np.float64).reshape(tp.u_shape(1))
    d, L = tp.d, tp.L
    psi = tp.linear_observable(u).values
    phi = tp.phi.values
    rep = Report("lemma")
    rep.add("i_phi_psi_equals_u0", abs(tp.inner(phi, psi) - u.flat[0]), tol)
    rep.add("i_psi_norm", abs(tp.inner(psi, psi) - np.sum(u * u)), tol * max(1.0, np.sum(u * u)))
    # (psi, S psi) = -1/2 sum_{k >= 2} |grad+_k u|^2, free axes included
    grad_sq = 0.5 * sum(np.sum(_grad_plus(u, k) ** 2) for k in range(2, d + 1))
    rep.add("ii_dirichlet_form", abs(tp.inner(psi, tp.apply("S", psi)) + grad_sq), tol * max(1.0, grad_sq))
    # A psi = -1/2 sum_{oriented k >= 2} sum_x w(k,0) w(1,x) grad_k u(x)
    expected = np.zeros(tp.n_states)
    w1 = tp.axis_signs(1)
    for k in sorted(tp.oriented_axes - {1}):
        wk0 = tp.omega[:, tp.line_index(k, (0,) * d)].astype(np.float64)
        expected -= 0.5 * wk0 * (w1 @ _grad_central(u, k).reshape(-1))
    rep.add("iii_antisymmetric_part", np.abs(tp.apply("A", psi) - expected).max(), tol)
    # Fourier form of (psi, (lam - S) psi) on the torus
    uh = np.fft.fftn(u)
    dhat = _dhat_grid(tp.u_shape(1))
    fourier = np.sum((lam + 0.5 * dhat) * np.abs(uh) ** 2) / u.size
    direct = tp.inner(psi, lam * psi - tp.apply("S", psi))
    rep.add("one_line_fourier", abs(fourier - direct), tol * max(1.0, abs(direct)))
    # Fourier form of (A psi, (lam - S)^-1 A psi)
    a_psi = tp.apply("A", psi)
    direct = tp.inner(a_psi, tp.solve_resolvent("S", lam, a_psi))
    rep.add("antisymmetric_fourier", abs(_antisymmetric_fourier(tp, u, lam) - direct), 1e-10 * max(1.0, abs(direct)))
    return rep


def _dhat_grid(shape) -> np.ndarray:
    """``sum_k 4 sin^2(p_k/2)`` on the discrete dual of an array of ``shape``."""
    total = np.zeros(shape)
    for k, n in enumerate(shape):
        if n == 1:
            continue
        p = 2 * np.pi * np.arange(n) / n
        sh = [1] * len(shape)
        sh[k] = n
        total = total + (4 * np.sin(p / 2) ** 2).reshape(sh)
    return total


def _antisymmetric_fourier(tp: TorusProcess, u: np.ndarray, lam: float) -> float:
    d, L = tp.d, tp.L
    nv = L ** (d - 1)
    uh2 = np.abs(np.fft.fftn(u)) ** 2  # over q, shape u_shape(1)
    freqs = 2 * np.pi * np.arange(L) / L
    total = 0.0
    for i in sorted(tp.oriented_axes - {1}):
        # p lives on U_i's dual, q on U_1's dual; combined vector r = p^(i) + q^(1)
        p_shape, q_shape = tp.u_shape(i), tp.u_shape(1)
        dh = np.zeros(p_shape + q_shape)
        for k in range(d):
            pk = freqs if p_shape[k] > 1 else np.zeros(1)
            qk = freqs if q_shape[k] > 1 else np.zeros(1)
            sh_p = [1] * (2 * d)
            sh_p[k] = pk.size
            sh_q = [1] * (2 * d)
            sh_q[d + k] = qk.size
            r = pk.reshape(sh_p) + qk.reshape(sh_q)
            dh = dh + 4 * np.sin(r / 2) ** 2
        qi = freqs.reshape([1] * d + [L if m == i - 1 else 1 for m in range(d)])
        weight = np.sin(qi) ** 2 * uh2.reshape((1,) * d + q_shape)
        total += np.sum(weight / (lam + 0.5 * dh)) / nv ** 2
    return float(total)


def check_lemma_calculations(tp: TorusProcess, u: np.ndarray, lam: float = 1.0,
                             tol: float = 1e-12) -> Report:
    return lemma_report(tp, u, lam, tol)


def two_line_stencil(tp: TorusProcess, i: int, j: int, v: np.ndarray) -> np.ndarray:
    """Coefficients ``v*`` of ``S zeta`` from the second-difference formula."""
    d = tp.d
    v = np.asarray(v, dtype=np.float64).reshape(tp.u_shape(i) + tp.u_shape(j))

    def second_diff(arr, axes):
        plus = np.roll(arr, -1, axis=axes)
        minus = np.roll(arr, 1, axis=axes)
        return plus + minus - 2 * arr

    out = 0.5 * second_diff(v, (j - 1,))          # x shifted along e_j
    out += 0.5 * second_diff(v, (d + i - 1,))     # y shifted along e_i
    for k in range(1, d + 1):
        if k not in (i, j):
            out += 0.5 * second_diff(v, (k - 1, d + k - 1))
    return out


def two_line_symbol(tp: TorusProcess, i: int, j: int) -> np.ndarray:
    """``-1/2 dhat(p^(i) + q^(j))`` on the discrete dual of ``U_i x U_j``."""
    d, L = tp.d, tp.L
    freqs = 2 * np.pi * np.arange(L) / L
    p_shape, q_shape = tp.u_shape(i), tp.u_shape(j)
    dh = np.zeros(p_shape + q_shape)
    for k in range(d):
        pk = freqs if p_shape[k] > 1 else np.zeros(1)
        qk = freqs if q_shape[k] > 1 else np.zeros(1)
        sh_p = [1] * (2 * d)
        sh_p[k] = pk.size
        sh_q = [1] * (2 * d)
        sh_q[d + k] = qk.size
        dh = dh + 4 * np.sin((pk.reshape(sh_p) + qk.reshape(sh_q)) / 2) ** 2
    return -0.5 * dh


@dataclass
class TwoLineFunction:
    i: int
    j: int
    v: np.ndarray


def check_S_on_two_line(tp: TorusProcess, zeta: TwoLineFunction, lam: float = 1.0,
                        tol: float = 1e-10) -> Report:
    i, j = zeta.i, zeta.j
    if i == j or i not in tp.oriented_axes or j not in tp.oriented_axes:
        raise ValueError("two-line functions need two distinct oriented axes")
    shape = tp.u_shape(i) + tp.u_shape(j)
    v = np.asarray(zeta.v, dtype=np.float64).reshape(shape)
    z = tp.two_line_observable(i, j, v).values
    vstar = two_line_stencil(tp, i, j, v)
    rep = Report(f"two-line ({i},{j})")
    s_z = tp.apply("S", z)
    rep.add("two_line_function", np.abs(s_z - tp.two_line_observable(i, j, vstar).values).max(), tol)
    rep.add("two_line_coefficients", np.abs(tp.two_line_coefficients(i, j, s_z).reshape(shape) - vstar).max(), tol)
    sym = two_line_symbol(tp, i, j)
    vhat_star = np.fft.fftn(vstar)
    rep.add("two_line_fourier_symbol", np.abs(vhat_star - sym * np.fft.fftn(v)).max(), tol * max(1.0, np.abs(v).sum()))
    # resolvent: solve (lam - stencil) s = v on coefficient space, densely
    nv = v.size
    M = np.empty((nv, nv))
    for c in range(nv):
        e = np.zeros(nv)
        e[c] = 1.0
        M[:, c] = two_line_stencil(tp, i, j, e.reshape(shape)).reshape(-1)
    s = np.linalg.solve(lam * np.eye(nv) - M, v.reshape(-1)).reshape(shape)
    r = tp.solve_resolvent("S", lam, z)
    rep.add("two_line_resolvent_coefficients", np.abs(r - tp.two_line_observable(i, j, s).values).max(), tol)
    return rep


def resolvent_report(tp: TorusProcess, lams=(0.1, 1.0), tol: float = 1e-10) -> Report:
    """Resolvent identities for phi: Schur-oracle agreement, G <= S dominance, and
    ``(phi, (lam - S)^-1 phi) = mean_p 1 / (lam + dhat(p^(1)) / 2)`` over the dual torus."""
    rep = Report("resolvent")
    phi = tp.phi
    d = tp.d
    for lam in lams:
        g = resolvent_quadratic(tp, phi, lam, "G")
        s = resolvent_quadratic(tp, phi, lam, "S")
        if tp.n_states <= 1024:
            rep.add(f"G_vs_schur_lambda={lam}", abs(g - resolvent_quadratic_spectral(tp, phi, lam)), tol)
        rep.add(f"G_le_S_lambda={lam}", max(0.0, g - s), tol)
        s_fourier = float(np.mean(1.0 / (lam + 0.5 * _dhat_grid(tp.u_shape(1)))))
        rep.add(f"S_resolvent_fourier_lambda={lam}", abs(s - s_fourier), tol)
    return rep


def variational_report(tp: TorusProcess, lams=(0.1, 1.0), n_random: int = 50, rng=None,
                       tol: float = 1e-10, attain_tol: float = 1e-8) -> Report:
    """Random test functions stay below ``(phi,(lam-G)^-1 phi)``; the stationary one attains it."""
    rng = np.random.default_rng(0) if rng is None else rng
    rep = Report("variational")
    phi = tp.phi.values
    for lam in lams:
        target = resolvent_quadratic(tp, phi, lam, "G")
        excess = max(variational_value(tp, rng.standard_normal(tp.n_states), phi, lam) - target
                     for _ in range(n_random))
        rep.add(f"random_psi_below_lambda={lam}", max(0.0, excess), tol)
        best = variational_value(tp, stationary_test_function(tp, phi, lam), phi, lam)
        rep.add(f"stationary_attains_lambda={lam}", abs(best - target), attain_tol)
    return rep


def identity_suite(tp: TorusProcess, n_random: int = 20, rng=None, lams=(0.1, 1.0),
                   tol: float = 1e-10, n_two_line: int | None = None) -> Report:
    """Every exact identity for one torus: generator structure, one-line calculus
    on ``n_random`` random profiles, the two-line formula on ``n_two_line``
    (default ``n_random``) random coefficient arrays for each pair of oriented
    axes, and the resolvent checks."""
    rng = np.random.default_rng(0) if rng is None else rng
    rep = Report(f"torus d={tp.d} L={tp.L} oriented={sorted(tp.oriented_axes)}")
    rep.extend(check_generator(tp, tol))
    if 1 in tp.oriented_axes:
        for _ in range(n_random):
            rep.extend(lemma_report(tp, rng.standard_normal(tp.u_shape(1)), float(lams[-1]), tol))
    axes = sorted(tp.oriented_axes)
    pairs = [(i, j) for i in axes for j in axes if i < j]
    for i, j in pairs:
        for _ in range(n_random if n_two_line is None else n_two_line):
            v = rng.standard_normal(tp.u_shape(i) + tp.u_shape(j))
            rep.extend(check_S_on_two_line(tp, TwoLineFunction(i, j, v), float(lams[-1]), tol))
    if 1 in tp.oriented_axes:
        rep.extend(resolvent_report(tp, lams, tol))
    return rep
