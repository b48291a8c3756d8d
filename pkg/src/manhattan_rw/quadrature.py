"""Gauss-Legendre panel rules on [0, pi], graded towards the origin.

The torus integrands of interest are even in each coordinate, smooth away from
the origin and peaked at scale ``sqrt(lam)`` near it.  Panels are halved
dyadically from ``pi`` down to a width below ``sqrt(lam)``; a uniform
Gauss-Legendre rule is used on each panel.  Tensor products of the 1-d rule
cover the 2-d integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_NODES = 12


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def composite_gauss_legendre(a: float, b: float, panels: int, nodes: int):
    """Nodes and weights of ``panels`` equal Gauss-Legendre panels on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    return _panel_rule(edges, nodes)


def _panel_rule(edges: np.ndarray, nodes: int):
    x, w = _gl(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    pts = (lo + half * (x + 1.0)).ravel()
    wts = (half * w).ravel()
    return pts, wts


def graded_edges(scale: float, upper: float = math.pi, refine: int = 0,
                 uniform_panels: int = 2, both_ends: bool = False) -> np.ndarray:
    """Panel edges on [0, upper]: dyadic towards 0 down to ``scale``.

    ``both_ends`` grades towards ``upper`` as well (mirror image on each half).
    ``refine`` splits every panel into ``2**refine`` equal parts.
    """
    if both_ends:
        half = graded_edges(scale, upper / 2, refine, uniform_panels)
        return np.concatenate([half, (upper - half[::-1])[1:]])
    scale = min(max(scale, 1e-300), upper / 2)
    edges = [upper]
    w = upper / 2
    while w > scale:
        edges.append(w)
        w /= 2
    edges.append(w)
    edges.append(0.0)
    edges = np.array(sorted(set(edges)))
    if uniform_panels > 1:
        # the outermost panel carries the smooth bulk; split it evenly
        top = np.linspace(edges[-2], edges[-1], uniform_panels + 1)
        edges = np.concatenate([edges[:-2], top])
    for _ in range(refine):
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
    return edges


def graded_rule(scale: float, nodes: int = DEFAULT_NODES, refine: int = 0, upper: float = math.pi,
                both_ends: bool = True):
    return _panel_rule(graded_edges(scale, upper, refine, both_ends=both_ends), nodes)


@dataclass
class QuadratureResult:
    """Quadrature value with a refinement-based error estimate."""

    value: float
    error_estimate: float
    panels: int
    lam: float
    name: str = ""
    C_used: float = float("nan")

    def __float__(self):
        return float(self.value)


def torus_mean(integrand, dims: int, scale: float, nodes: int = DEFAULT_NODES,
               refine: int = 0, chunk: int = 1 << 22) -> tuple[float, int]:
    """``(2 pi)^-dims`` times the integral of an even integrand over ``T^dims``.

    Evenness in every coordinate reduces the integral to ``[0, pi]^dims``.
    ``integrand`` takes ``dims`` broadcastable coordinate arrays.
    """
    x, w = graded_rule(scale, nodes, refine)
    panels = x.size // nodes
    if dims == 0:
        return float(integrand()), 0
    if dims == 1:
        return float(np.sum(w * integrand(x)) / math.pi), panels
    if dims == 2:
        total = 0.0
        step = max(1, chunk // x.size)
        for s in range(0, x.size, step):
            xs = x[s:s + step, None]
            total += float(np.sum(w[s:s + step, None] * w[None, :] * integrand(xs, x[None, :])))
        return total / math.pi**2, panels
    if dims == 3:
        total = 0.0
        for k in range(x.size):
            vals = integrand(np.full(1, x[k])[:, None, None], x[None, :, None], x[None, None, :])
            total += w[k] * float(np.sum(w[:, None] * w[None, :] * vals.reshape(x.size, x.size)))
        return total / math.pi**3, panels
    raise ValueError("tensor quadrature implemented for up to 3 dimensions")


def refined_torus_mean(integrand, dims: int, scale: float, nodes: int = DEFAULT_NODES,
                       lam: float = float("nan"), name: str = "", floor: float = 1e-14):
    """Evaluate at two panel resolutions; report the finer one and their gap.

    The error estimate is floored at ``floor`` relative to the value, the level
    at which roundoff dominates.
    """
    coarse, _ = torus_mean(integrand, dims, scale, nodes, refine=0)
    fine, panels = torus_mean(integrand, dims, scale, nodes, refine=1)
    err = max(abs(fine - coarse), floor * abs(fine))
    return QuadratureResult(fine, err, panels, lam, name)
