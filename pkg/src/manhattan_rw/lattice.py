"""Lattice geometry and the lazily hashed environment of line orientations.

Every axis-parallel line of Z^d is identified by its axis ``i`` and its base
point, the projection of any of its points onto the hyperplane
``{x : x_i = 0}``.  The orientation of the line is a pure function of the
master seed and that key::

    h = seed
    h = mix(h ^ axis)
    for c in base:  h = mix(h ^ zigzag(c))
    sign = +1 if bit 63 of h is 0 else -1

where ``mix`` is the splitmix64 finaliser (including its golden-ratio
increment).  Nothing is stored, so memory use does not grow with the number of
lines visited.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
MIX_C1 = 0xBF58476D1CE4E5B9
MIX_C2 = 0x94D049BB133111EB
ENV_SALT = 0xD1B54A32D192ED03
MAX_DIMENSION = 8

FREE = 0  # marker for a free (undirected) axis in a move set


class UnorientedAxis(ValueError):
    """Raised when the orientation of a line on a free axis is requested."""


def mix64(z: int) -> int:
    """splitmix64 step: add the golden increment, then finalise."""
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * MIX_C1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_C2) & MASK64
    return z ^ (z >> 31)


def zigzag(c: int) -> int:
    """Map a signed coordinate to an unsigned word: n >= 0 -> 2n, n < 0 -> -2n-1."""
    return (2 * c if c >= 0 else -2 * c - 1) & MASK64


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorised :func:`mix64` on a uint64 array (wrap-around arithmetic)."""
    z = np.asarray(z, dtype=np.uint64) + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_C2)
    return z ^ (z >> np.uint64(31))


def zigzag_array(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=np.int64)
    return np.where(c >= 0, 2 * c, -2 * c - 1).astype(np.uint64)


def derive_path_seed(master_seed: int, path_index: int) -> int:
    return mix64((master_seed ^ path_index) & MASK64)


def derive_env_seed(path_seed: int) -> int:
    return mix64(path_seed ^ ENV_SALT)


@dataclass(frozen=True)
class ModelSpec:
    """Lattice dimension, which axes carry oriented lines, and the master seed.

    ``oriented_axes`` holds 1-based axis numbers.  All axes oriented is the
    Manhattan lattice, a single oriented axis is the Matheron-de Marsily model,
    anything in between interpolates.  ``period > 0`` wraps every line base
    modulo ``period`` before hashing, which realises a torus-periodic
    environment (used to cross-check the exact torus computations).
    """

    d: int
    oriented_axes: frozenset = field(default=None)
    master_seed: int = 0
    period: int = 0

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not 1 <= self.d <= MAX_DIMENSION:
            raise ValueError(f"dimension must be an integer in 1..{MAX_DIMENSION}, got {self.d!r}")
        axes = range(1, self.d + 1) if self.oriented_axes is None else self.oriented_axes
        axes = frozenset(int(a) for a in axes)
        if not axes:
            raise ValueError("at least one axis must be oriented")
        bad = sorted(a for a in axes if not 1 <= a <= self.d)
        if bad:
            raise ValueError(f"oriented axes {bad} outside 1..{self.d}")
        object.__setattr__(self, "oriented_axes", axes)
        if not 0 <= int(self.master_seed) <= MASK64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        if self.period < 0:
            raise ValueError("period must be >= 0")

    @classmethod
    def manhattan(cls, d: int, seed: int = 0, **kw) -> "ModelSpec":
        return cls(d, frozenset(range(1, d + 1)), seed, **kw)

    @classmethod
    def mdm(cls, d: int, seed: int = 0, **kw) -> "ModelSpec":
        return cls(d, frozenset({1}), seed, **kw)

    @property
    def d_fix(self) -> int:
        return len(self.oriented_axes)

    @property
    def d_free(self) -> int:
        return self.d - self.d_fix

    @property
    def kind(self) -> str:
        if self.d_fix == self.d:
            return "manhattan"
        return "mdm" if self.d_fix == 1 else "interpolated"

    def is_oriented(self, axis: int) -> bool:
        return axis in self.oriented_axes

    def oriented_mask(self) -> np.ndarray:
        """int8 array, 1 where axis (0-based index) is oriented."""
        return np.array([1 if a + 1 in self.oriented_axes else 0 for a in range(self.d)], dtype=np.int8)

    def with_seed(self, seed: int) -> "ModelSpec":
        return replace(self, master_seed=int(seed) & MASK64)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "oriented_axes": sorted(self.oriented_axes),
            "master_seed": self.master_seed,
            "period": self.period,
            "kind": self.kind,
        }


@dataclass(frozen=True)
class LineKey:
    axis: int
    base: tuple

    def __post_init__(self):
        if self.base[self.axis - 1] != 0:
            raise ValueError("line base must have a zero coordinate along its own axis")


def line_key(spec: ModelSpec, axis: int, point: Sequence[int]) -> LineKey:
    """Key of the axis-``axis`` line through ``point``."""
    if not 1 <= axis <= spec.d:
        raise ValueError(f"axis {axis} outside 1..{spec.d}")
    point = tuple(int(c) for c in point)
    if len(point) != spec.d:
        raise ValueError(f"point has {len(point)} coordinates, expected {spec.d}")
    base = list(point)
    base[axis - 1] = 0
    return LineKey(axis, tuple(base))


class OrientationOracle:
    """Deterministic, storage-free realisation of the line orientations."""

    __slots__ = ("spec",)

    def __init__(self, spec: ModelSpec):
        self.spec = spec

    def orientation(self, key: LineKey) -> int:
        spec = self.spec
        if key.axis not in spec.oriented_axes:
            raise UnorientedAxis(f"axis {key.axis} is free in this model")
        return hash_orientation(spec.master_seed, key.axis, key.base, spec.period)

    def at(self, axis: int, point: Sequence[int]) -> int:
        """Orientation of the axis-``axis`` line through ``point``."""
        return self.orientation(line_key(self.spec, axis, point))

    def orientations(self, axis: int, bases: np.ndarray) -> np.ndarray:
        """Vectorised query for an ``(n, d)`` array of line bases or points."""
        spec = self.spec
        if axis not in spec.oriented_axes:
            raise UnorientedAxis(f"axis {axis} is free in this model")
        bases = np.array(bases, dtype=np.int64, copy=True)
        bases[:, axis - 1] = 0
        return hash_orientation_array(np.uint64(spec.master_seed), axis, bases, spec.period)


def hash_orientation(seed: int, axis: int, base: Iterable[int], period: int = 0) -> int:
    h = mix64((seed ^ axis) & MASK64)
    for c in base:
        if period:
            c %= period
        h = mix64(h ^ zigzag(int(c)))
    return -1 if h >> 63 else 1


def hash_orientation_array(seed, axis: int, bases: np.ndarray, period: int = 0) -> np.ndarray:
    """Orientation signs (int64) for each row of ``bases``; ``seed`` may be per-row."""
    bases = np.asarray(bases, dtype=np.int64)
    if period:
        bases = np.mod(bases, period)
    seed = np.broadcast_to(np.asarray(seed, dtype=np.uint64), bases.shape[:1])
    h = mix64_array(seed ^ np.uint64(axis))
    for k in range(bases.shape[1]):
        h = mix64_array(h ^ zigzag_array(bases[:, k]))
    return np.where((h >> np.uint64(63)) == 0, 1, -1).astype(np.int64)


def legal_moves(oracle: OrientationOracle, spec: ModelSpec, point: Sequence[int]) -> list:
    """The d candidate displacements at ``point``, one per axis.

    Oriented axes contribute ``omega(i, x) * e_i`` as a tuple.  Free axes
    contribute the marker :data:`FREE` paired with the axis, meaning +-e_i with
    probability 1/2 each when the step is taken.
    """
    moves = []
    for axis in range(1, spec.d + 1):
        if spec.is_oriented(axis):
            step = [0] * spec.d
            step[axis - 1] = oracle.at(axis, point)
            moves.append(tuple(step))
        else:
            moves.append((FREE, axis))
    return moves
