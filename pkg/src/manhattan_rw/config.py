"""Experiment configuration files.

A config is flat ``key = value`` text with dotted section keys, ``#`` comments
and blank lines.  Every key must appear in :data:`SCHEMA`; unknown keys are an
error, so typos do not silently fall back to defaults.  Lists are comma
separated.  Example::

    experiment.kind = msd
    experiment.seed = 7
    model.d = 2
    model.oriented_axes = all
    mc.n_paths = 2000
    grid.t_max = 1e4
    output.dir = runs/d2
    output.plot = true

Parsing is delegated to :mod:`configparser` (one implicit section, no
interpolation); this module adds the schema, type conversion and the
cross-field checks of :meth:`ExperimentConfig.validate`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .bounds import CATALOGUE, FIT_MODELS
from .lattice import MAX_DIMENSION, ModelSpec

KINDS = ("msd", "laplace", "torus-checks", "bounds", "exponent-fit")
DEFAULT_SEED = 0


class ConfigError(ValueError):
    """The config file does not validate (CLI exit code 2)."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _seed(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return v


def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s: str) -> tuple:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _axes(s: str):
    return None if s.strip().lower() == "all" else _ints(s)


def _names(s: str) -> tuple:
    return tuple(x.strip() for x in s.split(",") if x.strip())


# key -> (attribute, converter)
SCHEMA = {
    "experiment.kind": ("kind", str),
    "experiment.seed": ("seed", _seed),
    "model.d": ("d", int),
    "model.oriented_axes": ("oriented_axes", _axes),
    "model.period": ("period", int),
    "mc.n_paths": ("n_paths", int),
    "mc.quenched": ("quenched", _bool),
    "mc.event_cap": ("event_cap", int),
    "grid.times": ("times", _floats),
    "grid.t_min": ("t_min", float),
    "grid.t_max": ("t_max", float),
    "grid.per_decade": ("per_decade", int),
    "grid.lambdas": ("lambdas", _floats),
    "grid.lambda_min": ("lambda_min", float),
    "grid.lambda_max": ("lambda_max", float),
    "laplace.truncation_factor": ("truncation_factor", float),
    "torus.L": ("L", int),
    "torus.n_random": ("n_random", int),
    "torus.max_lines": ("max_lines", int),
    "bounds.names": ("bound_names", _names),
    "bounds.C": ("bound_C", float),
    "fit.input": ("fit_input", str),
    "fit.x_column": ("fit_x", str),
    "fit.y_column": ("fit_y", str),
    "fit.model": ("fit_model", str),
    "fit.x_min": ("fit_x_min", float),
    "fit.x_max": ("fit_x_max", float),
    "output.dir": ("out_dir", str),
    "output.plot": ("plot", _bool),
}


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``source`` is the file it came from."""

    kind: str
    seed: int = DEFAULT_SEED
    d: int = 2
    oriented_axes: tuple | None = None
    period: int = 0
    n_paths: int = 1000
    quenched: bool = False
    event_cap: int = 10**8
    times: tuple = ()
    t_min: float = 0.1
    t_max: float = 100.0
    per_decade: int = 16
    lambdas: tuple = ()
    lambda_min: float = 1e-6
    lambda_max: float = 1.0
    truncation_factor: float = 40.0
    L: int = 3
    n_random: int = 20
    max_lines: int = 14
    bound_names: tuple = ("upper_S9",)
    bound_C: float | None = None
    fit_input: str = ""
    fit_x: str = "t"
    fit_y: str = "cesaro"
    fit_model: str = "power"
    fit_x_min: float | None = None
    fit_x_max: float | None = None
    out_dir: str = "out"
    plot: bool = True
    source: str = field(default="", compare=False)

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: str = "") -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                           comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                           strict=True)
        parser.optionxform = str  # keep key case (torus.L)
        try:
            parser.read_string("[config]\n" + text, source=source or "<config>")
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        raw = dict(parser["config"])
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
        if "experiment.kind" not in raw:
            raise ConfigError("experiment.kind is required")
        values = {}
        for key, text_value in raw.items():
            attr, conv = SCHEMA[key]
            try:
                values[attr] = conv(text_value.strip())
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        cfg = cls(**values, source=source)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Read and validate ``path``; ``OSError`` propagates (CLI exit code 4)."""
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), str(path))

    def with_overrides(self, seed: int | None = None, out_dir: str | None = None) -> "ExperimentConfig":
        cfg = replace(self, seed=self.seed if seed is None else seed,
                      out_dir=self.out_dir if out_dir is None else str(out_dir))
        cfg.validate()
        return cfg

    # -- validation -----------------------------------------------------------

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.kind in KINDS, f"experiment.kind must be one of {', '.join(KINDS)}")
        need(0 <= self.seed < 2**64, "experiment.seed must fit in 64 unsigned bits")
        need(self.out_dir != "", "output.dir must be nonempty")
        if self.kind in ("msd", "laplace"):
            try:
                self.model_spec()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            need(self.n_paths >= 2, "mc.n_paths must be >= 2")
            need(self.event_cap >= 1, "mc.event_cap must be positive")
        if self.kind == "msd":
            if self.times:
                t = self.times
                need(all(x >= 0 for x in t) and all(b > a for a, b in zip(t, t[1:])),
                     "grid.times must be nonnegative and strictly increasing")
            else:
                need(0 < self.t_min <= self.t_max, "need 0 < grid.t_min <= grid.t_max")
                need(self.per_decade >= 1, "grid.per_decade must be positive")
        if self.kind in ("laplace", "bounds"):
            if self.lambdas:
                need(all(x > 0 for x in self.lambdas), "grid.lambdas must be positive")
            else:
                need(0 < self.lambda_min <= self.lambda_max, "need 0 < grid.lambda_min <= grid.lambda_max")
                need(self.per_decade >= 1, "grid.per_decade must be positive")
        if self.kind == "laplace":
            need(self.truncation_factor > 0, "laplace.truncation_factor must be positive")
        if self.kind == "torus-checks":
            need(1 <= self.d <= MAX_DIMENSION, f"model.d must be in 1..{MAX_DIMENSION}")
            need(self.L >= 2, "torus.L must be >= 2")
            need(self.n_random >= 1, "torus.n_random must be positive")
            if self.oriented_axes is not None:
                need(self.oriented_axes and all(1 <= a <= self.d for a in self.oriented_axes),
                     "model.oriented_axes must be a nonempty subset of 1..d")
        if self.kind == "bounds":
            bad = [n for n in self.bound_names if n not in CATALOGUE]
            need(self.bound_names and not bad, f"bounds.names must be drawn from {', '.join(CATALOGUE)}")
            need(2 <= self.d <= 6 or "upper_S9" not in self.bound_names,
                 "upper_S9 needs 2 <= model.d <= 6")
            need(self.bound_C is None or self.bound_C > 0, "bounds.C must be positive")
        if self.kind == "exponent-fit":
            need(self.fit_input != "", "fit.input is required for exponent-fit")
            need(self.fit_model in FIT_MODELS, f"fit.model must be one of {', '.join(FIT_MODELS)}")
            lo, hi = self.fit_x_min, self.fit_x_max
            need(lo is None or hi is None or lo < hi, "fit.x_min must be below fit.x_max")

    # -- derived quantities ---------------------------------------------------

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.d, self.oriented_axes, self.seed, self.period)

    def time_grid(self):
        from .walker import log_time_grid

        if self.times:
            return list(self.times)
        return list(log_time_grid(self.t_max, self.t_min, self.per_decade))

    def lambda_grid(self):
        if self.lambdas:
            return list(self.lambdas)
        if self.lambda_min == self.lambda_max:
            return [self.lambda_min]
        lo, hi = math.log10(self.lambda_min), math.log10(self.lambda_max)
        n = max(1, int(round(self.per_decade * (hi - lo)))) + 1
        return [10.0 ** (lo + (hi - lo) * k / (n - 1)) for k in range(n)]

    def fit_input_path(self) -> Path:
        """``fit.input`` resolved against the config file's directory."""
        p = Path(self.fit_input)
        if not p.is_absolute() and self.source:
            p = Path(self.source).parent / p
        return p

    def to_dict(self) -> dict:
        """Normalised echo of every setting, defaults included."""
        out = {}
        for key, (attr, _) in SCHEMA.items():
            v = getattr(self, attr)
            out[key] = list(v) if isinstance(v, tuple) else v
        if out["model.oriented_axes"] is None:
            out["model.oriented_axes"] = "all"
        return out
