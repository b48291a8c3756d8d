"""Command-line front end: ``manhattan-rw run <config>`` and ``manhattan-rw fit <config>``.

Exit codes: 0 success, 1 torus identity checks failed, 2 invalid config or fit
input, 3 resource cap exceeded (event cap, torus state space, memory), 4 I/O
failure.  All outputs are written to a temporary file in the output directory
and renamed into place.  ``manifest.json`` lists every other file in the
directory with its SHA-256; it is the only output carrying wall-clock data.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import THREADS_ENV, backend_name, set_threads
from .config import ConfigError, ExperimentConfig

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_RESOURCE, EXIT_IO = 0, 1, 2, 3, 4
MANIFEST = "manifest.json"


def _json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def atomic_write(path: Path, data: bytes) -> None:
    """Write ``data`` to ``path`` through a same-directory temp file and rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ----------------------------------------------------------------------------- experiments

def _run_msd(cfg: ExperimentConfig) -> dict:
    from .svgplot import LogLogPlot
    from .walker import estimate_msd

    est = estimate_msd(cfg.model_spec(), cfg.n_paths, cfg.time_grid(), cfg.seed, cfg.quenched,
                       cfg.event_cap)
    files = {"msd.csv": est.to_csv().encode(), "msd_summary.json": _json(est.summary())}
    if cfg.plot:
        t = est.times
        pos = t > 0
        plot = LogLogPlot(f"E|X_t|^2, {cfg.model_spec().kind} d={cfg.d}", "t", "mean square displacement")
        plot.add(t[pos], est.mean_sq[pos], est.std_err[pos], "E|X_t|^2")
        plot.add(t[pos], est.cesaro[pos], None, "Cesaro average", line=True)
        files["msd.svg"] = plot.render().encode()
    return files


def _run_laplace(cfg: ExperimentConfig) -> dict:
    from .svgplot import LogLogPlot
    from .walker import estimate_laplace

    est = estimate_laplace(cfg.model_spec(), cfg.n_paths, cfg.lambda_grid(), cfg.seed, cfg.quenched,
                           cfg.truncation_factor, cfg.event_cap)
    files = {"laplace.csv": est.to_csv().encode(), "laplace_summary.json": _json(est.summary())}
    if cfg.plot:
        plot = LogLogPlot(f"Laplace transform of E|X_t|^2, d={cfg.d}", "lambda", "value")
        plot.add(est.lambdas, est.values, est.std_err, "MC estimate")
        files["laplace.svg"] = plot.render().encode()
    return files


def _run_torus(cfg: ExperimentConfig) -> tuple[dict, bool]:
    import warnings

    from . import torus

    lams = tuple(cfg.lambdas) if cfg.lambdas else (0.1, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the L=2 degeneracy is recorded in the report instead
        tp = torus.build_torus(cfg.d, cfg.L, cfg.oriented_axes, cfg.max_lines)
    rng = np.random.default_rng(cfg.seed)
    rep = torus.identity_suite(tp, cfg.n_random, rng, lams)
    if 1 in tp.oriented_axes:
        rep.extend(torus.variational_report(tp, lams, cfg.n_random, rng))
    report = rep.to_dict() | {"degenerate_L2": tp.degenerate, "n_states": tp.n_states,
                              "max_residual": rep.max_residual}
    files = {"torus_report.json": _json(report)}
    if 1 in tp.oriented_axes:
        times = list(cfg.times) if cfg.times else [0.5, 1.0, 2.0, 5.0, 10.0]
        corr = torus.correlation_curve(tp, tp.phi, np.asarray(times, dtype=np.float64))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "correlation"])
        for t, c in zip(times, corr):
            w.writerow([repr(float(t)), repr(float(c))])
        files["torus_correlation.csv"] = buf.getvalue().encode()
        res = [{"lambda": lam, "G": torus.resolvent_quadratic(tp, tp.phi, lam, "G"),
                "S": torus.resolvent_quadratic(tp, tp.phi, lam, "S")} for lam in lams]
        files["torus_resolvent.json"] = _json(res)
    return files, rep.passed


def _run_bounds(cfg: ExperimentConfig) -> dict:
    from .bounds import bound_curve, curve_csv
    from .svgplot import LogLogPlot

    lams = cfg.lambda_grid()
    files = {}
    plot = LogLogPlot(f"bound integrals, d={cfg.d}", "lambda", "value")
    for name in cfg.bound_names:
        results = bound_curve(name, lams, cfg.d, cfg.bound_C)
        files[f"bounds_{name}.csv"] = curve_csv(results).encode()
        plot.add([r.lam for r in results], [r.value for r in results], None, name)
    if cfg.plot:
        files["bounds.svg"] = plot.render().encode()
    return files


def read_columns(path: Path, x_col: str, y_col: str):
    """Two float columns of a CSV; missing columns raise :class:`ConfigError`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in (x_col, y_col) if c not in cols]
        if missing:
            raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = [(float(r[x_col]), float(r[y_col])) for r in reader]
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    x, y = np.array(rows).T
    return x, y


def _run_fit(cfg: ExperimentConfig) -> dict:
    from .bounds import fit_growth
    from .svgplot import LogLogPlot

    path = cfg.fit_input_path()
    x, y = read_columns(path, cfg.fit_x, cfg.fit_y)
    sel = np.ones(x.size, dtype=bool)
    if cfg.fit_x_min is not None:
        sel &= x >= cfg.fit_x_min
    if cfg.fit_x_max is not None:
        sel &= x <= cfg.fit_x_max
    try:
        fit = fit_growth(x[sel], y[sel], cfg.fit_model)
    except ValueError as exc:
        raise ConfigError(f"fit: {exc}") from exc
    out = fit.to_dict() | {"input": cfg.fit_input, "x_column": cfg.fit_x, "y_column": cfg.fit_y}
    files = {"fit.json": _json(out)}
    if cfg.plot:
        xs = x[sel]
        plot = LogLogPlot(f"{cfg.fit_model} fit of {cfg.fit_y}", cfg.fit_x, cfg.fit_y)
        plot.add(x, y, None, "data")
        grid = np.geomspace(xs.min(), xs.max(), 64)
        plot.add(grid, fit.predict(grid), None, f"{cfg.fit_model}: parameter {fit.parameter:.4g}", line=True)
        files["fit.svg"] = plot.render().encode()
    return files


def execute(cfg: ExperimentConfig, threads: int | None = None) -> tuple[dict, int]:
    """Run ``cfg`` and write its outputs; returns (manifest, exit code)."""
    start_wall = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    n_threads = set_threads(threads)
    status = EXIT_OK
    if cfg.kind == "msd":
        files = _run_msd(cfg)
    elif cfg.kind == "laplace":
        files = _run_laplace(cfg)
    elif cfg.kind == "torus-checks":
        files, ok = _run_torus(cfg)
        status = EXIT_OK if ok else EXIT_CHECKS
    elif cfg.kind == "bounds":
        files = _run_bounds(cfg)
    else:
        files = _run_fit(cfg)
    out_dir = Path(cfg.out_dir)
    for name, data in files.items():
        atomic_write(out_dir / name, data)
    stale = sorted(p.name for p in out_dir.iterdir()
                   if p.is_file() and p.name != MANIFEST and p.name not in files and not p.name.startswith("."))
    checksums = {p: hashlib.sha256((out_dir / p).read_bytes()).hexdigest()
                 for p in sorted(set(files) | set(stale))}
    manifest = {
        "tool": "manhattan-rw",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_source": cfg.source,
        "backend": backend_name(),
        "threads": n_threads,
        "started_utc": start_wall.isoformat(timespec="seconds"),
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        "outputs": {name: {"sha256": checksums[name], "produced_by_run": name in files}
                    for name in checksums},
        "status": status,
    }
    atomic_write(out_dir / MANIFEST, _json(manifest))
    return manifest, status


# ----------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manhattan-rw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "run an experiment config"),
                            ("fit", "fit a growth law to a CSV named in an exponent-fit config")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to the key = value config file")
        p.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="override experiment.seed")
        p.add_argument("--threads", type=int, default=None,
                       help=f"worker threads for compiled kernels (default: ${THREADS_ENV} or all)")
        p.add_argument("--out", default=None, help="override output.dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config).with_overrides(args.seed, args.out)
        if args.command == "fit" and cfg.kind != "exponent-fit":
            raise ConfigError("the fit subcommand needs experiment.kind = exponent-fit")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        manifest, status = execute(cfg, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MemoryError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except Exception as exc:
        from .torus import StateSpaceTooLarge
        from .walker import EventCapExceeded

        if isinstance(exc, (EventCapExceeded, StateSpaceTooLarge)):
            print(f"resource cap exceeded: {exc}", file=sys.stderr)
            return EXIT_RESOURCE
        raise
    print(json.dumps({k: manifest[k] for k in ("status", "wall_clock_seconds")} |
                     {"out": str(Path(cfg.out_dir)), "files": sorted(manifest["outputs"])}))
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
