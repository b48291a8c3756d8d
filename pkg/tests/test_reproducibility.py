"""Outputs depend on the config and seed only, not on worker count or backend."""

import json
import os
import subprocess
import sys

import pytest

from manhattan_rw._accel import HAVE_NUMBA

MSD = """experiment.kind = msd
experiment.seed = 31
model.d = 2
mc.n_paths = 600
grid.t_max = 200
grid.per_decade = 6
output.plot = false
"""

LAPLACE = """experiment.kind = laplace
experiment.seed = 32
model.d = 3
model.oriented_axes = 1
mc.n_paths = 300
grid.lambdas = 1, 0.1, 0.01
output.plot = false
"""


def _run(cfg, out, threads, env_extra=None):
    env = dict(os.environ, NUMBA_NUM_THREADS="4", **(env_extra or {}))
    cmd = [sys.executable, "-m", "manhattan_rw.cli", "run", str(cfg), "--out", str(out)]
    if threads is not None:
        cmd += ["--threads", str(threads)]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("text,name", [(MSD, "msd.csv"), (LAPLACE, "laplace.csv")], ids=["msd", "laplace"])
def test_thread_count_invariance(tmp_path, text, name):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(text)
    a = _run(cfg, tmp_path / "t1", 1)
    b = _run(cfg, tmp_path / "t4", 4)
    c = _run(cfg, tmp_path / "env2", None, {"MANHATTAN_RW_THREADS": "2"})
    data = (a / name).read_bytes()
    assert data == (b / name).read_bytes() == (c / name).read_bytes()
    threads = [json.loads((d / "manifest.json").read_text())["threads"] for d in (a, b, c)]
    assert threads == [1, 4, 2]
    summary = name.replace(".csv", "_summary.json")
    assert (a / summary).read_bytes() == (b / summary).read_bytes()


def test_numpy_backend_reproduces_msd(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(MSD)
    a = _run(cfg, tmp_path / "nb", 1)
    b = _run(cfg, tmp_path / "np", 1, {"MANHATTAN_RW_DISABLE_NUMBA": "1"})
    assert (a / "msd.csv").read_bytes() == (b / "msd.csv").read_bytes()
