"""Backend selection for the hot kernels.

The Monte Carlo kernels are written twice: a scalar-loop version compiled with
numba, and a vectorised pure-numpy twin.  Setting ``MANHATTAN_RW_DISABLE_NUMBA=1``
(or running without numba installed) selects the numpy path.  Both paths
consume the same random streams, so they agree on every integer output.
"""

from __future__ import annotations

import os

_FLAG = "MANHATTAN_RW_DISABLE_NUMBA"
THREADS_ENV = "MANHATTAN_RW_THREADS"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "0").strip().lower() not in ("1", "true", "yes", "on")


# The bundled TBB runtime is often older than numba expects; the portable
# workqueue layer avoids the warning and is enough for our prange loops.
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def use_numba() -> bool:
    """True when the compiled kernels should be used."""
    return HAVE_NUMBA and _numba_requested()


def backend_name() -> str:
    return "numba" if use_numba() else "numpy"


def set_threads(n: int | None) -> int:
    """Set the worker count for compiled kernels; returns the count in effect.

    ``None`` falls back to ``MANHATTAN_RW_THREADS`` and then to numba's default.
    The numpy backend is single threaded and ignores the request.
    """
    if n is None:
        env = os.environ.get(THREADS_ENV)
        n = int(env) if env else None
    if not HAVE_NUMBA:
        return 1
    if n is None:
        return numba.get_num_threads()
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
