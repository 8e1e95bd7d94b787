"""Kernel backend selection.

Hot loops exist twice: a numba ``@njit`` version and a pure-numpy fallback.
``GRAVCAT_DISABLE_NUMBA=1`` (or numba being unimportable) selects the fallback.
The flag is read on every dispatch so tests can flip it with ``monkeypatch``.
"""
import os

try:
    import numba
    from numba import njit, prange
    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skip probing an outdated TBB before falling back
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f

    prange = range

DISABLE_ENV = "GRAVCAT_DISABLE_NUMBA"
THREADS_ENV = "GRAVCAT_THREADS"


def numba_enabled():
    if not HAVE_NUMBA:
        return False
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes", "on")


def backend_name():
    return "numba" if numba_enabled() else "numpy"


def default_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            n = 0
        if n > 0:
            return n
    return os.cpu_count() or 1


def set_threads(n):
    """Set the parallelism degree for numba ``prange`` loops.

    Requests above the number of threads numba was launched with are clamped;
    results never depend on this value because every parallel loop writes
    disjoint rows and reduces within a row sequentially.
    """
    if n is None:
        n = default_threads()
    n = max(1, int(n))
    if HAVE_NUMBA:
        n = min(n, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(n)
    return n
