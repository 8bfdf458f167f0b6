"""Backend selection for the hot loops.

The compiled extension is used when importable; setting ``SPLATFIELD_PURE_PYTHON=1``
forces the numpy fallback. Both backends expose the same functions.
"""

import os

from . import _pykernels

python_backend = _pykernels

if os.environ.get("SPLATFIELD_PURE_PYTHON", "") not in ("", "0"):
    backend = _pykernels
    BACKEND = "python"
    compiled_backend = None
else:
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        backend = _pykernels
        BACKEND = "python"
        compiled_backend = None
    else:
        backend = _ckernels
        BACKEND = "cython"
        compiled_backend = _ckernels

def _threads_from_env():
    raw = os.environ.get("SPLATFIELD_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


_num_threads = _threads_from_env()


def set_num_threads(n):
    """Cap the number of threads used by the compiled kernels."""
    global _num_threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _num_threads = int(n)


def get_num_threads():
    return _num_threads


__all__ = [
    "BACKEND",
    "backend",
    "compiled_backend",
    "python_backend",
    "get_num_threads",
    "set_num_threads",
]
