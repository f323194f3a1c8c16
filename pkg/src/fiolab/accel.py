"""Numba/numpy backend switch.

Set FIOLAB_PURE_NUMPY=1 to force the vectorized numpy fallbacks; by default
the jitted kernels are used when numba imports cleanly. `benchmarks/
bench_loops.py` times the two paths against each other.
"""

import os

USE_NUMBA = os.environ.get("FIOLAB_PURE_NUMPY", "0") != "1"

if USE_NUMBA:
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if not USE_NUMBA:
    prange = range

    def njit(*args, **kwargs):
        """Pass-through decorator so jitted code still defines plain functions."""
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap
