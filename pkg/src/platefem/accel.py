"""Optional numba acceleration for the hot numeric kernels.

The environment variable ``PLATEFEM_PURE_NUMPY=1`` forces the pure
numpy/Python code paths even when numba is installed; this is the knob
used by the kernel benchmark and by CI to exercise both paths.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

PURE_NUMPY = os.environ.get("PLATEFEM_PURE_NUMPY", "0") == "1"
USE_NUMBA = HAVE_NUMBA and not PURE_NUMPY


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise.

    Decorated functions keep a ``py_func`` attribute in both modes so the
    benchmark can always time the uncompiled version.
    """
    if USE_NUMBA:
        return numba.njit(*args, cache=True, **kwargs)

    def wrap(func):
        func.py_func = func
        return func

    if args and callable(args[0]):
        return wrap(args[0])
    return wrap
