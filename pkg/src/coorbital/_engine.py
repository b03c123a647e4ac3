"""Kernel engine selection: numba-jitted fast path or pure-Python/numpy fallback.

The hot numerical kernels (vector fields, Kepler solves, the RK stepper) are
written in nopython-compatible style and compiled with numba when available.
Setting the environment variable ``COORBITAL_JIT=0`` before import forces the
plain interpreted path.  Both paths execute the identical source; each engine
is fully deterministic run-to-run, and the two engines agree to integrator
tolerance (they may differ in the last ulp per operation).
"""

import os

_flag = os.environ.get("COORBITAL_JIT", "1").strip().lower()
_want_jit = _flag not in ("0", "false", "no", "off")

if _want_jit:
    try:
        from numba import njit as _njit
        JIT_ENABLED = True
    except ImportError:
        JIT_ENABLED = False
else:
    JIT_ENABLED = False


def njit_or_py(*args, **kwargs):
    """``numba.njit`` when the jit engine is active, identity otherwise."""
    if JIT_ENABLED:
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


def engine_name():
    return "numba" if JIT_ENABLED else "numpy"
