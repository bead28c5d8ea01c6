"""Hot-loop kernels with a compiled core and a pure numpy fallback.

The compiled module is preferred when importable; set
RANDPURSUIT_PURE_PYTHON=1 to force the fallback.  `BACKEND` names the active
implementation so callers and benchmarks can report it.
"""

import os

if os.environ.get("RANDPURSUIT_PURE_PYTHON"):
    from . import _fallback as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _fallback as _impl

        BACKEND = "numpy"

rhe_ensemble_steps = _impl.rhe_ensemble_steps
reuse_sweep = _impl.reuse_sweep
frp_quadratic = _impl.frp_quadratic


def backend():
    """Name of the active kernel implementation: 'cython' or 'numpy'."""
    return BACKEND
