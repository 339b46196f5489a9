"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once, at import time, from the environment variable
``LOGBILINEAR_BACKEND`` (``numba`` or ``numpy``).  The default is ``numba``
when it can be imported and ``numpy`` otherwise.
"""

from __future__ import annotations

import os
import warnings

from . import _numpy as numpy_kernels
from ._numpy import CONVERGED, HALVING_FAILED, MAX_ITER, NON_FINITE, SINGULAR_HESSIAN

ENV_VAR = "LOGBILINEAR_BACKEND"

try:
    from . import _numba as numba_kernels
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba_kernels = None


def _select():
    requested = os.environ.get(ENV_VAR, "").strip().lower() or None
    if requested not in (None, "numba", "numpy"):
        warnings.warn(f"{ENV_VAR}={requested!r} not recognised; using default backend")
        requested = None
    if requested == "numpy" or numba_kernels is None:
        return "numpy", numpy_kernels
    return "numba", numba_kernels


BACKEND, _active = _select()

ipf_sweep = _active.ipf_sweep
newton_poisson = _active.newton_poisson
ctdc = _active.ctdc
mr_covariance = _active.mr_covariance


def backend_name() -> str:
    return BACKEND


__all__ = [
    "BACKEND",
    "CONVERGED",
    "ENV_VAR",
    "HALVING_FAILED",
    "MAX_ITER",
    "NON_FINITE",
    "SINGULAR_HESSIAN",
    "backend_name",
    "ctdc",
    "ipf_sweep",
    "mr_covariance",
    "newton_poisson",
    "numba_kernels",
    "numpy_kernels",
]
