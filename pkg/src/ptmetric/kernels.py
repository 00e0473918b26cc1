"""Select the RK4 kernel at import time.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. Set ``PTMETRIC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _rk4_py

BACKEND = "python"
rk4_linear_py = _rk4_py.rk4_linear
rk4_linear_ext = None

try:
    from ._rk4 import rk4_linear as rk4_linear_ext  # type: ignore[no-redef]
except ImportError:  # extension not built
    pass

if rk4_linear_ext is not None and os.environ.get("PTMETRIC_PURE_PYTHON", "") not in ("1", "true"):
    rk4_linear = rk4_linear_ext
    BACKEND = "cython"
else:
    rk4_linear = rk4_linear_py
