"""Hot numerical kernels with a compiled core and a pure-Python fallback.

The compiled extension ``_ckernels`` is preferred. Setting the environment
variable ``RESALLOC_PURE_PYTHON=1`` forces the fallback; ``BACKEND`` reports
which one was selected.
"""

import os

from . import _pykernels

if os.environ.get("RESALLOC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

project_simplex_sorted = _impl.project_simplex_sorted
project_box_simplex = _impl.project_box_simplex
hungarian_min = _impl.hungarian_min

__all__ = [
    "BACKEND",
    "project_simplex_sorted",
    "project_box_simplex",
    "hungarian_min",
]
