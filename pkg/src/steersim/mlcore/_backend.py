"""Kernel selection: compiled extension when importable, numpy otherwise.

Set ``STEERSIM_PURE_PYTHON=1`` to force the numpy kernels.
"""

import os

from . import _kernels_py

if os.environ.get("STEERSIM_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"
