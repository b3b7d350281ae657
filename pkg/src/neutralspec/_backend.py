"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation.  Set ``NEUTRALSPEC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if not os.environ.get("NEUTRALSPEC_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "compiled"

moment_integral = kernels.moment_integral
transform_sum = kernels.transform_sum
cauchy_scaled = kernels.cauchy_scaled
