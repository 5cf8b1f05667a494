"""Select the compiled kernels when available, else the numpy fallback.

Set ``MLQMC_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("MLQMC_PURE_PYTHON"):
    core = _fallback
    COMPILED = False
else:
    try:
        from . import _core as core
        COMPILED = True
    except ImportError:  # extension not built
        core = _fallback
        COMPILED = False

__all__ = ["core", "COMPILED"]
