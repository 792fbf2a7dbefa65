"""Backend selection for the hot kernels.

The compiled extension is used when importable; set ``UNLOAD_RL_PURE=1`` to
force the NumPy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("UNLOAD_RL_PURE", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

adam_step = _impl.adam_step
polyak = _impl.polyak

__all__ = ["BACKEND", "adam_step", "polyak"]
