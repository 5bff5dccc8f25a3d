"""Kernel backend selection.

At import time the compiled core (``_corefast``, built by setup.py) is
preferred; if it is missing the numpy fallback (``_corepy``) takes over.
Set SWINFX_BACKEND=numpy or SWINFX_BACKEND=compiled to force one; forcing
the compiled core when it is not built raises ImportError rather than
silently degrading.
"""

import os

_forced = os.environ.get("SWINFX_BACKEND", "").strip().lower()

if _forced == "numpy":
    from . import _corepy as kernels
elif _forced == "compiled":
    from . import _corefast as kernels
elif _forced:
    raise ImportError(f"unknown SWINFX_BACKEND {_forced!r}; use numpy or compiled")
else:
    try:
        from . import _corefast as kernels
    except ImportError:
        from . import _corepy as kernels

backend_name: str = kernels.NAME
