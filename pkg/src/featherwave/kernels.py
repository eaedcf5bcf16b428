"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the pure-Python
twin.  Set ``FEATHERWAVE_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

fallback = _fallback

try:
    if os.environ.get("FEATHERWAVE_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by FEATHERWAVE_BACKEND")
    from . import _kernels as compiled
except ImportError:
    compiled = None

active = compiled if compiled is not None else _fallback
BACKEND = "cython" if compiled is not None else "python"

bsr_matvec = active.bsr_matvec
lp_prepare = active.lp_prepare
lp_replay = active.lp_replay
lp_predict = active.lp_predict
lp_push = active.lp_push


def get_backend(name: str | None = None):
    """Return a kernel module by name (``"cython"``/``"python"``), default active."""
    if name is None:
        return active
    if name == "python":
        return _fallback
    if name == "cython":
        if compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return compiled
    raise ValueError(f"unknown backend {name!r}")
