"""Hot-kernel backend selection.

The Cython extension (resilsim.kernels._core) is used when it was built;
otherwise the pure numpy fallback takes over.  Both implement identical
semantics and produce bit-identical outputs.  Set RESILSIM_BACKEND to
"cython" or "python" to force a backend (forcing an unavailable one is an
error).
"""

from __future__ import annotations

import os

from . import pure
from .pure import (  # noqa: F401  (shared constants)
    CAUSE_BASE,
    CAUSE_ESCALATED,
    EV_FAILURE,
    EV_REPAIR,
    OP_LEAF,
    OP_PARALLEL,
    OP_SERIAL,
)

try:
    from . import _core
except ImportError:
    _core = None

_forced = os.environ.get("RESILSIM_BACKEND", "").strip().lower()
if _forced == "python":
    _impl = pure
elif _forced == "cython":
    if _core is None:
        raise ImportError(
            "RESILSIM_BACKEND=cython but the compiled extension is not available"
        )
    _impl = _core
elif _forced:
    raise ImportError(f"unknown RESILSIM_BACKEND value {_forced!r}")
else:
    _impl = _core if _core is not None else pure

BACKEND = _impl.BACKEND_NAME
mc_count_failures = _impl.mc_count_failures
sim_chunk = _impl.sim_chunk


def available_backends():
    """Names of importable kernel implementations."""
    names = ["python"]
    if _core is not None:
        names.insert(0, "cython")
    return tuple(names)
