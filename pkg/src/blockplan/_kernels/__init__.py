"""Kernel backend selection.

The hot loops (best-response dynamics, the welfare dynamic program and
batch regret scans) exist twice: a Cython extension (ckernels) and a
pure-Python/numpy twin (pykernels) with identical semantics. The compiled
backend is used when the extension built; set BLOCKPLAN_BACKEND=py or
BLOCKPLAN_BACKEND=c to force one explicitly.
"""

from __future__ import annotations

import os

_forced = os.environ.get("BLOCKPLAN_BACKEND")

if _forced == "py":
    from . import pykernels as impl
elif _forced == "c":
    from . import ckernels as impl  # type: ignore[no-redef]
elif _forced:
    raise ImportError(f"BLOCKPLAN_BACKEND must be 'c' or 'py', got {_forced!r}")
else:
    try:
        from . import ckernels as impl  # type: ignore[no-redef]
    except ImportError:
        from . import pykernels as impl

BACKEND: str = impl.NAME
run_dynamics = impl.run_dynamics
dp_layers = impl.dp_layers
regret_gaps = impl.regret_gaps
