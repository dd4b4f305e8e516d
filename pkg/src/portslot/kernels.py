"""Kernel backend selection.

Imports the compiled kernels when available, otherwise the pure-Python
fallbacks.  Set ``PORTSLOT_PURE_PYTHON=1`` to force the fallback (used by
the benchmark and the kernel parity tests).
"""

from __future__ import annotations

import os

if os.environ.get("PORTSLOT_PURE_PYTHON") == "1":
    from portslot import _pykernels as _impl
else:
    try:
        from portslot import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from portslot import _pykernels as _impl

BACKEND: str = _impl.BACKEND
serve_fifo = _impl.serve_fifo
nondomination_ranks = _impl.nondomination_ranks
