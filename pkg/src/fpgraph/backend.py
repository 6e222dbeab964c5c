"""Kernel backend selection.

The compiled extension is preferred; the pure-Python fallback is used when it
is missing or when ``FPGRAPH_PURE_PYTHON=1`` is set. Both expose the same
functions with bit-identical float64 behaviour.
"""

import os

from . import _kernels_py

if os.environ.get("FPGRAPH_PURE_PYTHON", "0") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME
matmul = _impl.matmul
gat_forward = _impl.gat_forward
gat_backward = _impl.gat_backward


def active_backend() -> str:
    """Name of the kernel implementation in use: 'compiled' or 'python'."""
    return BACKEND
