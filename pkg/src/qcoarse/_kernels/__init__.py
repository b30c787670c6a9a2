"""Hot-loop backend selection.

The compiled extension is used when present; set ``QCOARSE_PURE=1`` to force
the pure-python reference implementations (same semantics, much slower).
"""
from __future__ import annotations

import os

from qcoarse._kernels import pure as _pure

if os.environ.get("QCOARSE_PURE", "").strip() not in ("", "0"):
    _impl = _pure
else:
    try:
        from qcoarse._kernels import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

BACKEND: str = _impl.BACKEND

renewal_sweep = _impl.renewal_sweep
hsmm_sweep = _impl.hsmm_sweep
counter_ks = _impl.counter_ks
counter_descent = _impl.counter_descent

__all__ = [
    "BACKEND",
    "renewal_sweep",
    "hsmm_sweep",
    "counter_ks",
    "counter_descent",
]
