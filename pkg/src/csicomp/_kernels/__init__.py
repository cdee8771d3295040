"""Allocation kernel dispatch.

The compiled Cython extension is preferred when it imported successfully;
otherwise the pure-Python reference kernels are used. ``use_backend`` lets
tests and benchmarks pin one implementation explicitly.
"""

from __future__ import annotations

import numpy as np

from . import _pykernels

try:
    from . import _cykernels
except ImportError:  # extension not built; pure Python carries the load
    _cykernels = None

_impl = _cykernels if _cykernels is not None else _pykernels


def backend_name() -> str:
    """Name of the active kernel backend ("cython" or "python")."""
    return "cython" if _impl is _cykernels else "python"


def available_backends() -> tuple:
    return ("python", "cython") if _cykernels is not None else ("python",)


def use_backend(name: str) -> None:
    """Pin the kernel backend; raises if the compiled one is unavailable."""
    global _impl
    if name == "python":
        _impl = _pykernels
    elif name == "cython":
        if _cykernels is None:
            raise RuntimeError("compiled kernels are not available")
        _impl = _cykernels
    else:
        raise ValueError(f"unknown backend {name!r}")


def cubic_roots(a3: float, a2: float, a1: float, a0: float) -> list:
    """Real roots of a cubic polynomial, ascending."""
    return _impl.cubic_roots(float(a3), float(a2), float(a1), float(a0))


def allocate_at_mu(lam, lam_b, mu, d_min_rel=1e-12, interior_only=False):
    """Per-mode noise levels minimizing e_i + mu*r_i; returns (d, r, e)."""
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    lam_b = np.ascontiguousarray(lam_b, dtype=np.float64)
    return _impl.allocate_at_mu(lam, lam_b, float(mu), float(d_min_rel), bool(interior_only))
