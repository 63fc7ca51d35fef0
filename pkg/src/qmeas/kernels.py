"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set QMEAS_PURE_PYTHON=1 to force the fallback (useful for cross-checking the
two implementations and for platforms without a C toolchain).
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from .errors import ValidationError

if os.environ.get("QMEAS_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
    HAVE_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        HAVE_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        HAVE_COMPILED = False

BACKEND = "compiled" if HAVE_COMPILED else "pure-python"


def _prepare(coeffs, times, sin_mask):
    c = np.ascontiguousarray(coeffs, dtype=np.float64)
    t = np.ascontiguousarray(np.atleast_1d(np.asarray(times, dtype=np.float64)))
    if c.ndim != 1:
        raise ValidationError("coeffs must be one-dimensional")
    if t.ndim != 1:
        raise ValidationError("times must be scalar or one-dimensional")
    if sin_mask is None:
        m = None
    else:
        m = np.ascontiguousarray(np.asarray(sin_mask, dtype=bool), dtype=np.uint8)
        if m.shape != c.shape:
            raise ValidationError("sin_mask must match coeffs in shape")
    return c, t, m


def trig_product(coeffs, times, sin_mask=None) -> np.ndarray:
    """prod_n f_n(coeffs[n]*t) for each t; f_n = sin where sin_mask else cos."""
    c, t, m = _prepare(coeffs, times, sin_mask)
    return _impl.trig_product(c, t, m)


def trig_product_direct(coeffs, times, sin_mask=None) -> np.ndarray:
    """Reference direct product (always pure numpy); for agreement checks."""
    c, t, m = _prepare(coeffs, times, sin_mask)
    return _kernels_py.trig_product_direct(c, t, m)
