"""Pure-numpy fallback for the hot product kernels.

Same contract as the compiled extension in _kernels.pyx; selected by
qmeas.kernels when the extension is unavailable or QMEAS_PURE_PYTHON is set.
"""
from __future__ import annotations

import numpy as np

# bound the per-call temporaries to ~8 MB even for 1e7 couplings
_CHUNK = 1 << 20


def trig_product(coeffs: np.ndarray, times: np.ndarray, sin_mask=None) -> np.ndarray:
    """prod_n f_n(coeffs[n] * t) per time, f_n = sin where sin_mask else cos.

    Log-magnitude + sign evaluation: products over up to 1e7 factors neither
    underflow nor lose the sign; an exactly-zero factor short-circuits to 0.0.
    """
    out = np.empty(times.shape, dtype=np.float64)
    n = coeffs.size
    for j, t in enumerate(times):
        logmag = 0.0
        neg = 0
        zero = False
        for lo in range(0, n, _CHUNK):
            angles = coeffs[lo:lo + _CHUNK] * t
            vals = np.cos(angles)
            if sin_mask is not None:
                seg = sin_mask[lo:lo + _CHUNK]
                if seg.any():
                    np.copyto(vals, np.sin(angles), where=seg.astype(bool))
            if np.any(vals == 0.0):
                zero = True
                break
            neg ^= int(np.count_nonzero(vals < 0.0)) & 1
            logmag += float(np.log(np.abs(vals)).sum())
        if zero:
            out[j] = 0.0
        else:
            mag = np.exp(logmag)  # underflows gracefully to 0.0
            out[j] = -mag if neg else mag
    return out


def trig_product_direct(coeffs: np.ndarray, times: np.ndarray, sin_mask=None) -> np.ndarray:
    """Naive direct product, for agreement checks against the log-domain path."""
    out = np.empty(times.shape, dtype=np.float64)
    for j, t in enumerate(times):
        angles = coeffs * t
        vals = np.cos(angles)
        if sin_mask is not None:
            vals = np.where(sin_mask.astype(bool), np.sin(angles), vals)
        out[j] = float(np.prod(vals))
    return out
