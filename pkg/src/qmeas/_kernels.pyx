# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled single-pass kernels for long trigonometric products."""

from libc.math cimport cos, sin, log, exp, fabs

import numpy as np


def trig_product(const double[::1] coeffs, const double[::1] times, mask_obj):
    """prod_n f_n(coeffs[n] * t) per time, f_n = sin where mask else cos.

    Log-magnitude + sign evaluation with an exact-zero short-circuit; one
    pass over the couplings per time point, no temporaries.
    """
    cdef Py_ssize_t n = coeffs.shape[0]
    cdef Py_ssize_t nt = times.shape[0]
    out_arr = np.empty(nt, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef const unsigned char[::1] mask
    cdef bint has_mask = mask_obj is not None
    if has_mask:
        mask = mask_obj
    cdef Py_ssize_t i, j
    cdef double t, v, prod, logmag, comp, y, s
    cdef int neg
    cdef bint zero
    with nogil:
        for j in range(nt):
            t = times[j]
            prod = 1.0
            logmag = 0.0
            comp = 0.0
            neg = 0
            zero = False
            for i in range(n):
                if has_mask and mask[i]:
                    v = sin(coeffs[i] * t)
                else:
                    v = cos(coeffs[i] * t)
                if v == 0.0:
                    zero = True
                    break
                prod *= v
                # |v| <= 1 so prod only shrinks; fold it into the log
                # accumulator well before it can underflow.  Batching the
                # (expensive) log this way also tightens accuracy: a run of
                # raw multiplies rounds once per factor, while per-factor
                # logs each round at the magnitude of the whole sum.
                if fabs(prod) < 1e-150:
                    if prod < 0.0:
                        neg ^= 1
                    # Kahan compensation: plain accumulation drifts to
                    # ~1e-12 relative once |logmag| reaches several hundred
                    y = log(fabs(prod)) - comp
                    s = logmag + y
                    comp = (s - logmag) - y
                    logmag = s
                    prod = 1.0
            if zero:
                out[j] = 0.0
            else:
                if prod < 0.0:
                    neg ^= 1
                y = log(fabs(prod)) - comp
                s = logmag + y
                logmag = s
                if neg:
                    out[j] = -exp(logmag)
                else:
                    out[j] = exp(logmag)
    return out_arr
