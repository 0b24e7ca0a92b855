# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dose kernel: tight C loop over link arrays.

Mirrors the ndarray backend operation for operation so both backends agree
to floating-point noise.
"""

from libc.math cimport exp, expm1

import numpy as np

NAME = "cython"


cdef inline double _phi(double w) noexcept nogil:
    # (1 - e^-w)/w with phi(0) = 1
    if w <= 0.0:
        return 1.0
    return -expm1(-w) / w


cdef inline double _psi(double w) noexcept nogil:
    # (w - 1 + e^-w)/w = 1 - phi(w); series below 1e-2 to avoid cancellation
    if w < 1e-2:
        return w * (0.5 - w * (1.0 / 6.0 - w * (1.0 / 24.0 - w / 120.0)))
    return 1.0 + expm1(-w) / w


def batch_link_exposure(double[::1] t_s, double[::1] t_l, double[::1] t_s_n,
                        double[::1] t_l_n, double[::1] r,
                        double g, double V, double p):
    """Inhaled dose (PFU) per link; all time/rate arguments are equal-length arrays."""
    cdef Py_ssize_t n = t_s.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double a, b, scale, d_len, w, u, direct
    cdef double a2, i_len, stay, ws, wi, indirect, ri

    with nogil:
        for i in range(n):
            ri = r[i]
            a = t_s[i] if t_s[i] > t_s_n[i] else t_s_n[i]
            b = t_l_n[i]
            scale = (g * p) / (ri * V)

            # segment while host present: [a, min(b, t_l)]
            d_len = (b if b < t_l[i] else t_l[i]) - a
            if d_len < 0.0:
                d_len = 0.0
            w = ri * d_len
            u = ri * (a - t_s[i])
            if u < 0.0:
                u = 0.0
            direct = scale * d_len * (_psi(w) + _phi(w) * (-expm1(-u)))

            # segment after host departure: [max(a, t_l), b]
            a2 = a if a > t_l[i] else t_l[i]
            i_len = b - a2
            if i_len < 0.0:
                i_len = 0.0
            stay = t_l[i] - t_s[i]
            if stay < 0.0:
                stay = 0.0
            ws = ri * stay
            wi = ri * i_len
            indirect = (scale * ri * stay * _phi(ws)
                        * exp(-ri * (a2 - t_l[i])) * i_len * _phi(wi))

            out[i] = direct + indirect
    return out_arr
