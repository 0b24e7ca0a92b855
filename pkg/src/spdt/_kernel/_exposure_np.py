"""Vectorised ndarray implementation of the dose kernel (fallback backend)."""

import numpy as np

NAME = "numpy"

# Below this, (w - 1 + e^-w)/w is evaluated by series to keep relative accuracy.
_PSI_SERIES_CUTOFF = 1e-2


def _phi(w):
    # (1 - e^-w)/w with phi(0) = 1; expm1 keeps small-w values exact
    out = np.ones_like(w)
    nz = w > 0.0
    out[nz] = -np.expm1(-w[nz]) / w[nz]
    return out


def _psi(w):
    # (w - 1 + e^-w)/w = 1 - phi(w); direct subtraction loses all digits as
    # w -> 0, hence the series branch
    out = np.empty_like(w)
    small = w < _PSI_SERIES_CUTOFF
    ws = w[small]
    out[small] = ws * (0.5 - ws * (1.0 / 6.0 - ws * (1.0 / 24.0 - ws / 120.0)))
    wb = w[~small]
    out[~small] = 1.0 + np.expm1(-wb) / wb
    return out


def batch_link_exposure(t_s, t_l, t_s_n, t_l_n, r, g, V, p):
    """Inhaled dose (PFU) per link; all time/rate arguments are equal-length arrays.

    The neighbour inhales over [max(t_s, t_s_n), t_l_n], split into a segment
    while the host is still present (concentration rising toward g/(rV)) and a
    segment after departure (exponential decay). Either segment may be empty.
    """
    a = np.maximum(t_s, t_s_n)
    b = t_l_n
    scale = (g * p) / (r * V)

    # segment while host present: [a, min(b, t_l)]
    d_len = np.maximum(np.minimum(b, t_l) - a, 0.0)
    w = r * d_len
    u = r * np.maximum(a - t_s, 0.0)
    direct = scale * d_len * (_psi(w) + _phi(w) * (-np.expm1(-u)))

    # segment after host departure: [max(a, t_l), b]
    a2 = np.maximum(a, t_l)
    i_len = np.maximum(b - a2, 0.0)
    stay = np.maximum(t_l - t_s, 0.0)
    ws = r * stay
    wi = r * i_len
    indirect = (
        scale * r * stay * _phi(ws) * np.exp(-r * (a2 - t_l)) * i_len * _phi(wi)
    )

    return direct + indirect
