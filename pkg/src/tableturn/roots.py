"""Bisection on a bracketed sign change, scalar and vectorized.

Only bisection is used: the brackets come from intermediate-value arguments
and the functions involved are continuous but not necessarily smooth.
"""

from __future__ import annotations

import numpy as np

XTOL = 1e-12
MAXITER = 64


class BracketError(ValueError):
    """The endpoint values do not straddle zero."""


def bisect(f, lo: float, hi: float, flo: float | None = None, fhi: float | None = None,
           xtol: float = XTOL, maxiter: int = MAXITER, ftol: float = 0.0):
    """Find a zero of ``f`` in [lo, hi].  Returns ``(x, f(x), iterations)``.

    Stops when the bracket is narrower than ``xtol``, after ``maxiter`` halvings
    or as soon as ``|f| <= ftol``.  The returned point is always one at which
    ``f`` was evaluated: the bracket end with the smaller ``|f|``.
    """
    flo = f(lo) if flo is None else flo
    fhi = f(hi) if fhi is None else fhi
    if abs(flo) <= ftol:
        return lo, flo, 0
    if abs(fhi) <= ftol:
        return hi, fhi, 0
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f = {flo}, {fhi}")
    it = 0
    while hi - lo > xtol and it < maxiter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = f(mid)
        it += 1
        if abs(fmid) <= ftol:
            return mid, fmid, it
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
    if abs(flo) <= abs(fhi):
        return lo, flo, it
    return hi, fhi, it


def bisect_batch(f, lo, hi, flo, fhi, xtol: float = XTOL, maxiter: int = MAXITER):
    """Elementwise bisection of a vectorized ``f`` on arrays of brackets.

    Entries whose bracket has no sign change come back as NaN.  Each entry
    evolves independently of the others.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = np.array(flo, dtype=float)
    fhi = np.array(fhi, dtype=float)
    bad = (np.sign(flo) == np.sign(fhi)) & (flo != 0) | ~np.isfinite(flo) | ~np.isfinite(fhi)
    done = bad | (flo == 0) | (fhi == 0)
    # exact zeros at an end collapse the bracket onto that end
    hi = np.where(flo == 0, lo, hi)
    fhi = np.where(flo == 0, flo, fhi)
    lo = np.where((fhi == 0) & ~(flo == 0), hi, lo)
    flo = np.where((fhi == 0) & ~(flo == 0), fhi, flo)
    for _ in range(maxiter):
        active = ~done & (hi - lo > xtol)
        if not active.any():
            break
        mid = np.where(active, 0.5 * (lo + hi), lo)
        fmid = np.asarray(f(mid), dtype=float)
        same = np.sign(fmid) == np.sign(flo)
        take_lo = active & same
        take_hi = active & ~same
        lo = np.where(take_lo, mid, lo)
        flo = np.where(take_lo, fmid, flo)
        hi = np.where(take_hi, mid, hi)
        fhi = np.where(take_hi, fmid, fhi)
        done = done | (active & (fmid == 0))
    pick_lo = np.abs(flo) <= np.abs(fhi)
    x = np.where(pick_lo, lo, hi)
    fx = np.where(pick_lo, flo, fhi)
    x = np.where(bad, np.nan, x)
    fx = np.where(bad, np.nan, fx)
    return x, fx
