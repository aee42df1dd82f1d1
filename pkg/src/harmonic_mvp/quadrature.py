"""Vectorised adaptive Simpson quadrature.

All active subintervals of one refinement level are evaluated in a single
call of the integrand, so the integrand must accept numpy arrays.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

ABS_TOL = 1e-10
MAX_DEPTH = 40


def adaptive_simpson(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = ABS_TOL,
    max_depth: int = MAX_DEPTH,
) -> float:
    """Integrate ``func`` over ``[a, b]`` to absolute tolerance ``tol``.

    Uses the classical acceptance test ``|S_left + S_right - S| <= 15 tol``
    with Richardson correction; the tolerance is halved at each split.  An
    interval is also accepted once the error estimate falls to roundoff level
    relative to its own integral, so large integrands cannot force splitting
    down to ``max_depth``.
    Intervals still unresolved after ``max_depth`` levels are accepted with
    their current estimate.
    """
    if b == a:
        return 0.0
    if b < a:
        return -adaptive_simpson(func, b, a, tol, max_depth)

    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    f_lo = np.asarray(func(lo), dtype=float)
    f_hi = np.asarray(func(hi), dtype=float)
    mid = 0.5 * (lo + hi)
    f_mid = np.asarray(func(mid), dtype=float)
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    tols = np.array([tol])

    total = 0.0
    for depth in range(max_depth + 1):
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        vals = np.asarray(func(np.concatenate([lm, rm])), dtype=float)
        f_lm, f_rm = vals[: lo.size], vals[lo.size:]
        left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid)
        right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rm + f_hi)
        with np.errstate(invalid="ignore"):
            diff = left + right - whole
        if not np.all(np.isfinite(diff)):
            raise FloatingPointError("non-finite integrand value inside the interval")
        # below a few ulps of the piece itself the estimate is roundoff noise
        floor = 64.0 * np.finfo(float).eps * (np.abs(left) + np.abs(right))
        done = np.abs(diff) <= 15.0 * np.maximum(tols, floor)
        if depth == max_depth:
            done[:] = True
        total += float(np.sum((left + right + diff / 15.0)[done]))
        keep = ~done
        if not keep.any():
            break
        # split every unresolved interval into its two halves
        lo = np.concatenate([lo[keep], mid[keep]])
        hi_new = np.concatenate([mid[keep], hi[keep]])
        f_lo = np.concatenate([f_lo[keep], f_mid[keep]])
        f_hi = np.concatenate([f_mid[keep], f_hi[keep]])
        f_mid = np.concatenate([f_lm[keep], f_rm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        tols = np.concatenate([tols[keep], tols[keep]]) * 0.5
        hi = hi_new
        mid = 0.5 * (lo + hi)
    return total


def integrate_pieces(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Iterable[float] = (),
    tol: float = ABS_TOL,
) -> float:
    """Integrate over ``[a, b]`` after splitting at the given breakpoints.

    Splitting at kinks and jumps of the integrand keeps Simpson's rule in
    its smooth regime; the tolerance budget is shared evenly.
    """
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a, *cuts, b]
    share = tol / (len(edges) - 1)
    return sum(adaptive_simpson(func, lo, hi, share) for lo, hi in zip(edges[:-1], edges[1:]))
