"""Adaptive Simpson quadrature and bisection primitives.

All integrals in the package go through :func:`integrate` so that every
consumer (measure evaluation, solver first-order conditions, oracle cell
weights) shares one rule: adaptive Simpson with absolute tolerance 1e-10,
relative tolerance 1e-9 and maximum recursion depth 60.  Integrands are
smooth except at isolated kinks, which callers declare via ``splits``.
"""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from collections.abc import Callable, Iterable

from .errors import NumericError

ABS_TOL = 1e-10
REL_TOL = 1e-9
MAX_DEPTH = 60


def _simpson(fa: float, fm: float, fb: float, width: float) -> float:
    return width / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, m, b, fa, fm, fb, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    err = left + right - whole
    if abs(err) <= 15.0 * tol or (b - a) <= 1e-15 * (abs(a) + abs(b) + 1.0):
        return left + right + err / 15.0
    if depth <= 0:
        raise NumericError(
            f"quadrature did not converge on [{a!r}, {b!r}]: "
            f"local error {abs(err):.3e} exceeds tolerance {15.0 * tol:.3e} at max depth"
        )
    half = 0.5 * tol
    return _adaptive(f, a, lm, m, fa, flm, fm, left, half, depth - 1) + _adaptive(
        f, m, rm, b, fm, frm, fb, right, half, depth - 1
    )


def _integrate_piece(f, a, b, abs_tol, rel_tol, max_depth):
    if b <= a:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson(fa, fm, fb, b - a)
    tol = max(abs_tol, rel_tol * abs(whole))
    return _adaptive(f, a, m, b, fa, fm, fb, whole, tol, max_depth)


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    splits: Iterable[float] = (),
    abs_tol: float = ABS_TOL,
    rel_tol: float = REL_TOL,
    max_depth: int = MAX_DEPTH,
) -> float:
    """Integrate ``f`` over ``[a, b]``, splitting at declared interior kinks."""
    if b <= a:
        return 0.0
    nodes = sorted({a, b, *(s for s in splits if a < s < b and math.isfinite(s))})
    total = 0.0
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        total += _integrate_piece(f, lo, hi, abs_tol, rel_tol, max_depth)
    return total


class CumulativeIntegral:
    """Memoized antiderivative ``x -> int_lo^x f(t) dt``.

    Solvers evaluate running integrals of ``h(S_X(.))`` at hundreds of nearby
    points during scans and bisection; caching previously integrated prefixes
    keeps the total cost close to a single pass over the domain.
    """

    def __init__(self, f: Callable[[float], float], lo: float, splits: Iterable[float] = ()):
        self._f = f
        self._lo = lo
        self._xs = [lo]
        self._vals = [0.0]
        self._splits = tuple(sorted({s for s in splits if s > lo and math.isfinite(s)}))

    def __call__(self, x: float) -> float:
        if x <= self._lo:
            return 0.0
        i = bisect_right(self._xs, x) - 1
        base_x = self._xs[i]
        base_v = self._vals[i]
        if base_x == x:
            return base_v
        val = base_v + integrate(self._f, base_x, x, splits=self._splits)
        insort(self._xs, x)
        self._vals.insert(self._xs.index(x), val)
        return val


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    f_lo: float | None = None,
    f_hi: float | None = None,
    x_tol: float = 0.0,
    max_iter: int = 200,
) -> float:
    """Root of ``f`` on a sign-change bracket ``[lo, hi]`` by plain bisection."""
    a, b = lo, hi
    fa = f(a) if f_lo is None else f_lo
    fb = f(b) if f_hi is None else f_hi
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0.0) == (fb > 0.0):
        raise NumericError(f"no sign change on bracket [{a!r}, {b!r}]: f(a)={fa!r}, f(b)={fb!r}")
    tol = max(x_tol, 1e-14 * (abs(a) + abs(b) + 1.0))
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0.0) == (fa > 0.0):
            a, fa = m, fm
        else:
            b, fb = m, fm
        if b - a <= tol:
            break
    return 0.5 * (a + b)
