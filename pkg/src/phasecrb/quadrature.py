"""Adaptive Gauss-Kronrod quadrature for even spectra on [0, inf).

The integrands met in this package are smooth, positive and decay (or, for
the Fisher-information integrand, fall off) as a power law.  Finite pieces
are handled by a globally adaptive 15-point Gauss-Kronrod rule that is
vectorised over intervals; the semi-infinite remainder is split into an
analytic power-law term plus a numerically integrated correction in the
variable ``s = cutoff / omega``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureError",
    "QuadResult",
    "gk15_adaptive",
    "integrate_half_line",
]

# 15-point Kronrod abscissae (positive half) and weights, with the embedded
# 7-point Gauss weights for the odd-indexed abscissae.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes, ascending
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[1:7:2] = _WG[:3]
_GAUSS[7] = _WG[3]
_GAUSS[9:14:2] = _WG[2::-1]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, *, value: float, error: float, intervals: int):
        super().__init__(f"{message} (value={value!r}, error={error!r}, intervals={intervals})")
        self.value = value
        self.error = error
        self.intervals = intervals


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    evaluations: int


def _gk_rule(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][0]
        raise QuadratureError(f"integrand not finite at {bad!r}", value=np.nan,
                              error=np.inf, intervals=len(a))
    k = half * (fx @ _KRONROD)
    g = half * (fx @ _GAUSS)
    return k, np.abs(k - g)


def gk15_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float],
    epsrel: float = 1e-10,
    epsabs: float = 0.0,
    max_intervals: int = 20000,
) -> QuadResult:
    """Integrate ``f`` over ``[breakpoints[0], breakpoints[-1]]``.

    ``f`` must accept a 1-D array.  The error estimate is the raw
    Kronrod-minus-Gauss difference summed over intervals, which is
    pessimistic for smooth integrands.
    """
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    if pts.size < 2:
        raise ValueError("need at least two distinct breakpoints")
    a, b = pts[:-1], pts[1:]
    vals, errs = _gk_rule(f, a, b)
    nevals = 15 * a.size
    frozen_val = 0.0
    frozen_err = 0.0
    while True:
        total = frozen_val + vals.sum()
        err = frozen_err + errs.sum()
        tol = max(epsabs, epsrel * abs(total))
        if err <= tol:
            return QuadResult(float(total), float(err), nevals)
        if a.size + 1 > max_intervals:
            raise QuadratureError("interval limit reached", value=float(total),
                                  error=float(err), intervals=a.size)
        # Bisect the worst intervals until the rest could meet half the budget.
        order = np.argsort(errs)[::-1]
        remaining = err - np.cumsum(errs[order])
        nsplit = int(np.searchsorted(-remaining, -0.5 * tol)) + 1
        chosen = order[:nsplit]
        keep = np.ones(a.size, dtype=bool)
        keep[chosen] = False
        ca, cb = a[chosen], b[chosen]
        cm = 0.5 * (ca + cb)
        # Intervals at floating-point resolution cannot be refined further.
        tiny = (cm <= ca) | (cm >= cb) | ((cb - ca) <= 4 * np.finfo(float).eps * np.abs(cm))
        if np.all(tiny):
            raise QuadratureError("roundoff limit reached", value=float(total),
                                  error=float(err), intervals=a.size)
        frozen_val += vals[chosen][tiny].sum()
        frozen_err += errs[chosen][tiny].sum()
        ca, cb, cm = ca[~tiny], cb[~tiny], cm[~tiny]
        na = np.concatenate([ca, cm])
        nb = np.concatenate([cm, cb])
        nv, ne = _gk_rule(f, na, nb)
        nevals += 15 * na.size
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])


@dataclass(frozen=True)
class HalfLineResult:
    value: float
    error: float
    tail: float
    cutoff: float
    evaluations: int


def integrate_half_line(
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float],
    tail_power: float,
    tail_coeff: float,
    epsrel: float = 1e-10,
    max_intervals: int = 20000,
) -> HalfLineResult:
    """Integrate ``f`` over ``[breakpoints[0], inf)``.

    ``f(w) ~ tail_coeff * w**tail_power`` for large ``w`` with
    ``tail_power < -1``.  The last breakpoint is the cutoff; beyond it the
    leading power law is integrated analytically and the remainder
    numerically.
    """
    if not tail_power < -1:
        raise ValueError(f"tail power {tail_power} is not integrable")
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    cutoff = float(pts[-1])
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    head = gk15_adaptive(f, pts, epsrel=epsrel, max_intervals=max_intervals)

    leading = tail_coeff * cutoff ** (tail_power + 1) / (-tail_power - 1)

    def remainder(s):
        w = cutoff / s
        with np.errstate(over="ignore", under="ignore"):
            return (cutoff / s**2) * (f(w) - tail_coeff * w**tail_power)

    # The remainder is small; an absolute target tied to the head keeps it cheap.
    rest = gk15_adaptive(remainder, [0.0, 1.0], epsrel=epsrel,
                         epsabs=0.1 * epsrel * abs(head.value + leading),
                         max_intervals=max_intervals)
    tail = leading + rest.value
    return HalfLineResult(
        value=head.value + tail,
        error=head.error + rest.error,
        tail=tail,
        cutoff=cutoff,
        evaluations=head.evaluations + rest.evaluations,
    )
