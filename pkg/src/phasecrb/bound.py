"""Mean-square-error lower bounds for continuous phase estimation.

The bound on the MSE of any unbiased single-time estimate is

    F^{-1}(0) = (1/2pi) int dw / (F~_C(w) + F~_Q(w))

with ``F~_C`` the inverse prior spectrum and ``F~_Q`` the quantum Fisher
information spectrum.  Besides the quadrature route this module carries
closed forms (coherent and mean-field OPO beams), the analytic
stochastic-Heisenberg lower bound, and log-log scaling fits.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .quadrature import integrate_half_line
from .spectra import PhaseNoiseModel, Spectrum

__all__ = [
    "ZETA",
    "BoundResult",
    "HLBResult",
    "MeanFieldClosedForm",
    "ScalingFit",
    "crb_mse",
    "coherent_bound",
    "coherent_closed_form",
    "powerlaw_constant_integral",
    "mean_field_bound_closed_form",
    "heisenberg_lower_bound",
    "scaling_exponent_fit",
]

ZETA = 17.0 / 4.0
CUTOFF_FACTOR = 64.0


@dataclass(frozen=True)
class BoundResult:
    value: float
    abs_error_estimate: float
    tail_correction: float
    cutoff: float
    evaluations: int

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "abs_error_estimate": self.abs_error_estimate,
            "tail_correction": self.tail_correction,
            "cutoff": self.cutoff,
            "evaluations": self.evaluations,
        }


def _breakpoints(scales: Sequence[float], cutoff: float) -> np.ndarray:
    lo = min(scales)
    ladder = lo / 16.0 * 4.0 ** np.arange(int(np.ceil(np.log(16.0 * cutoff / lo) / np.log(4.0))) + 1)
    pts = np.concatenate([[0.0], ladder[ladder < cutoff], [s for s in scales if s < cutoff], [cutoff]])
    return np.unique(pts)


def crb_mse(fc: Spectrum, fq: Spectrum, cutoff: float | None = None,
            epsrel: float = 1e-10) -> BoundResult:
    """Integrate the inverse total information spectrum over all frequencies.

    ``fc`` must grow as ``|w|**p / kappa**(p-1)`` with ``p > 1`` (as the
    classical spectra of every prior model do); ``fq`` must stay bounded.
    Spikes in ``fq`` change the integrand on a null set only and are ignored.
    """
    p = fc.tail_power
    if not p > 1 or not fc.tail_coeff > 0:
        raise ValueError(f"classical information must grow faster than |w|, got power {p}")
    if fq.tail_power > 0 and fq.tail_coeff != 0:
        raise ValueError("quantum information spectrum must be bounded")
    level = float(fc(np.array([0.0]))[0] + fq(np.array([0.0]))[0])
    if not level > 0:
        raise ValueError("total information vanishes at w = 0; the MSE bound is infinite")

    kp = 1.0 / fc.tail_coeff                        # kappa**(p-1)
    fq_scale = max(abs(level), abs(fq.value_at_infinity))
    crossover = (kp * fq_scale) ** (1.0 / p)
    scales = [s for s in fc.scales + fq.scales if s > 0] + [crossover]
    # features far below the dominant scale cannot be resolved in double precision
    scales = [s for s in scales if s >= 1e-14 * max(scales)]
    if cutoff is None:
        cutoff = CUTOFF_FACTOR * max(scales)
    pts = _breakpoints(scales, cutoff)

    def integrand(w):
        return 1.0 / (fc(w) + fq(w))

    res = integrate_half_line(integrand, pts, tail_power=-p, tail_coeff=kp, epsrel=epsrel)
    if not res.value > 0:
        raise ValueError(f"non-positive bound {res.value}")
    return BoundResult(
        value=res.value / math.pi,
        abs_error_estimate=res.error / math.pi + 4 * np.finfo(float).eps * res.value / math.pi,
        tail_correction=res.tail / math.pi,
        cutoff=float(res.cutoff),
        evaluations=res.evaluations,
    )


def coherent_bound(phase: PhaseNoiseModel, flux: float, **kw) -> BoundResult:
    """Quadrature bound for a coherent beam (white information ``4N``)."""
    return crb_mse(phase.fisher_spectrum(), Spectrum.white(4.0 * flux), **kw)


def coherent_closed_form(kappa: float, lam: float, flux: float) -> float:
    """``kappa / (2 sqrt(4 N kappa + lam**2))`` for Ornstein-Uhlenbeck phase noise."""
    return kappa / (2.0 * math.sqrt(4.0 * flux * kappa + lam * lam))


def powerlaw_constant_integral(p: float, b: float, kappa: float) -> float:
    """``(1/pi) int_0^inf kappa**(p-1) dw / (w**p + b)``."""
    if not p > 1:
        raise ValueError(f"integral diverges for p={p} <= 1")
    if not b > 0:
        raise ValueError("b must be positive")
    # np.sinc(1/p) = sin(pi/p) / (pi/p)
    return kappa ** (p - 1) / (math.pi * b ** (1.0 - 1.0 / p)) / float(np.sinc(1.0 / p))


@dataclass(frozen=True)
class MeanFieldClosedForm:
    value: float
    fallback: bool
    discriminant: float
    complex_continuation: float | None = None


def mean_field_bound_closed_form(alpha: float, r_plus: float, x: float, gamma: float,
                                 kappa: float, lam: float) -> MeanFieldClosedForm:
    """Bound from the mean-field information of an OPO beam with OU phase noise.

    When the discriminant is negative the two roots are complex conjugates;
    the value is then taken from quadrature and flagged.
    """
    g = 0.5 * (1 - x) * gamma
    d = 4 * kappa * alpha**2 * (r_plus - 1) * g * g
    a = 4 * alpha**2 * kappa + lam * lam
    disc = (a - g * g) ** 2 - 4 * d
    if disc < 0:
        from .spectra import LorentzianSum, OrnsteinUhlenbeck

        fq = Spectrum.lorentzians(LorentzianSum(((4 * alpha**2 * (r_plus - 1), g),)),
                                  constant=4 * alpha**2)
        value = crb_mse(OrnsteinUhlenbeck(kappa, lam).fisher_spectrum(), fq).value
        return MeanFieldClosedForm(value, True, disc, _closed_form(a, g, d, disc, kappa).real)
    return MeanFieldClosedForm(_closed_form(a, g, d, disc, kappa).real, False, disc)


def _closed_form(a, g, d, disc, kappa) -> complex:
    # principal complex square roots keep the expression real when disc < 0
    root = cmath.sqrt(disc)
    xi_p = 0.5 * (a + g * g + root)
    if disc >= 0:
        # xi_p xi_m = a g^2 + d exactly; avoids cancellation when g^2 >> a
        xi_m = (a * g * g + d) / xi_p
    else:
        xi_m = 0.5 * (a + g * g - root)
    sp, sm = cmath.sqrt(xi_p), cmath.sqrt(xi_m)
    return (kappa / 2) * (1 + g * g / (sp * sm)) / (sp + sm)


@dataclass(frozen=True)
class HLBResult:
    value: float
    mu: float
    residual: float
    zeta: float
    calI: float


def heisenberg_lower_bound(p: float, kappa: float, flux: float, zeta: float = ZETA) -> HLBResult:
    """Analytic lower bound with the stochastic-Heisenberg scaling.

    ``mu`` is the unique positive root of
    ``(I/mu)**p = kappa**(p-1) (zeta N + mu)`` with ``I = 16 pi N**2``,
    found by bisection-type search in ``log mu``.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if not flux > 0 or not kappa > 0:
        raise ValueError("flux and kappa must be positive")
    cal_i = 16 * math.pi * flux**2
    log_i, log_k = math.log(cal_i), math.log(kappa)

    def h(log_mu):
        # log LHS - log RHS: strictly decreasing in mu
        mu = math.exp(log_mu)
        return p * (log_i - log_mu) - (p - 1) * log_k - math.log(zeta * flux + mu)

    mu0 = flux * (flux / kappa) ** ((p - 1) / (p + 1))
    lo, hi = math.log(mu0) - math.log(1e3), math.log(mu0) + math.log(1e3)
    widen = 0
    while h(lo) < 0 or h(hi) > 0:
        widen += 1
        if widen > 50:
            raise RuntimeError(f"could not bracket mu for p={p}, kappa={kappa}, N={flux}")
        lo -= math.log(1e3)
        hi += math.log(1e3)
    log_mu = brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    mu = math.exp(log_mu)
    lhs = (cal_i / mu) ** p
    rhs = kappa ** (p - 1) * (zeta * flux + mu)
    residual = (lhs - rhs) / rhs
    level = kappa ** (p - 1) * (zeta * flux + mu)
    value = kappa ** (p - 1) / (2 * math.pi * level ** (1 - 1 / p))
    return HLBResult(value, mu, residual, zeta, cal_i)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r2: float
    n_used: int
    dropped_first_decade: bool


def _ols(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def scaling_exponent_fit(bound_fn: Callable[[float], float], n_range: tuple[float, float],
                         points: int = 25) -> ScalingFit:
    """Fit ``log bound = slope log N + intercept`` on a geometric grid of fluxes.

    If a quadratic fit shows curvature above 1e-2 the smallest decade is
    dropped and the line refitted.
    """
    n_lo, n_hi = n_range
    if points < 5:
        raise ValueError("need at least 5 points")
    if not (n_lo > 0 and n_hi / n_lo >= 1e4 * (1 - 1e-12)):
        raise ValueError("flux range must span at least four decades")
    ns = np.geomspace(n_lo, n_hi, points)
    vals = np.array([bound_fn(float(n)) for n in ns])
    if not np.all(np.isfinite(vals) & (vals > 0)):
        raise ValueError("bound values must be finite and positive")
    lx, ly = np.log(ns), np.log(vals)
    curvature = abs(np.polyfit(lx, ly, 2)[0])
    dropped = False
    if curvature > 1e-2:
        keep = ns >= 10 * n_lo * (1 - 1e-12)
        lx, ly = lx[keep], ly[keep]
        dropped = True
    slope, intercept, r2 = _ols(lx, ly)
    return ScalingFit(slope, intercept, r2, int(lx.size), dropped)
