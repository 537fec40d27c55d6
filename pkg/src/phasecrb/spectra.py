"""Phase-noise priors, beam models and their spectra.

Fourier convention used throughout the package::

    g~(w) = int g(t) exp(-i w t) dt,      g(t) = (1/2pi) int g~(w) exp(i w t) dw

so a constant ``c`` in time becomes a spike ``2 pi c delta(w)`` and the
transform of a product is ``(1/2pi)`` times the convolution of transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import integrate_half_line

__all__ = [
    "Spectrum",
    "LorentzianSum",
    "GridFunction",
    "PowerLaw",
    "OrnsteinUhlenbeck",
    "wiener",
    "PhaseNoiseModel",
    "Coherent",
    "OpoSqueezed",
    "General",
    "BeamModel",
    "phase_prior_spectrum",
    "classical_fisher_spectrum",
    "opo_correlations",
    "photon_flux",
    "pure_pump_amplitude",
    "mixed_to_pure",
    "quadrature_spectra",
]

_REL_TOL = 1e-12


# ---------------------------------------------------------------------------
# Spectrum representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LorentzianSum:
    """Sum of ``height * width**2 / (width**2 + w**2)`` terms.

    This is the transform of ``sum (height*width/2) exp(-width |t|)``, so the
    family is closed under products in time (convolution in frequency).
    """

    terms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        clean = []
        for height, width in self.terms:
            if not width > 0:
                raise ValueError(f"Lorentzian width must be positive, got {width}")
            if height != 0.0:
                clean.append((float(height), float(width)))
        object.__setattr__(self, "terms", tuple(clean))

    def __call__(self, omega):
        w2 = np.square(np.asarray(omega, dtype=float))
        out = np.zeros_like(w2)
        for height, width in self.terms:
            out = out + height * width**2 / (width**2 + w2)
        return out

    def __add__(self, other: "LorentzianSum") -> "LorentzianSum":
        return LorentzianSum(self.terms + other.terms)

    def scaled(self, factor: float) -> "LorentzianSum":
        return LorentzianSum(tuple((factor * h, w) for h, w in self.terms))

    def integral(self) -> float:
        """Integral over the whole real line."""
        return math.pi * sum(h * w for h, w in self.terms)

    def time_domain(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        for height, width in self.terms:
            out = out + 0.5 * height * width * np.exp(-width * t)
        return out

    def convolve(self, other: "LorentzianSum") -> "LorentzianSum":
        """Exact ``int A(v) B(w - v) dv``; widths add."""
        terms = []
        for h1, w1 in self.terms:
            for h2, w2 in other.terms:
                terms.append((math.pi * h1 * h2 * w1 * w2 / (w1 + w2), w1 + w2))
        return LorentzianSum(tuple(terms))

    @property
    def tail_coeff(self) -> float:
        return sum(h * w * w for h, w in self.terms)

    @property
    def widths(self) -> tuple[float, ...]:
        return tuple(sorted({w for _, w in self.terms}))


class GridFunction:
    """Even function sampled on a uniform grid ``0, h, ..., cutoff``.

    Cubic-spline interpolation inside the grid, ``coeff * |w|**power`` beyond
    it, with ``coeff`` matched to the sample at the cutoff.
    """

    def __init__(self, spacing: float, values: np.ndarray, tail_power: float = -2.0):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 4:
            raise ValueError("need at least four samples")
        self.spacing = float(spacing)
        self.values = values
        self.omega = self.spacing * np.arange(values.size)
        self.cutoff = float(self.omega[-1])
        self.tail_power = float(tail_power)
        self.tail_coeff = float(values[-1] * self.cutoff ** (-tail_power))
        # Mirror a few samples so the spline sees an even function at w = 0.
        k = min(8, values.size - 1)
        xs = np.concatenate([-self.omega[k:0:-1], self.omega])
        ys = np.concatenate([values[k:0:-1], values])
        self._spline = CubicSpline(xs, ys, bc_type="not-a-knot")

    def __call__(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        inside = w <= self.cutoff
        out = np.empty_like(w)
        out[inside] = self._spline(w[inside])
        with np.errstate(divide="ignore", over="ignore"):
            out[~inside] = self.tail_coeff * w[~inside] ** self.tail_power
        return out


def _zero(omega):
    return np.zeros_like(np.asarray(omega, dtype=float))


@dataclass(frozen=True)
class Spectrum:
    """Even real spectrum: continuous part, white floor, and delta spikes.

    ``continuous`` is any vectorised even callable; for large ``|w|`` it is
    declared to behave as ``tail_coeff * |w|**tail_power``.  ``constant`` is
    a white floor stored symbolically so truncation never drops it.
    ``spikes`` are ``(location, weight)`` pairs.  ``scales`` lists the
    characteristic frequencies, used as quadrature and grid hints.
    """

    continuous: Callable[[np.ndarray], np.ndarray] = _zero
    constant: float = 0.0
    spikes: tuple[tuple[float, float], ...] = ()
    tail_power: float = -2.0
    tail_coeff: float = 0.0
    scales: tuple[float, ...] = ()

    def __post_init__(self):
        spikes = tuple((float(w0), float(wt)) for w0, wt in self.spikes if wt != 0.0)
        weights = {}
        for w0, wt in spikes:
            weights[w0] = weights.get(w0, 0.0) + wt
        for w0, wt in weights.items():
            mirror = weights.get(-w0)
            if mirror is None or not math.isclose(mirror, wt, rel_tol=1e-12, abs_tol=0.0):
                raise ValueError(f"spike at {w0} has no mirror of equal weight")
        object.__setattr__(self, "spikes", tuple(sorted(weights.items())))
        object.__setattr__(self, "scales",
                           tuple(sorted({float(s) for s in self.scales if s > 0})))

    @classmethod
    def white(cls, level: float) -> "Spectrum":
        return cls(constant=float(level))

    @classmethod
    def lorentzians(cls, lsum: LorentzianSum, constant: float = 0.0,
                    spikes: Sequence[tuple[float, float]] = ()) -> "Spectrum":
        return cls(continuous=lsum, constant=constant, spikes=tuple(spikes),
                   tail_power=-2.0, tail_coeff=lsum.tail_coeff, scales=lsum.widths)

    def __call__(self, omega):
        """Continuous part plus floor; spikes are not pointwise values."""
        return self.continuous(omega) + self.constant

    @property
    def spike_total(self) -> float:
        return sum(wt for _, wt in self.spikes)

    @property
    def value_at_infinity(self) -> float:
        if self.tail_power > 0 and self.tail_coeff != 0:
            return math.copysign(math.inf, self.tail_coeff)
        return self.constant

    def __add__(self, other: "Spectrum") -> "Spectrum":
        f1, f2 = self.continuous, other.continuous
        if self.tail_power == other.tail_power:
            power, coeff = self.tail_power, self.tail_coeff + other.tail_coeff
        elif (self.tail_power > other.tail_power and self.tail_coeff != 0) or other.tail_coeff == 0:
            power, coeff = self.tail_power, self.tail_coeff
        else:
            power, coeff = other.tail_power, other.tail_coeff
        if isinstance(f1, LorentzianSum) and isinstance(f2, LorentzianSum):
            cont = f1 + f2
        elif f1 is _zero:
            cont = f2
        elif f2 is _zero:
            cont = f1
        else:
            cont = _Sum(f1, f2)
        return Spectrum(cont, self.constant + other.constant,
                        self.spikes + other.spikes, power, coeff,
                        self.scales + other.scales)

    def scaled(self, factor: float) -> "Spectrum":
        f = self.continuous
        cont = f.scaled(factor) if isinstance(f, LorentzianSum) else _Scaled(f, factor)
        return Spectrum(cont, factor * self.constant,
                        tuple((w0, factor * wt) for w0, wt in self.spikes),
                        self.tail_power, factor * self.tail_coeff, self.scales)

    def integral_continuous(self, epsrel: float = 1e-11) -> float:
        """Integral of the continuous part over the real line (no floor, no spikes)."""
        if isinstance(self.continuous, LorentzianSum):
            return self.continuous.integral()
        if self.continuous is _zero:
            return 0.0
        return 2.0 * _half_line_integral(self.continuous, self.scales,
                                         self.tail_power, self.tail_coeff, epsrel)


@dataclass(frozen=True)
class _Sum:
    f: Callable
    g: Callable

    def __call__(self, omega):
        return self.f(omega) + self.g(omega)


@dataclass(frozen=True)
class _Scaled:
    f: Callable
    factor: float

    def __call__(self, omega):
        return self.factor * self.f(omega)


def _half_line_integral(func, scales, tail_power, tail_coeff, epsrel):
    scales = [s for s in scales if s > 0] or [1.0]
    lo, hi = min(scales), max(scales)
    cutoff = 64.0 * hi
    grid = lo / 16.0 * 4.0 ** np.arange(int(np.ceil(np.log(cutoff * 16.0 / lo) / np.log(4.0))) + 1)
    pts = np.concatenate([[0.0], grid[grid < cutoff], scales, [cutoff]])
    return integrate_half_line(func, pts, tail_power, tail_coeff, epsrel=epsrel).value


# ---------------------------------------------------------------------------
# Phase-noise priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    """Prior spectrum ``kappa**(p-1) / |w|**p``."""

    p: float
    kappa: float

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"power-law exponent must exceed 1, got p={self.p}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    def prior(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        if np.any(w == 0):
            raise ValueError("power-law prior spectrum is singular at w = 0")
        return self.kappa ** (self.p - 1) / w**self.p

    def fisher(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        return w**self.p / self.kappa ** (self.p - 1)

    @property
    def tail_exponent(self) -> float:
        return self.p

    def fisher_spectrum(self) -> Spectrum:
        return Spectrum(continuous=self.fisher, tail_power=self.p,
                        tail_coeff=self.kappa ** (1 - self.p), scales=(self.kappa,))


@dataclass(frozen=True)
class OrnsteinUhlenbeck:
    """Prior spectrum ``kappa / (lam**2 + w**2)``; ``lam = 0`` is Wiener noise."""

    kappa: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.lam >= 0:
            raise ValueError(f"damping rate must be non-negative, got {self.lam}")

    def prior(self, omega):
        w = np.asarray(omega, dtype=float)
        denom = self.lam**2 + w**2
        if np.any(denom == 0):
            raise ValueError("Wiener prior spectrum is singular at w = 0")
        return self.kappa / denom

    def fisher(self, omega):
        w = np.asarray(omega, dtype=float)
        return (self.lam**2 + w**2) / self.kappa

    @property
    def p(self) -> float:
        return 2.0

    tail_exponent = p

    def fisher_spectrum(self) -> Spectrum:
        return Spectrum(continuous=self.fisher, tail_power=2.0, tail_coeff=1.0 / self.kappa,
                        scales=(self.kappa, self.lam))


def wiener(kappa: float) -> OrnsteinUhlenbeck:
    return OrnsteinUhlenbeck(kappa, 0.0)


PhaseNoiseModel = PowerLaw | OrnsteinUhlenbeck


def phase_prior_spectrum(model: PhaseNoiseModel, omega):
    """Prior phase spectrum in rad^2 s."""
    return model.prior(omega)


def classical_fisher_spectrum(model: PhaseNoiseModel, omega):
    """Inverse of the Gaussian prior spectrum (zero at dc for Wiener noise)."""
    return model.fisher(omega)


# ---------------------------------------------------------------------------
# Beams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class General:
    """Stationary Gaussian beam from quadrature means and normally ordered spectra.

    ``h_x``, ``h_y``, ``h_xy`` are the transforms of the fluctuation parts of
    ``<:X(t)X(t'):>``, ``<:Y(t)Y(t'):>`` and the (time-symmetric) cross
    correlation; the means enter separately.
    """

    mean_x: float
    mean_y: float
    h_x: Spectrum = field(default_factory=Spectrum)
    h_y: Spectrum = field(default_factory=Spectrum)
    h_xy: Spectrum = field(default_factory=Spectrum)

    def __post_init__(self):
        for name in ("h_x", "h_y", "h_xy"):
            s = getattr(self, name)
            if s.constant != 0.0:
                raise ValueError(f"{name} must not carry a white floor")
            if s.tail_power >= -1 and s.tail_coeff != 0.0:
                raise ValueError(f"{name} must decay faster than 1/|w|")

    def to_general(self) -> "General":
        return self

    @property
    def scales(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.h_x.scales + self.h_y.scales + self.h_xy.scales)))


@dataclass(frozen=True)
class Coherent:
    """Coherent beam with real mean-field amplitude ``alpha``."""

    alpha: float

    def to_general(self) -> General:
        return General(mean_x=2.0 * self.alpha, mean_y=0.0)


def pure_pump_amplitude(r_plus: float) -> float:
    """Pump amplitude ``x`` of a pure OPO state with antisqueezing ``r_plus``."""
    s = math.sqrt(r_plus)
    return (s - 1.0) / (s + 1.0)


@dataclass(frozen=True)
class OpoSqueezed:
    """Coherent amplitude ``alpha`` added to an OPO output.

    Validity requires the spectral uncertainty relation at every frequency,
    which for these Lorentzian spectra reduces to its dc and high-frequency
    limits: ``r_plus*r_minus >= 1`` and
    ``(r_plus-1)(1-x)**2 + (r_minus-1)(1+x)**2 >= 0``.
    """

    alpha: float
    r_plus: float
    r_minus: float
    gamma: float
    x: float

    def __post_init__(self):
        if not self.r_plus >= 1:
            raise ValueError(f"r_plus must be >= 1, got {self.r_plus}")
        if not 0 < self.r_minus <= 1:
            raise ValueError(f"r_minus must lie in (0, 1], got {self.r_minus}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0 <= self.x < 1:
            raise ValueError(f"x must lie in [0, 1), got {self.x}")
        if self.r_plus * self.r_minus < 1 - _REL_TOL:
            raise ValueError(
                f"r_plus*r_minus = {self.r_plus * self.r_minus} < 1 violates the uncertainty relation")
        hf = (self.r_plus - 1) * (1 - self.x) ** 2 + (self.r_minus - 1) * (1 + self.x) ** 2
        if hf < -_REL_TOL * max(self.r_plus, 1.0):
            raise ValueError(
                "spectral uncertainty relation fails at high frequency "
                f"(x={self.x} exceeds the pure-state pump amplitude for these levels)")

    @property
    def width_plus(self) -> float:
        """Decay rate of the antisqueezed correlation, ``(1-x) gamma / 2``."""
        return 0.5 * (1 - self.x) * self.gamma

    @property
    def width_minus(self) -> float:
        return 0.5 * (1 + self.x) * self.gamma

    @property
    def is_pure(self) -> bool:
        return (math.isclose(self.r_plus * self.r_minus, 1.0, rel_tol=1e-12)
                and math.isclose(self.x, pure_pump_amplitude(self.r_plus), rel_tol=1e-12, abs_tol=1e-15))

    def t_plus(self) -> LorentzianSum:
        return LorentzianSum(((self.r_plus - 1, self.width_plus),))

    def t_minus(self) -> LorentzianSum:
        return LorentzianSum(((self.r_minus - 1, self.width_minus),))

    def to_general(self) -> General:
        return quadrature_spectra(self.alpha, self.r_plus, self.r_minus, self.gamma, self.x)


BeamModel = Coherent | OpoSqueezed | General


def quadrature_spectra(alpha, r_plus, r_minus, gamma, x) -> General:
    """General beam with OPO-shaped Lorentzian spectra, without validity checks."""
    tp = LorentzianSum(((r_plus - 1, 0.5 * (1 - x) * gamma),))
    tm = LorentzianSum(((r_minus - 1, 0.5 * (1 + x) * gamma),))
    return General(mean_x=2.0 * alpha, mean_y=0.0,
                   h_x=Spectrum.lorentzians(tp), h_y=Spectrum.lorentzians(tm))


def opo_correlations(beam: OpoSqueezed, t):
    """Normally ordered fluctuation correlations ``(T_plus(t), T_minus(t))``."""
    return beam.t_plus().time_domain(t), beam.t_minus().time_domain(t)


def photon_flux(beam: BeamModel) -> float:
    """Mean photon flux in photons per second."""
    if isinstance(beam, Coherent):
        n = beam.alpha**2
    elif isinstance(beam, OpoSqueezed):
        n = beam.alpha**2 + beam.gamma / 16 * (
            (beam.r_plus - 1) * (1 - beam.x) + (beam.r_minus - 1) * (1 + beam.x))
    elif isinstance(beam, General):
        # Equal-time normally ordered moments via the inverse transform at t = 0.
        hx0 = (beam.h_x.integral_continuous() + beam.h_x.spike_total) / (2 * math.pi)
        hy0 = (beam.h_y.integral_continuous() + beam.h_y.spike_total) / (2 * math.pi)
        n = 0.25 * (beam.mean_x**2 + beam.mean_y**2 + hx0 + hy0)
    else:
        raise TypeError(f"unsupported beam type {type(beam).__name__}")
    if not n > 0:
        raise ValueError(f"photon flux {n} is not positive")
    return float(n)


@dataclass(frozen=True)
class _ClassicalAmplitudeNoise:
    beam: OpoSqueezed

    def __call__(self, omega):
        s_xx = 1.0 + self.beam.t_plus()(omega)
        s_yy = 1.0 + self.beam.t_minus()(omega)
        return s_xx - 1.0 / s_yy


def mixed_to_pure(beam: OpoSqueezed) -> tuple[OpoSqueezed, Spectrum]:
    """Split a mixed OPO beam into a pure squeezed beam plus classical X noise.

    The pure part keeps the squeezed quadrature: ``r_minus`` and
    ``gamma*(1+x)`` are preserved and ``r_plus`` becomes ``1/r_minus``.
    The returned spectrum is ``S_XX - 1/S_YY``.
    """
    rq_plus = 1.0 / beam.r_minus
    xq = pure_pump_amplitude(rq_plus)
    gq = beam.gamma * (1 + beam.x) / (1 + xq)
    pure = OpoSqueezed(beam.alpha, rq_plus, beam.r_minus, gq, xq)
    if beam.is_pure:
        pure = beam
    # S_XX - 1/S_YY ~ (T_plus + T_minus) at large |w|.
    coeff = beam.t_plus().tail_coeff + beam.t_minus().tail_coeff
    noise = Spectrum(continuous=_ClassicalAmplitudeNoise(beam), tail_power=-2.0,
                     tail_coeff=coeff, scales=(beam.width_plus, beam.width_minus))
    return pure, noise
