"""Quantum Fisher information spectra of stationary Gaussian beams.

For a beam with quadrature means and normally ordered correlation spectra
the phase Fisher information spectrum is ``4N + f~(w) - g~(w)`` where, with
``H = h_x + h_y`` and all mean-field constants written as spikes at dc,

    f~ = (1/2)(1/2pi) (H * H)
    g~ = (1/2pi) (h_x * h_y - h_xy * h_xy) + pi (mean_x**2 + mean_y**2)**2 delta

OPO beams have the closed form below; general beams go through an FFT
convolution on a uniform grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .spectra import (
    Coherent,
    General,
    GridFunction,
    LorentzianSum,
    OpoSqueezed,
    PhaseNoiseModel,
    Spectrum,
    photon_flux,
)

__all__ = [
    "BochnerViolation",
    "FisherSpectra",
    "SpectralGrid",
    "ValidationReport",
    "opo_quantum_fisher_spectrum",
    "mean_field_fisher_spectrum",
    "opo_f_spectrum",
    "general_quantum_fisher_spectrum",
    "validate_beam_spectrum",
    "quantum_fisher_spectrum",
    "fisher_spectra",
]

POINTS_PER_WIDTH = 32
EXTENT_WIDTHS = 256
BOCHNER_TOL = 1e-8


class BochnerViolation(ValueError):
    """The computed information spectrum (or its inputs) is unphysical."""


@dataclass(frozen=True)
class FisherSpectra:
    fc: Spectrum
    fq: Spectrum
    flux: float


# ---------------------------------------------------------------------------
# Closed forms for OPO beams
# ---------------------------------------------------------------------------

def opo_quantum_fisher_spectrum(beam: OpoSqueezed) -> Spectrum:
    n = photon_flux(beam)
    g, x = beam.gamma, beam.x
    lsum = LorentzianSum((
        (4 * beam.alpha**2 * (beam.r_plus - 1), 0.5 * (1 - x) * g),
        (g * (beam.r_plus - 1) ** 2 * (1 - x) / 16, (1 - x) * g),
        (g * (beam.r_minus - 1) ** 2 * (1 + x) / 16, (1 + x) * g),
    ))
    return Spectrum.lorentzians(lsum, constant=4 * n)


def mean_field_fisher_spectrum(beam: OpoSqueezed) -> Spectrum:
    """Only the terms of the OPO information spectrum proportional to alpha**2."""
    a2 = beam.alpha**2
    lsum = LorentzianSum(((4 * a2 * (beam.r_plus - 1), beam.width_plus),))
    return Spectrum.lorentzians(lsum, constant=4 * a2)


def opo_f_spectrum(beam: OpoSqueezed) -> Spectrum:
    """Closed-form f~ for an OPO beam: transform of (1/2)(4 alpha^2 + T+ + T-)^2."""
    a2 = beam.alpha**2
    t = beam.t_plus() + beam.t_minus()
    lsum = t.scaled(4 * a2) + t.convolve(t).scaled(1 / (4 * math.pi))
    return Spectrum.lorentzians(lsum, spikes=((0.0, 16 * math.pi * a2**2),))


# ---------------------------------------------------------------------------
# Convolution pipeline for general beams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralGrid:
    """Uniform symmetric output grid ``[-cutoff, cutoff]`` with step ``spacing``.

    Inputs are sampled on twice the range so that every output point sees
    the full convolution support out to ``cutoff`` on either side.
    """

    spacing: float
    cutoff: float

    @property
    def half_points(self) -> int:
        return int(round(self.cutoff / self.spacing))

    @property
    def omega(self) -> np.ndarray:
        m = self.half_points
        return self.spacing * np.arange(-m, m + 1)

    @property
    def input_omega(self) -> np.ndarray:
        m = self.half_points
        return self.spacing * np.arange(-2 * m, 2 * m + 1)

    @classmethod
    def for_scales(cls, scales, refine: int = 1) -> "SpectralGrid":
        scales = [s for s in scales if s > 0]
        if not scales:
            return cls(spacing=1.0 / refine, cutoff=64.0 * refine)
        h = min(scales) / POINTS_PER_WIDTH / refine
        w = EXTENT_WIDTHS * max(scales) * refine
        return cls(spacing=h, cutoff=h * math.ceil(w / h))

    def refined(self, factor: int) -> "SpectralGrid":
        return SpectralGrid(self.spacing / factor, self.cutoff * factor)


def _conv(a: Spectrum, b: Spectrum, grid: SpectralGrid):
    """``int A(v) B(w - v) dv`` on the output grid plus resulting spikes."""
    m = grid.half_points
    out = grid.omega
    cont = np.zeros_like(out)
    if a.continuous is not None and b.continuous is not None:
        nu = grid.input_omega
        av, bv = a.continuous(nu), b.continuous(nu)
        if np.any(av) and np.any(bv):
            cont = fftconvolve(av, bv)[3 * m:5 * m + 1] * grid.spacing
    for w0, wt in a.spikes:
        cont = cont + wt * b.continuous(out - w0)
    for w0, wt in b.spikes:
        cont = cont + wt * a.continuous(out - w0)
    spikes = [(w1 + w2, t1 * t2) for w1, t1 in a.spikes for w2, t2 in b.spikes]
    return cont, spikes


def _with_mean(h: Spectrum, c: float) -> Spectrum:
    return Spectrum(h.continuous, 0.0, h.spikes + ((0.0, 2 * math.pi * c),),
                    h.tail_power, h.tail_coeff, h.scales)


def _merge(spikes, scale=1.0):
    merged: dict[float, float] = {}
    for w0, wt in spikes:
        merged[w0] = merged.get(w0, 0.0) + scale * wt
    return merged


@dataclass
class _Parts:
    grid: SpectralGrid
    flux: float
    f: np.ndarray
    g: np.ndarray
    f_spikes: dict
    g_spikes: dict
    hx: np.ndarray
    hy: np.ndarray
    hxy: np.ndarray


def _fg_parts(beam: General, grid: SpectralGrid) -> _Parts:
    mx, my = beam.mean_x, beam.mean_y
    m2 = mx * mx + my * my
    n = photon_flux(beam)
    h_full = _with_mean(beam.h_x + beam.h_y, m2)
    x_full = _with_mean(beam.h_x, mx * mx)
    y_full = _with_mean(beam.h_y, my * my)
    xy_full = _with_mean(beam.h_xy, mx * my)

    hh, hh_sp = _conv(h_full, h_full, grid)
    xy, xy_sp = _conv(x_full, y_full, grid)
    cc, cc_sp = _conv(xy_full, xy_full, grid)

    f = hh / (4 * math.pi)
    g = (xy - cc) / (2 * math.pi)
    f_sp = _merge(hh_sp, 1 / (4 * math.pi))
    g_sp = _merge(xy_sp, 1 / (2 * math.pi))
    for w0, wt in _merge(cc_sp, -1 / (2 * math.pi)).items():
        g_sp[w0] = g_sp.get(w0, 0.0) + wt
    g_sp[0.0] = g_sp.get(0.0, 0.0) + math.pi * m2 * m2

    w = grid.omega
    return _Parts(grid, n, f, g, f_sp, g_sp,
                  beam.h_x.continuous(w), beam.h_y.continuous(w), beam.h_xy.continuous(w))


@dataclass(frozen=True)
class Check:
    name: str
    min_margin: float
    argmin_omega: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.tolerance


@dataclass
class ValidationReport:
    """Physicality margins of a general beam on a frequency grid."""

    checks: list[Check]
    omega: np.ndarray = field(repr=False)
    margins: dict[str, np.ndarray] = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def margin_at(self, name: str, omega: float) -> float:
        return float(np.interp(omega, self.omega, self.margins[name]))

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "checks": [
                {"name": c.name, "min_margin": c.min_margin, "argmin_omega": c.argmin_omega}
                for c in self.checks
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _report(parts: _Parts, tol: float) -> ValidationReport:
    w = parts.grid.omega
    hx, hy, hxy = parts.hx, parts.hy, parts.hxy
    scale = max(float(np.max(np.abs(parts.f))), float(np.max(np.abs(parts.g))), parts.flux)
    margins = {
        "vacuum_x": 1 + hx,
        "vacuum_y": 1 + hy,
        "uncertainty": (1 + hx) * (1 + hy) - hxy**2 - 1,
        "f_nonnegative": parts.f,
        "four_flux_plus_g": 4 * parts.flux + parts.g,
    }
    tols = {
        "vacuum_x": tol, "vacuum_y": tol,
        "uncertainty": tol * max(1.0, float(np.max(np.abs(hx))), float(np.max(np.abs(hy)))),
        "f_nonnegative": BOCHNER_TOL * scale,
        "four_flux_plus_g": BOCHNER_TOL * scale,
    }
    checks = []
    for name, arr in margins.items():
        i = int(np.argmin(arr))
        checks.append(Check(name, float(arr[i]), float(abs(w[i])), tols[name]))
    return ValidationReport(checks, w, margins)


def validate_beam_spectrum(beam: General, grid: SpectralGrid | None = None,
                           tol: float = 1e-10) -> ValidationReport:
    """Check vacuum bounds, the spectral uncertainty relation, ``f~ >= 0`` and ``4N + g~ >= 0``.

    The last two follow from the uncertainty relation once the flux is
    written as ``N = (1/8pi) int (h_x + h_y)`` including the mean-field spikes.
    """
    grid = grid or SpectralGrid.for_scales(beam.scales)
    return _report(_fg_parts(beam, grid), tol)


def general_quantum_fisher_spectrum(beam: General, grid: SpectralGrid | None = None,
                                    refine: int = 1) -> Spectrum:
    grid = grid or SpectralGrid.for_scales(beam.scales, refine=refine)
    parts = _fg_parts(beam, grid)
    report = _report(parts, 1e-10)
    if not report.passed:
        failed = [c.name for c in report.checks if not c.passed]
        raise BochnerViolation(f"beam fails physicality checks: {', '.join(failed)}")

    fq = 4 * parts.flux + parts.f - parts.g
    if fq.min() < -BOCHNER_TOL * np.max(np.abs(fq)):
        i = int(np.argmin(fq))
        raise BochnerViolation(
            f"negative information spectrum {fq[i]:.3e} at w = {grid.omega[i]:.6g}")

    # Mean-field spikes of f~ and g~ cancel analytically; keep only true residue.
    spikes = dict(parts.f_spikes)
    for w0, wt in parts.g_spikes.items():
        spikes[w0] = spikes.get(w0, 0.0) - wt
    ref = max([abs(v) for v in parts.f_spikes.values()] + [parts.flux**2])
    spikes = tuple((w0, wt) for w0, wt in spikes.items() if abs(wt) > 1e-10 * ref)

    m = grid.half_points
    cont = GridFunction(grid.spacing, parts.f[m:] - parts.g[m:], tail_power=-2.0)
    return Spectrum(continuous=cont, constant=4 * parts.flux, spikes=spikes,
                    tail_power=-2.0, tail_coeff=cont.tail_coeff, scales=beam.scales)


def general_f_spectrum(beam: General, grid: SpectralGrid | None = None) -> Spectrum:
    """f~ from the convolution pipeline, as a grid spectrum plus spikes."""
    grid = grid or SpectralGrid.for_scales(beam.scales)
    parts = _fg_parts(beam, grid)
    m = grid.half_points
    cont = GridFunction(grid.spacing, parts.f[m:], tail_power=-2.0)
    return Spectrum(continuous=cont, spikes=tuple(parts.f_spikes.items()),
                    tail_power=-2.0, tail_coeff=cont.tail_coeff, scales=beam.scales)


def quantum_fisher_spectrum(beam, mean_field: bool = False) -> Spectrum:
    """Information spectrum for any beam model, using closed forms where they exist."""
    if mean_field:
        if isinstance(beam, Coherent):
            return Spectrum.white(4 * beam.alpha**2)
        if not isinstance(beam, OpoSqueezed):
            raise TypeError("mean-field spectrum is defined for OPO and coherent beams")
        return mean_field_fisher_spectrum(beam)
    if isinstance(beam, Coherent):
        return Spectrum.white(4 * photon_flux(beam))
    if isinstance(beam, OpoSqueezed):
        return opo_quantum_fisher_spectrum(beam)
    return general_quantum_fisher_spectrum(beam)


def fisher_spectra(phase: PhaseNoiseModel, beam, mean_field: bool = False) -> FisherSpectra:
    return FisherSpectra(phase.fisher_spectrum(), quantum_fisher_spectrum(beam, mean_field),
                         photon_flux(beam))
