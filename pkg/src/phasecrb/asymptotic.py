"""Dimensionless p=2 rescaling and the universal constant C.

With ``N = kappa N*``, ``alpha**2 = alpha*^2 kappa N*``,
``gamma = gamma* kappa N*^(5/6)``, ``R+ = R* N*^(1/3)`` and
``w = w* kappa N*^(2/3)``, the bound for a pure OPO beam under Wiener phase
noise becomes ``N*^(-2/3) C`` for large ``N*``, where

    C = (1/2pi) int dw* / (w*^2 + F*(w*)).

The photon-flux constraint ties the parameters through
``tau = gamma* sqrt(R*) / 8 = 1 - alpha*^2``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .bound import coherent_closed_form, crb_mse
from .fisher import opo_quantum_fisher_spectrum
from .spectra import (LorentzianSum, OpoSqueezed, OrnsteinUhlenbeck, Spectrum,
                      pure_pump_amplitude)

__all__ = [
    "StarredParams",
    "starred_fisher",
    "starred_fisher_spectrum",
    "C_value",
    "C_tau_one_closed_form",
    "C0_EXACT",
    "GAMMA_STAR_OPT",
    "OptimizeResult",
    "optimize_C",
    "SurfaceRow",
    "surface",
    "surface_to_csv",
    "surface_to_svg",
    "ConvergenceRow",
    "ConvergenceReport",
    "asymptotic_convergence_check",
]

# Closed-form optimum on the squeezed-vacuum slice tau = 1 (see C_tau_one_closed_form).
GAMMA_STAR_OPT = 2.0 * (2.0 * (math.sqrt(13.0) - 3.0)) ** (1.0 / 3.0)
C0_EXACT = (587.0 - 143.0 * math.sqrt(13.0)) ** (1.0 / 6.0) / (4.0 * math.sqrt(6.0))

_WIENER_UNIT = OrnsteinUhlenbeck(1.0, 0.0)


@dataclass(frozen=True)
class StarredParams:
    """Point in the (gamma*, tau) plane; ``R*`` and ``alpha*^2`` are derived."""

    gamma_star: float
    tau: float
    n_star: float | None = None

    def __post_init__(self):
        if not self.gamma_star > 0 or not math.isfinite(self.gamma_star):
            raise ValueError(f"gamma_star must be positive, got {self.gamma_star}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if self.n_star is not None and not self.n_star > 0:
            raise ValueError("n_star must be positive")

    @classmethod
    def from_r_star(cls, gamma_star: float, r_star: float, n_star: float | None = None):
        if not r_star >= 0:
            raise ValueError("r_star must be non-negative")
        tau = gamma_star * math.sqrt(r_star) / 8.0
        if tau > 1.0 + 1e-12:
            raise ValueError(f"gamma_star*sqrt(r_star)/8 = {tau} exceeds 1: flux would be negative")
        return cls(gamma_star, min(tau, 1.0), n_star)

    @property
    def r_star(self) -> float:
        return (8.0 * self.tau / self.gamma_star) ** 2

    @property
    def alpha_star_sq(self) -> float:
        return 1.0 - self.tau


def _starred_lorentzians(params: StarredParams) -> LorentzianSum:
    g, r = params.gamma_star, params.r_star
    if r == 0.0:
        # tau = 0: the first width diverges while its weight stays finite, and
        # the pointwise limit of both terms is zero.
        return LorentzianSum(())
    sr = math.sqrt(r)
    return LorentzianSum((
        (4.0 * params.alpha_star_sq * r, g / sr),
        (g * r * sr / 8.0, 2.0 * g / sr),
    ))


def starred_fisher(params: StarredParams, omega_star):
    """``F*(w*)``; identically zero in the coherent limit ``tau = 0``."""
    return _starred_lorentzians(params)(omega_star)


def starred_fisher_spectrum(params: StarredParams) -> Spectrum:
    return Spectrum.lorentzians(_starred_lorentzians(params))


def C_value(params: StarredParams, epsrel: float = 1e-11) -> float:
    """Universal constant ``C(gamma*, tau)``; infinite at ``tau = 0``."""
    fq = starred_fisher_spectrum(params)
    if not fq.continuous.terms:
        return math.inf
    return crb_mse(_WIENER_UNIT.fisher_spectrum(), fq, epsrel=epsrel).value


def C_tau_one_closed_form(gamma_star: float) -> float:
    """Oracle for the squeezed-vacuum slice.

    With ``a = gamma*^4/16`` and ``b = 4 gamma*^2`` the integrand is
    ``(a + w^2)/(w^4 + a w^2 + b)``; partial fractions over the quartic give
    ``C = (1 + a/sqrt(b)) / (2 sqrt(a + 2 sqrt(b)))``.  Minimising over
    ``gamma*`` leads to ``u^2 + 96 u - 1024 = 0`` with ``u = gamma*^3``.
    """
    a = gamma_star**4 / 16.0
    sb = 2.0 * gamma_star
    return (1.0 + a / sb) / (2.0 * math.sqrt(a + 2.0 * sb))


# ---------------------------------------------------------------------------
# Surface and optimisation
# ---------------------------------------------------------------------------

def _safe_C(gamma_star: float, tau: float) -> float:
    try:
        return C_value(StarredParams(float(gamma_star), float(tau)))
    except (ValueError, RuntimeError):
        return math.nan


@dataclass(frozen=True)
class SurfaceRow:
    gamma_star: float
    tau: float
    C: float


def surface(gamma_grid: Sequence[float], tau_grid: Sequence[float],
            threads: int = 1) -> list[SurfaceRow]:
    """Evaluate ``C`` on every grid cell, ordered gamma-major.

    Cells that fail, or where ``C`` is infinite, carry NaN / inf rather than
    aborting the sweep.
    """
    gammas = [float(g) for g in gamma_grid]
    taus = [float(t) for t in tau_grid]
    if any(not g > 0 for g in gammas):
        raise ValueError("gamma_star grid must be strictly positive")
    if any(not 0 <= t <= 1 for t in taus):
        raise ValueError("tau grid must lie in [0, 1]")
    cells = [(g, t) for g in gammas for t in taus]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda c: _safe_C(*c), cells))
    else:
        values = [_safe_C(*c) for c in cells]
    return [SurfaceRow(g, t, v) for (g, t), v in zip(cells, values)]


def surface_to_csv(rows: Sequence[SurfaceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["gamma_star", "tau", "C"])
    for r in rows:
        w.writerow([f"{r.gamma_star:.17g}", f"{r.tau:.17g}", f"{r.C:.17g}"])
    return buf.getvalue()


def surface_to_svg(rows: Sequence[SurfaceRow]) -> str:
    """Heatmap of ``log10 C`` rendered with a fixed palette (viridis)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    gammas = sorted({r.gamma_star for r in rows})
    taus = sorted({r.tau for r in rows})
    grid = np.full((len(taus), len(gammas)), np.nan)
    gi = {g: i for i, g in enumerate(gammas)}
    ti = {t: i for i, t in enumerate(taus)}
    for r in rows:
        if math.isfinite(r.C) and r.C > 0:
            grid[ti[r.tau], gi[r.gamma_star]] = math.log10(r.C)
    with matplotlib.rc_context({"svg.hashsalt": "phasecrb", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        mesh = ax.pcolormesh(gammas, taus, grid, cmap="viridis", shading="nearest")
        fig.colorbar(mesh, ax=ax, label="log10 C")
        ax.set_xlabel("gamma*")
        ax.set_ylabel("tau")
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


@dataclass(frozen=True)
class OptimizeResult:
    gamma_star: float
    tau: float
    C0: float
    boundary_hit: bool
    evaluations: int
    grid_best: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "gamma_star": self.gamma_star,
            "tau": self.tau,
            "C0": self.C0,
            "boundary_hit": self.boundary_hit,
            "evaluations": self.evaluations,
            "grid_best": list(self.grid_best),
        }


def optimize_C(gamma_range: tuple[float, float] = (0.0, 4.0),
               tau_range: tuple[float, float] = (0.0, 1.0),
               grid_shape: tuple[int, int] = (64, 32),
               fatol: float = 1e-6, threads: int = 1) -> OptimizeResult:
    """Coarse grid scan followed by a bounded Nelder-Mead refinement.

    A lower gamma* limit of 0 is treated as open: the grid starts one cell
    above it.  ``boundary_hit`` is set when the minimiser sits on an edge of
    the box other than ``tau = 1``.
    """
    g_lo, g_hi = gamma_range
    t_lo, t_hi = tau_range
    if not (0 <= g_lo < g_hi and 0 <= t_lo <= t_hi <= 1):
        raise ValueError("invalid search box")
    ng, nt = grid_shape
    step = (g_hi - g_lo) / ng
    g_min = g_lo if g_lo > 0 else step * 1e-3
    gammas = np.linspace(g_lo + step if g_lo == 0 else g_lo, g_hi, ng)
    taus = np.linspace(t_lo, t_hi, nt) if t_hi > t_lo else np.array([t_lo])
    rows = surface(gammas, taus, threads=threads)
    finite = [r for r in rows if math.isfinite(r.C)]
    if not finite:
        if all(r.C == math.inf for r in rows):
            # e.g. the coherent slice tau = 0, where C is infinite everywhere
            r0 = rows[0]
            return OptimizeResult(r0.gamma_star, r0.tau, math.inf, False, len(rows),
                                  (r0.gamma_star, r0.tau, math.inf))
        raise RuntimeError("C could not be evaluated anywhere in the search box")
    best = min(finite, key=lambda r: r.C)

    def objective(v):
        c = _safe_C(v[0], v[1])
        return c if math.isfinite(c) else 1e300

    if t_hi > t_lo:
        x0 = [best.gamma_star, best.tau]
        bounds = [(g_min, g_hi), (t_lo, t_hi)]
        simplex = np.array([x0, [x0[0] - 0.5 * step, x0[1]], [x0[0], x0[1] - 0.5 * (taus[1] - taus[0])]])
        simplex = np.clip(simplex, [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                       options={"fatol": fatol, "xatol": 1e-7, "initial_simplex": simplex,
                                "maxiter": 2000})
        g_opt, t_opt = float(res.x[0]), float(res.x[1])
        nfev = int(res.nfev)
    else:
        bounds = [(g_min, g_hi)]
        res = minimize(lambda v: objective([v[0], t_lo]), [best.gamma_star], method="Nelder-Mead",
                       bounds=bounds, options={"fatol": fatol, "xatol": 1e-7, "maxiter": 2000})
        g_opt, t_opt = float(res.x[0]), t_lo
        nfev = int(res.nfev)
    c_opt = _safe_C(g_opt, t_opt)
    if not c_opt <= best.C:
        g_opt, t_opt, c_opt = best.gamma_star, best.tau, best.C
    edge = 1e-6
    boundary = (abs(g_opt - g_min) < edge * max(1, g_hi) or abs(g_opt - g_hi) < edge * max(1, g_hi)
                or (abs(t_opt - t_lo) < edge and t_lo != 1.0)
                or (abs(t_opt - t_hi) < edge and t_hi != 1.0))
    return OptimizeResult(g_opt, t_opt, c_opt, bool(boundary), len(rows) + nfev,
                          (best.gamma_star, best.tau, best.C))


# ---------------------------------------------------------------------------
# Finite-N* convergence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n_star: float
    rescaled_bound: float
    deviation: float
    ok: bool
    message: str = ""


@dataclass
class ConvergenceReport:
    params: StarredParams
    C: float
    mapping: str
    rows: list[ConvergenceRow] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        devs = [abs(r.deviation) for r in self.rows if r.ok]
        return all(b < a for a, b in zip(devs, devs[1:]))

    def rate_exponent(self) -> float:
        """Least-squares slope of ``log |deviation|`` against ``log N*``."""
        good = [r for r in self.rows if r.ok and r.deviation != 0 and math.isfinite(r.deviation)]
        if len(good) < 2:
            return math.nan
        lx = np.log([r.n_star for r in good])
        ly = np.log([abs(r.deviation) for r in good])
        return float(np.polyfit(lx, ly, 1)[0])

    def to_dict(self) -> dict:
        return {
            "gamma_star": self.params.gamma_star,
            "tau": self.params.tau,
            "C": self.C,
            "mapping": self.mapping,
            "rate_exponent": self.rate_exponent(),
            "rows": [r.__dict__ for r in self.rows],
        }


def _unstarred_beam(params: StarredParams, n_star: float, kappa: float, mapping: str):
    """Physical OPO beam for ``N*`` and the flux used for rescaling."""
    r_plus = params.r_star * n_star ** (1.0 / 3.0)
    gamma = params.gamma_star * kappa * n_star ** (5.0 / 6.0)
    if mapping == "leading":
        # Leading-order pure-state relations, with alpha from the starred constraint.
        if not r_plus >= 4.0:
            raise ValueError(f"R+ = {r_plus:.4g} < 4 makes x = 1 - 2/sqrt(R+) negative")
        x = 1.0 - 2.0 / math.sqrt(r_plus)
        alpha_sq = params.alpha_star_sq * kappa * n_star
    elif mapping == "exact":
        # Exact pure state; alpha fixed so that the flux is exactly kappa N*.
        if not r_plus >= 1.0:
            raise ValueError(f"R+ = {r_plus:.4g} < 1 is not a squeezed beam")
        x = pure_pump_amplitude(r_plus)
        fluct = gamma / 16.0 * ((r_plus - 1) * (1 - x) + (1 / r_plus - 1) * (1 + x))
        alpha_sq = kappa * n_star - fluct
        if alpha_sq < 0:
            raise ValueError("fluctuation flux alone exceeds kappa N*")
    else:
        raise ValueError(f"unknown mapping {mapping!r}; use 'leading' or 'exact'")
    return OpoSqueezed(math.sqrt(alpha_sq), r_plus, 1.0 / r_plus, gamma, x)


def asymptotic_convergence_check(params: StarredParams, n_star_list: Sequence[float],
                                 kappa: float = 1.0, mapping: str = "leading") -> ConvergenceReport:
    """Relative deviation of ``N*^(2/3) F^{-1}(0)`` from ``C`` at finite ``N*``.

    Each row builds the full OPO information spectrum at the un-starred
    parameters and integrates it against a Wiener prior of strength
    ``kappa``.  At ``tau = 0`` the beam is coherent and ``C`` is infinite,
    so the deviation is reported as the rescaled bound itself.
    """
    if mapping not in ("leading", "exact"):
        raise ValueError(f"unknown mapping {mapping!r}; use 'leading' or 'exact'")
    c = C_value(params)
    report = ConvergenceReport(params, c, mapping)
    for n_star in n_star_list:
        n_star = float(n_star)
        try:
            if params.tau == 0.0:
                bound = coherent_closed_form(kappa, 0.0, kappa * n_star)
            else:
                beam = _unstarred_beam(params, n_star, kappa, mapping)
                bound = crb_mse(OrnsteinUhlenbeck(kappa, 0.0).fisher_spectrum(),
                                opo_quantum_fisher_spectrum(beam)).value
            rescaled = n_star ** (2.0 / 3.0) * bound
            dev = rescaled / c - 1.0 if math.isfinite(c) else rescaled
            report.rows.append(ConvergenceRow(n_star, rescaled, dev, True))
        except (ValueError, RuntimeError) as exc:
            report.rows.append(ConvergenceRow(n_star, math.nan, math.nan, False, str(exc)))
    return report
