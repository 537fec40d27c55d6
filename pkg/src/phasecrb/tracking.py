"""Phase tracking simulations that test whether the bound is attained.

The linearised homodyne model is

    d phi = -lam phi dt + sqrt(kappa) dW,      dy = 2 alpha m(phi - Phi) dt + dV,

with unit-intensity white noise ``dV``.  Each trajectory is filtered by a
discrete Kalman filter that uses the exact OU transition, and smoothed
with a two-filter (forward/backward information) combination.  Colored
measurement noise from squeezed light is handled in the frequency domain
by :func:`wiener_smoother_mse`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .bound import coherent_closed_form, crb_mse
from .spectra import OrnsteinUhlenbeck, PhaseNoiseModel, PowerLaw, Spectrum

__all__ = [
    "TrackingConfig",
    "TrackingRecord",
    "TrackingResult",
    "simulate_record",
    "riccati_steady_state",
    "monte_carlo_mse",
    "wiener_smoother_mse",
    "records_to_csv",
]

FEEDBACK_MODES = ("linearized", "adaptive_nonlinear")
DT_RESOLUTION = 1e-2


def _as_ou(phase) -> tuple[float, float]:
    if phase is None:
        return 0.0, 0.0
    if isinstance(phase, OrnsteinUhlenbeck):
        return phase.kappa, phase.lam
    if isinstance(phase, PowerLaw) and phase.p == 2:
        return phase.kappa, 0.0
    raise ValueError("tracking needs Ornstein-Uhlenbeck or Wiener phase noise")


@dataclass(frozen=True)
class TrackingConfig:
    """Simulation settings.

    ``phase=None`` freezes the phase at zero (no diffusion), which is only
    useful for checking the measurement noise.
    """

    phase: PhaseNoiseModel | None
    alpha: float
    dt: float
    duration: float
    burn_in: float
    trajectories: int = 1
    seed: int = 0
    feedback: str = "linearized"

    def __post_init__(self):
        kappa, lam = _as_ou(self.phase)
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        fastest = max(lam, 4 * self.alpha**2, kappa)
        if self.dt * fastest > DT_RESOLUTION * (1 + 1e-12):
            raise ValueError(
                f"dt={self.dt} does not resolve the fastest rate {fastest}: "
                f"need dt*rate <= {DT_RESOLUTION}")
        if self.feedback not in FEEDBACK_MODES:
            raise ValueError(f"feedback must be one of {FEEDBACK_MODES}")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if kappa > 0:
            need = 10.0 * self.error_correlation_time
            if self.burn_in < need * (1 - 1e-12):
                raise ValueError(f"burn_in={self.burn_in} shorter than 10 error correlation times ({need})")
        if not self.duration > 2 * self.burn_in:
            raise ValueError("duration must exceed twice the burn-in")

    @property
    def kappa(self) -> float:
        return _as_ou(self.phase)[0]

    @property
    def lam(self) -> float:
        return _as_ou(self.phase)[1]

    @property
    def error_correlation_time(self) -> float:
        """``1/sqrt(lam**2 + 4 alpha**2 kappa)``: decay time of the filter error."""
        return 1.0 / math.sqrt(self.lam**2 + 4 * self.alpha**2 * self.kappa)

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(math.ceil(self.burn_in / self.dt))

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "lambda": self.lam,
            "alpha": self.alpha,
            "dt": self.dt,
            "duration": self.duration,
            "burn_in": self.burn_in,
            "trajectories": self.trajectories,
            "seed": self.seed,
            "feedback": self.feedback,
        }


def riccati_steady_state(alpha: float, kappa: float, lam: float = 0.0) -> float:
    """Stationary filtering variance: positive root of ``4a^2 P^2 + 2 lam P - kappa = 0``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive for a steady-state filter")
    # kappa / (lam + sqrt(...)) avoids cancellation when lam dominates
    return kappa / (lam + math.sqrt(lam * lam + 4 * alpha**2 * kappa))


@numba.njit(nogil=True, cache=True)
def _track(a, q, h, r, p0, phi0, w, v, adaptive, phi, zhat, xf, pf, xs):
    """Simulate, filter and smooth one trajectory in place; return cycle slips."""
    n = w.size
    sq = math.sqrt(q)
    sr = math.sqrt(r)
    x = 0.0
    p = p0
    cur = phi0
    slips = 0
    turns_prev = 0
    for k in range(n):
        if k > 0:
            cur = a * cur + sq * w[k]
            x = a * x
            p = a * a * p + q
        phi[k] = cur
        if adaptive:
            ctrl = x
            z = h * math.sin(cur - ctrl) + sr * v[k] + h * ctrl
        else:
            z = h * cur + sr * v[k]
        zhat[k] = z
        s = h * h * p + r
        gain = p * h / s
        x = x + gain * (z - h * x)
        p = (1.0 - gain * h) * p
        xf[k] = x
        pf[k] = p
        if adaptive:
            turns = int(math.floor((cur - x) / (2.0 * math.pi) + 0.5))
            if k > 0 and turns != turns_prev:
                slips += 1
            turns_prev = turns
    # Backward information filter from the end of the record.
    yy = 0.0
    yv = 0.0
    for k in range(n - 1, -1, -1):
        if pf[k] > 0.0:
            ps = 1.0 / (1.0 / pf[k] + yy)
            xs[k] = ps * (xf[k] / pf[k] + yv)
        else:
            xs[k] = xf[k]
        yy += h * h / r
        yv += h * zhat[k] / r
        denom = 1.0 + q * yy
        yy = a * a * yy / denom
        yv = a * yv / denom
    return slips


@dataclass
class TrackingRecord:
    """One simulated trajectory with its filtered and smoothed estimates."""

    t: np.ndarray
    phi: np.ndarray
    dy: np.ndarray
    filtered: np.ndarray
    smoothed: np.ndarray
    filtered_var: np.ndarray
    cycle_slips: int


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _transition(kappa: float, lam: float, dt: float) -> tuple[float, float]:
    if lam == 0.0:
        return 1.0, kappa * dt
    a = math.exp(-lam * dt)
    return a, kappa * (-math.expm1(-2 * lam * dt)) / (2 * lam)


def simulate_record(config: TrackingConfig, index: int = 0) -> TrackingRecord:
    """Simulate trajectory ``index``; the result depends only on (seed, index)."""
    n = config.steps
    kappa, lam = config.kappa, config.lam
    a, q = _transition(kappa, lam, config.dt)
    rng = _rng(config.seed, index)
    if lam > 0 and kappa > 0:
        p0 = kappa / (2 * lam)
        phi0 = math.sqrt(p0) * rng.standard_normal()
    else:
        p0, phi0 = 0.0, 0.0
    w = rng.standard_normal(n)
    v = rng.standard_normal(n)
    phi, zhat, xf, pf, xs = (np.empty(n) for _ in range(5))
    slips = _track(a, q, 2 * config.alpha, 1.0 / config.dt, p0, phi0, w, v,
                   config.feedback == "adaptive_nonlinear", phi, zhat, xf, pf, xs)
    t = config.dt * np.arange(n)
    if config.feedback == "adaptive_nonlinear":
        # zhat holds the pseudo-measurement; recover the raw homodyne increment
        prior = np.concatenate([[0.0], a * xf[:-1]])
        dy = (zhat - 2 * config.alpha * prior) * config.dt
    else:
        dy = zhat * config.dt
    return TrackingRecord(t, phi, dy, xf, xs, pf, int(slips))


def _wrap(e):
    return np.mod(e + np.pi, 2 * np.pi) - np.pi


def _trajectory_errors(config: TrackingConfig, index: int):
    rec = simulate_record(config, index)
    lo, hi = config.burn_steps, config.steps - config.burn_steps
    ef = rec.phi[lo:hi] - rec.filtered[lo:hi]
    es = rec.phi[lo:hi] - rec.smoothed[lo:hi]
    if config.feedback == "adaptive_nonlinear":
        ef, es = _wrap(ef), _wrap(es)
    return float(np.mean(ef * ef)), float(np.mean(es * es)), rec.cycle_slips, rec


@dataclass
class TrackingResult:
    mse_filtered: float
    mse_filtered_stderr: float
    mse_smoothed: float
    mse_smoothed_stderr: float
    riccati_filtered: float
    crb: float
    ratio_filter_smoother: float
    ratio_stderr: float
    cycle_slips: int
    diverged: bool
    per_trajectory: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "mse_filtered": self.mse_filtered,
            "mse_filtered_stderr": self.mse_filtered_stderr,
            "mse_smoothed": self.mse_smoothed,
            "mse_smoothed_stderr": self.mse_smoothed_stderr,
            "riccati_filtered": self.riccati_filtered,
            "crb": self.crb,
            "ratio_filter_smoother": self.ratio_filter_smoother,
            "ratio_stderr": self.ratio_stderr,
            "cycle_slips": self.cycle_slips,
            "diverged": self.diverged,
        }


def monte_carlo_mse(config: TrackingConfig, threads: int = 1,
                    keep: Sequence[int] = ()) -> tuple[TrackingResult, dict[int, TrackingRecord]]:
    """Average filtered and smoothed squared errors over all trajectories.

    Each trajectory contributes the mean over its interior samples (burn-in
    removed at both ends), so trajectory means are independent and give the
    standard errors.  Records whose index is in ``keep`` are returned too.
    """
    if config.kappa == 0:
        raise ValueError("Monte Carlo MSE needs phase diffusion (kappa > 0)")
    keep = set(int(i) for i in keep)

    def one(i):
        mf, ms, slips, rec = _trajectory_errors(config, i)
        return mf, ms, slips, (rec if i in keep else None)

    idx = range(config.trajectories)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, idx))
    else:
        out = [one(i) for i in idx]
    per = np.array([(o[0], o[1]) for o in out])
    m = per.shape[0]
    mf, ms = per.mean(axis=0)
    if m > 1:
        cov = np.cov(per.T, ddof=1) / m
        sf, ss = math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1])
        ratio = mf / ms
        # delta method for a ratio of correlated means
        rvar = ratio**2 * (cov[0, 0] / mf**2 + cov[1, 1] / ms**2 - 2 * cov[0, 1] / (mf * ms))
        rse = math.sqrt(max(rvar, 0.0))
    else:
        sf = ss = rse = math.nan
        ratio = mf / ms
    ric = riccati_steady_state(config.alpha, config.kappa, config.lam)
    result = TrackingResult(
        mse_filtered=float(mf),
        mse_filtered_stderr=sf,
        mse_smoothed=float(ms),
        mse_smoothed_stderr=ss,
        riccati_filtered=ric,
        crb=coherent_closed_form(config.kappa, config.lam, config.alpha**2),
        ratio_filter_smoother=float(ratio),
        ratio_stderr=rse,
        cycle_slips=int(sum(o[2] for o in out)),
        diverged=bool(mf > 10 * ric),
        per_trajectory=per,
    )
    records = {i: o[3] for i, o in zip(idx, out) if o[3] is not None}
    return result, records


def records_to_csv(record: TrackingRecord, stride: int = 1) -> str:
    lines = ["t,phi,phi_hat_filtered,phi_hat_smoothed"]
    for k in range(0, record.t.size, stride):
        lines.append(f"{record.t[k]:.17g},{record.phi[k]:.17g},"
                     f"{record.filtered[k]:.17g},{record.smoothed[k]:.17g}")
    return "\n".join(lines) + "\n"


def wiener_smoother_mse(phase: PhaseNoiseModel, alpha: float, s_y: Spectrum) -> float:
    """Stationary smoothing MSE with colored homodyne noise of spectrum ``s_y``.

    Equal to ``(1/2pi) int [1/Sigma(w) + 4 alpha^2 / S_Y(w)]^-1 dw``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    probe = np.concatenate([[0.0], np.geomspace(1e-6, 1e6, 241) * max(s_y.scales or (1.0,))])
    vals = s_y(probe)
    if not np.all(vals > 0) or not s_y.value_at_infinity > 0:
        raise ValueError("S_Y must be strictly positive at every frequency")
    s_inf = s_y.value_at_infinity
    level = 4 * alpha**2
    fq = Spectrum(continuous=_InverseExcess(s_y, level, s_inf), constant=level / s_inf,
                  tail_power=s_y.tail_power,
                  tail_coeff=-level * s_y.tail_coeff / s_inf**2, scales=s_y.scales)
    return crb_mse(phase.fisher_spectrum(), fq).value


@dataclass(frozen=True)
class _InverseExcess:
    """``c/S(w) - c/S(inf)``, which decays like the excess of ``S`` itself."""

    s: Spectrum
    level: float
    s_inf: float

    def __call__(self, omega):
        sv = self.s(omega)
        return self.level * (self.s_inf - sv) / (sv * self.s_inf)
