import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecrb.bound import coherent_closed_form, crb_mse, mean_field_bound_closed_form
from phasecrb.fisher import mean_field_fisher_spectrum
from phasecrb.spectra import LorentzianSum, OpoSqueezed, OrnsteinUhlenbeck, Spectrum, pure_pump_amplitude
from phasecrb.tracking import (
    TrackingConfig,
    monte_carlo_mse,
    records_to_csv,
    riccati_steady_state,
    simulate_record,
    wiener_smoother_mse,
)


def _pure_s_y(r, gamma):
    beam = OpoSqueezed(0.0, r, 1 / r, gamma, pure_pump_amplitude(r))
    return Spectrum.white(1.0) + beam.to_general().h_y


# -- Riccati ------------------------------------------------------------------

def test_riccati_examples():
    assert riccati_steady_state(1.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert riccati_steady_state(4.0, 1.0) == pytest.approx(0.125, rel=1e-15)
    # lam >> 2 alpha sqrt(kappa): the measurement hardly helps
    assert riccati_steady_state(1e-3, 2.0, 1e4) == pytest.approx(2.0 / (2 * 1e4), rel=1e-9)
    with pytest.raises(ValueError):
        riccati_steady_state(0.0, 1.0)


@given(st.floats(1e-2, 1e2), st.floats(1e-2, 1e2), st.floats(0.0, 1e2))
def test_filter_variance_is_twice_the_bound(alpha, kappa, lam):
    p = riccati_steady_state(alpha, kappa, lam)
    assert 4 * alpha**2 * p * p + 2 * lam * p - kappa == pytest.approx(0.0, abs=1e-12 * kappa)
    if lam == 0:
        assert p == pytest.approx(2 * coherent_closed_form(kappa, 0.0, alpha**2), rel=1e-13)


# -- configuration ------------------------------------------------------------

def test_config_validation():
    ou = OrnsteinUhlenbeck(1.0, 0.0)
    TrackingConfig(ou, 1.0, 1e-3, 20.0, 5.0)
    with pytest.raises(ValueError, match="resolve"):
        TrackingConfig(ou, 1.0, 1e-2, 20.0, 5.0)
    with pytest.raises(ValueError, match="burn_in"):
        TrackingConfig(ou, 1.0, 1e-3, 20.0, 1.0)
    with pytest.raises(ValueError, match="duration"):
        TrackingConfig(ou, 1.0, 1e-3, 9.0, 5.0)
    with pytest.raises(ValueError):
        TrackingConfig(ou, 1.0, 1e-3, 20.0, 5.0, feedback="other")
    with pytest.raises(ValueError):
        TrackingConfig(ou, 0.0, 1e-3, 20.0, 5.0)


def test_config_derived_quantities():
    cfg = TrackingConfig(OrnsteinUhlenbeck(1.0, 0.0), 4.0, 1e-2 / 64, 125.0, 1.25)
    assert cfg.error_correlation_time == pytest.approx(0.125)
    assert cfg.steps == 800_000
    assert cfg.to_dict()["alpha"] == 4.0


# -- trajectories -------------------------------------------------------------

def test_frozen_phase_gives_pure_shot_noise():
    cfg = TrackingConfig(None, 1.0, 1e-3, 10.0, 1.0)
    finals = []
    for i in range(400):
        rec = simulate_record(cfg, i)
        assert np.all(rec.phi == 0)
        finals.append(rec.dy.sum())
    finals = np.array(finals)
    # Var[y(T)] = T for unit white noise
    assert finals.var(ddof=1) == pytest.approx(10.0, rel=0.2)


def test_ou_autocovariance():
    kappa, lam = 2.0, 1.0
    cfg = TrackingConfig(OrnsteinUhlenbeck(kappa, lam), 0.5, 5e-3, 400.0, 20.0)
    lag = int(round(0.5 / cfg.dt))
    c0, c1 = [], []
    for i in range(8):
        phi = simulate_record(cfg, i).phi
        c0.append(np.mean(phi * phi))
        c1.append(np.mean(phi[:-lag] * phi[lag:]))
    var = kappa / (2 * lam)
    assert np.mean(c0) == pytest.approx(var, rel=0.15)
    assert np.mean(c1) / np.mean(c0) == pytest.approx(math.exp(-lam * 0.5), rel=0.1)


def test_records_are_reproducible_and_independent():
    cfg = TrackingConfig(OrnsteinUhlenbeck(1.0, 0.0), 1.0, 1e-3, 12.0, 5.0, seed=7)
    a, b, c = simulate_record(cfg, 3), simulate_record(cfg, 3), simulate_record(cfg, 4)
    np.testing.assert_array_equal(a.phi, b.phi)
    np.testing.assert_array_equal(a.smoothed, b.smoothed)
    assert not np.array_equal(a.phi, c.phi)
    text = records_to_csv(a, stride=1000)
    assert text.splitlines()[0] == "t,phi,phi_hat_filtered,phi_hat_smoothed"
    assert len(text.splitlines()) == 1 + 12


def test_thread_count_does_not_change_results():
    cfg = TrackingConfig(OrnsteinUhlenbeck(1.0, 0.0), 1.0, 1e-3, 12.0, 5.0, trajectories=6, seed=11)
    a, _ = monte_carlo_mse(cfg, threads=1)
    b, _ = monte_carlo_mse(cfg, threads=3)
    assert a.to_dict() == b.to_dict()


def test_small_monte_carlo_matches_theory():
    cfg = TrackingConfig(OrnsteinUhlenbeck(1.0, 0.0), 1.0, 2.5e-3, 200.0, 5.0, trajectories=40, seed=1)
    res, recs = monte_carlo_mse(cfg, keep=[0])
    assert res.riccati_filtered == pytest.approx(0.5)
    assert res.crb == pytest.approx(0.25)
    assert abs(res.mse_filtered - 0.5) < 4 * res.mse_filtered_stderr + 0.02
    assert abs(res.mse_smoothed - 0.25) < 4 * res.mse_smoothed_stderr + 0.01
    assert res.ratio_filter_smoother == pytest.approx(2.0, abs=0.2)
    assert not res.diverged
    assert set(recs) == {0}
    # steady-state filter variance, up to the O(dt) offset of the discrete update
    assert recs[0].filtered_var[-1] == pytest.approx(0.5, rel=1e-2)


def test_adaptive_feedback_agrees_when_slips_are_rare():
    base = dict(phase=OrnsteinUhlenbeck(1.0, 0.0), alpha=3.0, dt=2.5e-4, duration=60.0, burn_in=2.0,
                trajectories=10, seed=5)
    lin, _ = monte_carlo_mse(TrackingConfig(**base))
    ada, _ = monte_carlo_mse(TrackingConfig(**base, feedback="adaptive_nonlinear"))
    assert ada.cycle_slips == 0
    assert ada.mse_filtered == pytest.approx(lin.mse_filtered, rel=0.15)


def test_adaptive_feedback_slips_at_low_flux():
    cfg = TrackingConfig(OrnsteinUhlenbeck(1.0, 0.0), 0.2, 1e-2, 400.0, 60.0, trajectories=4,
                         feedback="adaptive_nonlinear")
    res, _ = monte_carlo_mse(cfg)
    assert res.cycle_slips > 0


def test_monte_carlo_needs_diffusion():
    with pytest.raises(ValueError):
        monte_carlo_mse(TrackingConfig(None, 1.0, 1e-3, 10.0, 1.0))


# -- Wiener smoother with colored noise ---------------------------------------

def test_wiener_smoother_white_noise_is_coherent_bound():
    phase = OrnsteinUhlenbeck(1.0, 0.3)
    assert wiener_smoother_mse(phase, 2.0, Spectrum.white(1.0)) == pytest.approx(
        coherent_closed_form(1.0, 0.3, 4.0), rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(1.0, 100.0), st.floats(0.1, 50.0), st.floats(0.0, 3.0))
def test_wiener_smoother_matches_mean_field_closed_form(alpha, r, gamma, lam):
    mse = wiener_smoother_mse(OrnsteinUhlenbeck(1.0, lam), alpha, _pure_s_y(r, gamma))
    cf = mean_field_bound_closed_form(alpha, r, pure_pump_amplitude(r), gamma, 1.0, lam)
    assert mse == pytest.approx(cf.value, rel=1e-8)


def test_wiener_smoother_equals_mean_field_crb():
    r, gamma, alpha = 16.0, 3.0, 1.5
    beam = OpoSqueezed(alpha, r, 1 / r, gamma, pure_pump_amplitude(r))
    phase = OrnsteinUhlenbeck(1.0, 0.0)
    crb = crb_mse(phase.fisher_spectrum(), mean_field_fisher_spectrum(beam)).value
    assert wiener_smoother_mse(phase, alpha, _pure_s_y(r, gamma)) == pytest.approx(crb, rel=1e-9)


def test_wiener_smoother_improves_with_squeezing():
    phase = OrnsteinUhlenbeck(1.0, 0.0)
    vals = [wiener_smoother_mse(phase, 1.0, _pure_s_y(r, 10.0)) for r in (1.0, 4.0, 16.0, 64.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_wiener_smoother_rejects_nonpositive_noise():
    phase = OrnsteinUhlenbeck(1.0, 0.0)
    with pytest.raises(ValueError):
        wiener_smoother_mse(phase, 1.0, Spectrum.lorentzians(LorentzianSum(((-1.0, 1.0),)), constant=1.0))
    with pytest.raises(ValueError):
        wiener_smoother_mse(phase, 1.0, Spectrum.white(0.0))
    with pytest.raises(ValueError):
        wiener_smoother_mse(phase, 0.0, Spectrum.white(1.0))


def _discrete_steady_state(alpha, dt):
    # exact fixed points of the discrete forward and backward recursions
    q, h2r = dt, 4 * alpha**2 * dt
    p, y = 0.1, 0.0
    for _ in range(20000):
        p = (p + q) / (h2r * (p + q) + 1)
        y = (y + h2r) / (1 + q * (y + h2r))
    return p, 1 / (1 / p + y)


def test_standard_errors_are_calibrated():
    alpha, dt = 1.0, 2.5e-3
    pf, ps = _discrete_steady_state(alpha, dt)
    assert pf == pytest.approx(0.5, rel=1e-2) and ps == pytest.approx(0.25, rel=1e-4)
    z = []
    for seed in range(20):
        cfg = TrackingConfig(OrnsteinUhlenbeck(1.0, 0.0), alpha, dt, 50.0, 5.0, trajectories=50, seed=100 + seed)
        res, _ = monte_carlo_mse(cfg)
        z.append([(res.mse_filtered - pf) / res.mse_filtered_stderr,
                  (res.mse_smoothed - ps) / res.mse_smoothed_stderr,
                  (res.ratio_filter_smoother - pf / ps) / res.ratio_stderr])
    z = np.array(z)
    assert np.all(np.abs(z.mean(axis=0)) < 0.8)
    assert np.all((z.std(axis=0, ddof=1) > 0.5) & (z.std(axis=0, ddof=1) < 1.6))
