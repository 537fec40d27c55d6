import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecrb.asymptotic import (
    C0_EXACT,
    GAMMA_STAR_OPT,
    C_tau_one_closed_form,
    C_value,
    StarredParams,
    asymptotic_convergence_check,
    optimize_C,
    starred_fisher,
    surface,
    surface_to_csv,
    surface_to_svg,
)
from phasecrb.bound import crb_mse
from phasecrb.fisher import opo_quantum_fisher_spectrum
from phasecrb.spectra import OpoSqueezed, OrnsteinUhlenbeck, pure_pump_amplitude


def test_c0_closed_form_constants():
    # minimiser solves u^2 + 96u - 1024 = 0 with u = gamma*^3
    u = GAMMA_STAR_OPT**3
    assert u * u + 96 * u - 1024 == pytest.approx(0.0, abs=1e-9)
    assert C_tau_one_closed_form(GAMMA_STAR_OPT) == pytest.approx(C0_EXACT, rel=1e-14)
    assert C0_EXACT == pytest.approx(0.20788, abs=5e-6)
    assert GAMMA_STAR_OPT == pytest.approx(2.1319, abs=1e-4)


def test_c_value_reproduces_c0_to_twelve_digits():
    assert C_value(StarredParams(GAMMA_STAR_OPT, 1.0)) == pytest.approx(C0_EXACT, rel=1e-12)


@given(st.floats(0.05, 4.0))
def test_tau_one_reduced_form(gamma):
    p = StarredParams(gamma, 1.0)
    w = np.linspace(-30, 30, 31)
    np.testing.assert_allclose(starred_fisher(p, w), 4 * gamma**2 / (gamma**4 / 16 + w**2), rtol=1e-13)
    assert C_value(p) == pytest.approx(C_tau_one_closed_form(gamma), rel=1e-10)


def test_params_invariants():
    p = StarredParams(2.0, 0.6)
    assert p.gamma_star * math.sqrt(p.r_star) / 8 == pytest.approx(0.6, rel=1e-15)
    assert p.alpha_star_sq == pytest.approx(0.4)
    q = StarredParams.from_r_star(2.0, p.r_star)
    assert q.tau == pytest.approx(p.tau, rel=1e-15)
    assert C_value(q) == pytest.approx(C_value(p), rel=1e-12)
    with pytest.raises(ValueError):
        StarredParams(0.0, 0.5)
    with pytest.raises(ValueError):
        StarredParams(1.0, 1.5)
    with pytest.raises(ValueError):
        StarredParams.from_r_star(4.0, 9.0)


def test_starred_fisher_even_and_decreasing():
    p = StarredParams(1.7, 0.4)
    w = np.linspace(0, 50, 200)
    v = starred_fisher(p, w)
    assert np.all(np.diff(v) < 0)
    np.testing.assert_array_equal(v, starred_fisher(p, -w))


def test_tau_zero_is_infinite():
    p = StarredParams(2.0, 0.0)
    assert np.all(starred_fisher(p, np.array([0.0, 1.0])) == 0)
    assert C_value(p) == math.inf


def test_small_gamma_diverges():
    vals = [C_value(StarredParams(g, 0.7)) for g in (0.4, 0.02, 1e-3)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] > 5


def test_scale_invariance_in_kappa():
    # physical bound at two kappa values rescales to the same number
    params = StarredParams(GAMMA_STAR_OPT, 0.9)
    n_star = 1e5
    out = []
    for kappa in (0.3, 7.0):
        r = params.r_star * n_star ** (1 / 3)
        beam = OpoSqueezed(math.sqrt(params.alpha_star_sq * kappa * n_star), r, 1 / r,
                           params.gamma_star * kappa * n_star ** (5 / 6), pure_pump_amplitude(r))
        b = crb_mse(OrnsteinUhlenbeck(kappa, 0.0).fisher_spectrum(), opo_quantum_fisher_spectrum(beam)).value
        out.append(n_star ** (2 / 3) * b)
    assert out[0] == pytest.approx(out[1], rel=1e-9)


def test_optimize_default_box():
    res = optimize_C()
    assert res.C0 == pytest.approx(0.20788, abs=1e-3)
    assert res.gamma_star == pytest.approx(2.1319, abs=1e-2)
    assert res.tau == 1.0
    assert not res.boundary_hit
    assert C_value(StarredParams(res.gamma_star, 0.8)) <= 1.25 * res.C0


def test_optimize_coherent_slice_is_worse():
    res = optimize_C(tau_range=(0.0, 0.0), grid_shape=(16, 2))
    assert res.C0 == math.inf and res.C0 > C0_EXACT


def test_optimize_flags_boundary():
    res = optimize_C(gamma_range=(0.5, 1.0), grid_shape=(8, 4))
    assert res.boundary_hit
    assert res.gamma_star == pytest.approx(1.0, abs=1e-6)


def test_surface_table():
    rows = surface([1.0, 2.0, 3.0], [0.0, 0.5, 1.0])
    assert len(rows) == 9
    finite = [r for r in rows if math.isfinite(r.C)]
    assert all(r.C > 0 for r in finite)
    assert [r.tau for r in rows if not math.isfinite(r.C)] == [0.0, 0.0, 0.0]
    assert surface_to_csv(rows) == surface_to_csv(surface([1.0, 2.0, 3.0], [0.0, 0.5, 1.0], threads=3))


def test_surface_minimum_matches_optimizer():
    g = np.linspace(0.125, 4.0, 32)
    rows = surface(g, [1.0])
    best = min(rows, key=lambda r: r.C)
    assert abs(best.gamma_star - GAMMA_STAR_OPT) <= g[1] - g[0]
    assert best.C >= C0_EXACT


def test_surface_svg_is_deterministic():
    rows = surface([1.0, 2.0], [0.5, 1.0])
    a, b = surface_to_svg(rows), surface_to_svg(rows)
    assert a == b and a.lstrip().startswith("<?xml")


def test_convergence_leading_mapping():
    rep = asymptotic_convergence_check(StarredParams(GAMMA_STAR_OPT, 1.0), [1e2, 1e3, 1e4, 1e6])
    assert all(r.ok for r in rep.rows)
    assert rep.monotone
    assert abs(rep.rows[-1].deviation) < abs(rep.rows[1].deviation)
    assert rep.rate_exponent() == pytest.approx(-1 / 3, abs=0.1)


def test_convergence_exact_mapping_also_converges():
    rep = asymptotic_convergence_check(StarredParams(GAMMA_STAR_OPT, 1.0), [1e2, 1e4, 1e6], mapping="exact")
    assert rep.monotone


def test_convergence_coherent_grows_without_bound():
    rep = asymptotic_convergence_check(StarredParams(2.0, 0.0), [1e2, 1e4, 1e6])
    vals = [r.rescaled_bound for r in rep.rows]
    assert vals == pytest.approx([n ** (1 / 6) / 4 for n in (1e2, 1e4, 1e6)], rel=1e-12)
    assert vals[0] < vals[1] < vals[2]


def test_convergence_records_invalid_rows():
    rep = asymptotic_convergence_check(StarredParams(3.0, 0.05), [1e2, 1e6])
    assert not rep.rows[0].ok and rep.rows[0].message
    with pytest.raises(ValueError):
        asymptotic_convergence_check(StarredParams(2.0, 1.0), [1e3], mapping="other")
