import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecrb.fisher import (
    BochnerViolation,
    SpectralGrid,
    general_f_spectrum,
    general_quantum_fisher_spectrum,
    mean_field_fisher_spectrum,
    opo_f_spectrum,
    opo_quantum_fisher_spectrum,
    validate_beam_spectrum,
)
from phasecrb.spectra import (
    Coherent,
    General,
    LorentzianSum,
    OpoSqueezed,
    Spectrum,
    photon_flux,
    pure_pump_amplitude,
    quadrature_spectra,
)


def pure(alpha, r, gamma):
    return OpoSqueezed(alpha, r, 1 / r, gamma, pure_pump_amplitude(r))


W = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 61)])


def test_coherent_opo_spectrum_is_flat():
    beam = OpoSqueezed(1.5, 1.0, 1.0, 2.0, 0.3)
    fq = opo_quantum_fisher_spectrum(beam)
    np.testing.assert_allclose(fq(W), 4 * 1.5**2, rtol=1e-15)


def test_opo_spectrum_tends_to_four_flux():
    beam = pure(1.0, 10.0, 3.0)
    fq = opo_quantum_fisher_spectrum(beam)
    assert fq(np.array([1e9]))[0] == pytest.approx(4 * photon_flux(beam), rel=1e-12)
    assert fq.value_at_infinity == pytest.approx(4 * photon_flux(beam))


def test_mean_field_examples():
    beam = pure(2.0, 5.0, 1.5)
    mf = mean_field_fisher_spectrum(beam)
    assert mf(np.array([0.0]))[0] == pytest.approx(4 * 4.0 * 5.0, rel=1e-14)
    flat = mean_field_fisher_spectrum(OpoSqueezed(2.0, 1.0, 1.0, 1.0, 0.0))
    np.testing.assert_allclose(flat(W), 16.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.05, 1.0), st.floats(1.0, 3.0), st.floats(0.1, 20.0),
       st.floats(0.0, 1.0))
def test_mean_field_below_full(alpha, r_minus, excess, gamma, frac):
    r_plus = excess / r_minus
    x = 0.999 * frac * pure_pump_amplitude(r_plus)
    beam = OpoSqueezed(alpha, r_plus, r_minus, gamma, x)
    if photon_flux(beam) <= 0:
        return
    w = W * gamma
    assert np.all(mean_field_fisher_spectrum(beam)(w) <= opo_quantum_fisher_spectrum(beam)(w) * (1 + 1e-14))


def test_general_from_coherent_is_flat():
    fq = general_quantum_fisher_spectrum(Coherent(1.3).to_general())
    np.testing.assert_allclose(fq(W), 4 * 1.3**2, rtol=1e-12)


def test_squeezed_vacuum_dc_value_two_ways():
    beam = pure(0.0, 16.0, 2.0)
    closed = opo_quantum_fisher_spectrum(beam)(np.array([0.0]))[0]
    numeric = general_quantum_fisher_spectrum(beam.to_general())(np.array([0.0]))[0]
    assert numeric == pytest.approx(closed, rel=1e-6)


def _pipeline_error(beam, refine):
    fq = general_quantum_fisher_spectrum(beam.to_general(), refine=refine)
    closed = opo_quantum_fisher_spectrum(beam)
    scales = beam.to_general().scales
    w = np.concatenate([[0.0], np.geomspace(min(scales) / 10, max(scales) * 10, 50)])
    return float(np.max(np.abs(fq(w) / closed(w) - 1)))


def test_pipeline_matches_closed_form_and_converges():
    beam = OpoSqueezed(1.3, 4.0, 0.5, 2.0, 0.3)
    errs = [_pipeline_error(beam, r) for r in (1, 2)]
    assert errs[0] < 1e-4
    assert errs[1] < errs[0]


def test_f_integral_identity_closed_form():
    beam = OpoSqueezed(0.8, 6.0, 0.3, 1.7, 0.2)
    f = opo_f_spectrum(beam)
    total = f.integral_continuous() + f.spike_total
    assert total == pytest.approx(16 * math.pi * photon_flux(beam) ** 2, rel=1e-12)


def test_f_integral_identity_pipeline():
    beam = pure(0.5, 9.0, 3.0)
    f = general_f_spectrum(beam.to_general())
    total = f.integral_continuous() + f.spike_total
    assert total == pytest.approx(16 * math.pi * photon_flux(beam) ** 2, rel=1e-6)


# -- validation --------------------------------------------------------------

def test_validate_coherent_zero_margin():
    rep = validate_beam_spectrum(Coherent(1.0).to_general())
    assert rep.passed
    unc = [c for c in rep.checks if c.name == "uncertainty"][0]
    assert unc.min_margin == 0.0


def test_validate_pure_zero_dc_margin():
    beam = pure(1.0, 25.0, 2.0)
    rep = validate_beam_spectrum(beam.to_general())
    assert rep.passed
    assert abs(rep.margin_at("uncertainty", 0.0)) < 1e-12


def test_validate_below_vacuum_fails():
    bad = General(mean_x=1.0, mean_y=0.0, h_y=Spectrum.lorentzians(LorentzianSum(((-1.5, 1.0),))))
    rep = validate_beam_spectrum(bad)
    assert not rep.passed
    failed = {c.name for c in rep.checks if not c.passed}
    assert "vacuum_y" in failed
    with pytest.raises(BochnerViolation):
        general_quantum_fisher_spectrum(bad)


def test_validate_perturbed_pure_fails():
    r = 9.0
    x = pure_pump_amplitude(r)
    bad = quadrature_spectra(1.0, r * 0.95, 1 / r, 2.0, x)
    rep = validate_beam_spectrum(bad)
    assert not rep.passed
    assert rep.margin_at("uncertainty", 0.0) < 0


def test_report_json_shape():
    rep = validate_beam_spectrum(pure(1.0, 4.0, 1.0).to_general())
    d = rep.to_dict()
    assert set(d) == {"pass", "checks"}
    assert all(set(c) == {"name", "min_margin", "argmin_omega"} for c in d["checks"])
    import json

    assert json.loads(rep.to_json())["pass"] is True


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.05, 1.0), st.floats(1.0, 3.0), st.floats(0.2, 5.0),
       st.floats(0.0, 1.0))
def test_valid_beams_have_nonnegative_information(alpha, r_minus, excess, gamma, frac):
    r_plus = excess / r_minus
    x = 0.999 * frac * pure_pump_amplitude(r_plus)
    beam = OpoSqueezed(alpha, r_plus, r_minus, gamma, x)
    if photon_flux(beam) < 1e-6:
        return
    rep = validate_beam_spectrum(beam.to_general())
    assert rep.passed
    fq = general_quantum_fisher_spectrum(beam.to_general())
    w = np.linspace(-20, 20, 81) * gamma
    assert np.all(fq(w) >= 0)
    np.testing.assert_allclose(fq(w), fq(-w), rtol=1e-12)


def test_grid_refinement_shapes():
    g = SpectralGrid.for_scales([0.5, 2.0])
    r = g.refined(2)
    assert r.spacing == pytest.approx(g.spacing / 2)
    assert r.cutoff == pytest.approx(g.cutoff * 2)
    assert g.omega.size == 2 * g.half_points + 1
