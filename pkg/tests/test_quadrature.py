import math

import numpy as np
import pytest

from phasecrb.quadrature import QuadratureError, gk15_adaptive, integrate_half_line


def test_polynomial_exact_on_one_interval():
    res = gk15_adaptive(lambda x: x**10, [0.0, 1.0])
    assert res.value == pytest.approx(1 / 11, rel=1e-15)


def test_lorentzian_half_line():
    res = integrate_half_line(lambda w: 1 / (w * w + 4), [0.0, 2.0, 64.0], -2.0, 1.0)
    assert res.value == pytest.approx(math.pi / 4, rel=1e-13)
    assert res.tail > 0


def test_power_law_half_line():
    p, b = 1.5, 3.0
    res = integrate_half_line(lambda w: 1 / (w**p + b), [0.0, 1.0, 10.0, 400.0], -p, 1.0)
    exact = (math.pi / p) / math.sin(math.pi / p) / b ** (1 - 1 / p)
    assert res.value == pytest.approx(exact, rel=1e-11)


def test_non_integrable_tail_rejected():
    with pytest.raises(ValueError):
        integrate_half_line(lambda w: 1 / (1 + w), [0.0, 1.0], -1.0, 1.0)


def test_nonfinite_integrand_reported():
    with pytest.raises(QuadratureError):
        gk15_adaptive(lambda x: np.where(x > 0.3, np.nan, x), [0.0, 1.0])


def test_interval_limit_reported():
    with pytest.raises(QuadratureError) as info:
        gk15_adaptive(lambda x: np.sin(1 / np.maximum(x, 1e-300)), [1e-6, 1.0], max_intervals=20)
    assert info.value.intervals > 0
