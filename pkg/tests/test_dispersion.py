from fractions import Fraction

import mpmath
import numpy as np
import pytest

from ikwave.core import ModelParams
from ikwave.dispersion import (cik_squared, cik_squared_mp, cww_squared, dispersion_curve,
                               dispersion_error_order, dispersion_errors, model_frequency,
                               pade_tanh_over_mu, solve_rational, tanh_over_mu_series)


def test_tanh_series_against_mpmath():
    coeffs = tanh_over_mu_series(6)
    assert coeffs[:3] == [1, Fraction(-1, 3), Fraction(2, 15)]
    ref = mpmath.taylor(lambda m: mpmath.tanh(m) / m if m != 0 else mpmath.mpf(1), 0, 10)
    for k, c in enumerate(coeffs):
        assert float(c) == pytest.approx(float(ref[2 * k]), rel=1e-14)


def test_pade_n1_closed_form():
    # [2/2] approximant (1 + mu^2/15)/(1 + 2 mu^2/5)
    P = pade_tanh_over_mu(1)
    assert P.num == (1, Fraction(1, 15)) and P.den == (1, Fraction(2, 5))


@pytest.mark.parametrize("N", range(0, 7))
def test_pade_matches_series(N):
    P = pade_tanh_over_mu(N)
    assert P.series(2 * N + 1) == tanh_over_mu_series(2 * N + 1)


def test_pade_order_bounds():
    with pytest.raises(ValueError):
        pade_tanh_over_mu(7)


def test_cik_n1_closed_form():
    # A = [[1, 1/3], [1/3, 1/5 + 4/(3 mu^2)]]: c^2 = det A / (a11 + a00 - 2 a01)
    for mu in (0.1, 0.7, 2.0):
        a00, a01, a11 = 1.0, 1 / 3, 1 / 5 + 4 / (3 * mu ** 2)
        expect = (a00 * a11 - a01 ** 2) / (a00 + a11 - 2 * a01)
        assert cik_squared(mu, ModelParams("h1", 1, 1.0)) == pytest.approx(expect, rel=1e-14)


@pytest.mark.parametrize("family,N", [("h1", 0), ("h1", 2), ("h2", 1), ("h2", 3)])
def test_mp_and_double_agree(family, N):
    params = ModelParams(family, N, 1.0)
    for mu in (0.05, 0.5, 1.5):
        assert float(cik_squared_mp(mu, params)) == pytest.approx(cik_squared(mu, params), rel=1e-12)


def test_shallow_limit_is_one():
    for fam in ("h1", "h2"):
        assert cik_squared(1e-6, ModelParams(fam, 2, 1.0)) == pytest.approx(1.0, abs=1e-12)
    assert cww_squared(0.0) == 1.0


def test_h2_n1_error_constant():
    # p = (0, 1): c^2 = (1 + mu^2/12)/(1 + mu^2/3) = 1 - mu^2/4 + ..., against 1 - mu^2/3
    params = ModelParams("h2", 1, 1.0)
    mu = 1e-3
    c2 = (1 + mu ** 2 / 12) / (1 + mu ** 2 / 3)
    assert cik_squared(mu, params) == pytest.approx(c2, rel=1e-15)
    assert dispersion_errors(params, [mu])[0] / mu ** 2 == pytest.approx(1 / 12, rel=1e-5)


@pytest.mark.parametrize("family,N,expected", [("h1", 1, 6), ("h1", 2, 10), ("h2", 1, 2),
                                               ("h2", 2, 6), ("h2", 3, 6)])
def test_error_exponents(family, N, expected):
    slope = dispersion_error_order(ModelParams(family, N, 1.0), 0.05, 0.2, 12)
    assert slope == pytest.approx(expected, abs=0.25)


def test_error_order_guard():
    with pytest.raises(ValueError, match="below 1e-14"):
        dispersion_error_order(ModelParams("h1", 3, 1.0), 0.01, 0.05, 8)


def test_curve_shape():
    rows = dispersion_curve(ModelParams("h1", 1, 1.0), 0.01, 2.0, 100)
    assert rows.shape == (100, 4)
    np.testing.assert_allclose(rows[:, 3], np.abs(rows[:, 2] - rows[:, 1]))


def test_model_frequency_symmetric():
    params = ModelParams("h1", 1, 0.2)
    w = model_frequency([-3.0, 3.0], params)
    assert w[0] == w[1] == pytest.approx(3 * np.sqrt(cik_squared(0.6, params)))


def test_solve_rational():
    A = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(3)]]
    assert solve_rational(A, [Fraction(3), Fraction(5)]) == [Fraction(4, 5), Fraction(7, 5)]
