import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from tipbeam.profiles import (Profile, ProfileError, gauss_order, integrate_product, integrate_profile,
                              profile_extrema)

coef = st.floats(-5, 5, allow_nan=False)
cubic = st.lists(coef, min_size=4, max_size=4)
length = st.floats(0.2, 5.0)


def test_constant_integral_over_length_two():
    assert integrate_profile(Profile.constant(1.0, 2.0)) == pytest.approx(2.0, rel=1e-15)


def test_second_moment_of_one():
    assert integrate_profile(Profile.constant(1.0, 1.0), moment=2) == pytest.approx(1 / 3, rel=1e-15)


def test_rho_squared_matches_adaptive_quadrature():
    rho = Profile([0.0, 0.4, 1.0], [[1.0, 0.5, -2.0], [0.88, -1.1, -2.0]])
    ref, _ = quad(lambda x: rho(x) ** 2, 0.0, 1.0, points=[0.4], epsabs=1e-15, epsrel=1e-13, limit=200)
    assert integrate_product(rho, rho) == pytest.approx(ref, rel=1e-12)


@given(cubic, cubic, length, st.integers(0, 2))
def test_product_integral_is_exact_for_cubics(c1, c2, l, moment):
    f, w = Profile.polynomial(c1, l), Profile.polynomial(c2, l)
    antider = (Polynomial(c1) * Polynomial(c2) * Polynomial([0] * moment + [1])).integ()
    exact = antider(l) - antider(0.0)
    scale = max(1.0, integrate_product(Profile.polynomial(np.abs(c1), l), Profile.polynomial(np.abs(c2), l),
                                       moment=moment))
    assert abs(integrate_profile(f, w, moment) - exact) <= 1e-13 * scale


@given(cubic, cubic, st.floats(-3, 3), st.floats(-3, 3))
def test_integral_is_linear(c1, c2, a, b):
    f, g = Profile.polynomial(c1, 1.0), Profile.polynomial(c2, 1.0)
    lhs = integrate_profile(a * f + b * g)
    rhs = a * integrate_profile(f) + b * integrate_profile(g)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_mismatched_domains_rejected():
    with pytest.raises(ProfileError):
        integrate_profile(Profile.constant(1.0, 1.0), Profile.constant(1.0, 2.0))


def test_gauss_order_has_one_point_margin():
    assert gauss_order(3, 3, 2) == math.ceil(9 / 2) + 1


def test_discontinuous_profile_rejected():
    with pytest.raises(ProfileError):
        Profile([0.0, 0.5, 1.0], [[0.0], [1.0]])


@pytest.mark.parametrize("breaks", [[0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0]])
def test_bad_breakpoints_rejected(breaks):
    with pytest.raises(ProfileError):
        Profile(breaks, [[1.0]] * max(len(breaks) - 1, 1))


def test_smoothness_detection():
    # x^2 continued as its own Taylor expansion at 0.5 is C-infinity
    smooth = Profile([0.0, 0.5, 1.0], [[0, 0, 1], [0.25, 1.0, 1.0]])
    kinked = Profile([0.0, 0.5, 1.0], [[0, 0, 1], [0.25, 1.0, 0.0]])
    assert smooth.is_smooth(3)
    assert kinked.is_smooth(1) and not kinked.is_smooth(2)


def test_records_round_trip(tmp_path):
    p = Profile([0.0, 0.3, 1.0], [[1.0, 2.0, 0.0, 1.0], [1.627, 2.27, 0.9, 1.0]])
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_records()))
    assert Profile.load(path) == p


def test_records_with_gap_rejected():
    recs = [{"x_start": 0, "x_end": 0.5, "coeffs": [1, 0, 0, 0]}, {"x_start": 0.6, "x_end": 1, "coeffs": [1, 0, 0, 0]}]
    with pytest.raises(ProfileError):
        Profile.from_records(recs)


@given(cubic, st.lists(st.floats(0.01, 0.99), min_size=1, max_size=4))
def test_refine_preserves_values(c, extra):
    p = Profile.polynomial(c, 1.0)
    q = p.refine(extra)
    x = np.linspace(0, 1, 41)
    for order in range(4):
        assert np.allclose(p(x, order), q(x, order), rtol=1e-10, atol=1e-10)


def test_derivatives_of_global_cubic():
    p = Profile.polynomial([1.0, -2.0, 3.0, 4.0], 2.0)
    x = 1.3
    assert p(x) == pytest.approx(1 - 2 * x + 3 * x**2 + 4 * x**3)
    assert p(x, 1) == pytest.approx(-2 + 6 * x + 12 * x**2)
    assert p(x, 2) == pytest.approx(6 + 24 * x)
    assert p(x, 3) == pytest.approx(24.0)


def test_extrema_of_interior_peak():
    p = Profile.polynomial([1.0, 1.0, -1.0], 1.0)  # 1 + x - x^2 peaks at 1.25 when x = 1/2
    lo, hi = profile_extrema(p)
    assert hi == pytest.approx(1.25, abs=1e-10)
    assert lo == pytest.approx(1.0, abs=1e-12)
