import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from wrapphase.phasemath import (PI, TWO_PI, anti_wrap, anti_wrap_torch, phi, phi_torch,
                                 sgn_star, true_phase_error, wrap)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def atan2_oracle(r, i):
    out = np.arctan2(i, r)
    return np.where(out == -np.pi, np.pi, out)


def test_sgn_star_zero_is_positive():
    assert sgn_star(0.0) == 1
    assert sgn_star(-0.0) == 1
    assert sgn_star(-2.5) == -1
    assert list(sgn_star(np.array([-1.0, 0.0, 3.0]))) == [-1, 1, 1]


@pytest.mark.parametrize("r, i, expected", [
    (1.0, 0.0, 0.0),
    (0.0, 1.0, PI / 2),
    (0.0, -1.0, -PI / 2),
    (-1.0, 0.0, PI),
    (-1.0, 1.0, 3 * PI / 4),
    (-1.0, -1.0, -3 * PI / 4),
    (1.0, -1.0, -PI / 4),
    (0.0, 0.0, 0.0),
])
def test_phi_quadrants(r, i, expected):
    assert phi(r, i) == pytest.approx(expected, abs=1e-15)


def test_phi_negative_real_axis_is_plus_pi():
    assert phi(-3.0, -0.0) == PI
    assert phi(-1.0, -1e-300) == PI


def test_phi_matches_atan2_oracle(rng):
    r = rng.standard_normal(20000) * 10 ** rng.uniform(-5, 5, 20000)
    i = rng.standard_normal(20000) * 10 ** rng.uniform(-5, 5, 20000)
    np.testing.assert_allclose(phi(r, i), atan2_oracle(r, i), atol=1e-12, rtol=0)


@given(finite, finite)
def test_phi_in_principal_interval(r, i):
    p = phi(r, i)
    assert -PI < p <= PI


@given(finite, finite, st.floats(1e-3, 1e3))
def test_phi_scale_invariant(r, i, c):
    assert anti_wrap(phi(c * r, c * i) - phi(r, i)) < 1e-9


def test_anti_wrap_examples():
    assert anti_wrap(0.0) == 0.0
    assert anti_wrap(TWO_PI) == pytest.approx(0.0, abs=1e-15)
    assert anti_wrap(PI) == pytest.approx(PI)
    assert anti_wrap(-PI) == pytest.approx(PI)
    assert anti_wrap(1.5 * PI) == pytest.approx(0.5 * PI)
    assert anti_wrap(-7.0) == pytest.approx(abs(-7.0 + TWO_PI))


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_anti_wrap_range_and_periodicity(x):
    d = anti_wrap(x)
    assert 0.0 <= d <= PI + 1e-12
    assert anti_wrap(x + TWO_PI) == pytest.approx(d, abs=1e-9)
    assert anti_wrap(-x) == pytest.approx(d, abs=1e-12)


@given(st.floats(-PI, PI), st.floats(-PI, PI))
def test_anti_wrap_equals_shortest_path(a, b):
    assert anti_wrap(a - b) == pytest.approx(true_phase_error(a, b), abs=1e-12)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_wrap_lands_in_interval_and_keeps_angle(x):
    w = wrap(x)
    assert -PI < w <= PI
    assert anti_wrap(w - x) < 1e-8


def test_phi_torch_agrees_with_numpy(rng):
    r, i = rng.standard_normal((2, 1000))
    out = phi_torch(torch.tensor(r), torch.tensor(i)).numpy()
    np.testing.assert_allclose(out, phi(r, i), atol=1e-12)


def test_phi_torch_origin_has_finite_gradient():
    r = torch.zeros(3, requires_grad=True)
    i = torch.tensor([0.0, 1.0, -1.0], requires_grad=True)
    phi_torch(r, i).sum().backward()
    assert torch.isfinite(r.grad).all() and torch.isfinite(i.grad).all()


def test_phi_torch_never_returns_minus_pi():
    out = phi_torch(torch.tensor([-1.0, -2.0]), torch.tensor([-0.0, 0.0]))
    assert (out == math.pi).all()


def test_anti_wrap_torch_value_and_gradient():
    x = torch.tensor([0.5, -0.5, 7.0, -7.0, 0.0], dtype=torch.float64, requires_grad=True)
    y = anti_wrap_torch(x)
    np.testing.assert_allclose(y.detach().numpy(), anti_wrap(x.detach().numpy()), atol=1e-14)
    y.sum().backward()
    np.testing.assert_array_equal(x.grad.numpy(), [1.0, -1.0, 1.0, -1.0, 0.0])


def test_anti_wrap_torch_zero_slope_on_tie():
    x = torch.tensor([math.pi, -math.pi], dtype=torch.float64, requires_grad=True)
    anti_wrap_torch(x).sum().backward()
    assert (x.grad == 0).all()


def test_sgn_star_examples():
    assert sgn_star(3.7) == 1
    assert sgn_star(-1e-9) == -1


def test_anti_wrap_spot_values():
    for x, want in [(-TWO_PI, 0.0), (PI / 2, PI / 2), (1.5 * PI, PI / 2)]:
        assert anti_wrap(x) == pytest.approx(want, abs=1e-15)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_anti_wrap_never_expands(x):
    assert anti_wrap(x) <= abs(x) + 1e-12


def test_anti_wrap_two_path_oracle(rng):
    x = rng.uniform(-10 * PI, 10 * PI, 100_000)
    d = np.fmod(x, TWO_PI)             # reduced into (-2pi, 2pi)
    oracle = np.minimum(np.abs(d), TWO_PI - np.abs(d))
    np.testing.assert_allclose(anti_wrap(x), oracle, atol=1e-12, rtol=0)


def test_true_phase_error_examples(rng):
    assert true_phase_error(PI - 0.1, -PI + 0.1) == pytest.approx(0.2, abs=1e-12)
    assert true_phase_error(0.3, 0.1) == pytest.approx(0.2, abs=1e-12)
    a, b = rng.uniform(-PI, PI, (2, 10_000))
    a[0] = PI
    np.testing.assert_allclose(true_phase_error(a, b), anti_wrap(a - b), atol=1e-12)


def test_phi_spec_examples():
    assert phi(1.0, 1.0) == pytest.approx(PI / 4, abs=1e-15)
    assert phi(0.0, -1.0) == -PI / 2


def test_anti_wrap_finite_difference():
    rng = np.random.default_rng(8)
    x = rng.uniform(-20, 20, 2000)
    r = np.abs(np.remainder(x + PI, TWO_PI) - PI)
    x = x[(r > 1e-3) & (PI - r > 1e-3)]
    t = torch.tensor(x, requires_grad=True)
    anti_wrap_torch(t).sum().backward()
    h = 1e-6
    fd = (anti_wrap(x + h) - anti_wrap(x - h)) / (2 * h)
    np.testing.assert_allclose(t.grad.numpy(), fd, rtol=1e-4)
    assert set(np.unique(t.grad.numpy())) <= {-1.0, 1.0}
