import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcdirichlet.errors import EllipticityViolation, InvalidArgument
from qcdirichlet.fields import (ComplexField, RadialProfile, circle_average, circle_norm, constant_mu, dilatation,
                                extend_by_zero, generate_mu, load_mu_csv, radial_stretch_mu, save_mu_csv,
                                truncate_mu)
from qcdirichlet.geometry import make_grid, square, unit_disk


@pytest.fixture(scope="module")
def grid():
    return make_grid((-1.5, 1.5, -1.5, 1.5), 129)


def _const(grid, value):
    return ComplexField(grid, np.full(grid.shape, complex(value)), np.ones(grid.shape, dtype=bool))


def test_zero_mu_dilatation(grid):
    assert np.all(dilatation(_const(grid, 0)).values == 1)


def test_half_mu_dilatation(grid):
    assert np.allclose(dilatation(_const(grid, 0.5)).values, 3)


def test_unit_mu_rejected(grid):
    mu = _const(grid, 0).values.copy()
    mu[3, 4] = 1.0
    with pytest.raises(EllipticityViolation) as exc:
        dilatation(_const(grid, 0).with_values(mu))
    assert exc.value.node == (3, 4)


def test_unmasked_nodes_ignored(grid):
    vals = np.full(grid.shape, 2.0 + 0j)
    mask = np.zeros(grid.shape, dtype=bool)
    assert np.all(dilatation(ComplexField(grid, vals, mask)).values == 1)


def test_truncate_caps_and_keeps_argument(grid):
    mu = _const(grid, 0.9 * np.exp(0.7j))
    out = truncate_mu(mu, 3)
    assert np.allclose(np.abs(out.values), 0.5)
    assert np.allclose(np.angle(out.values), 0.7)


def test_truncate_below_threshold(grid):
    mu = _const(grid, 0.1)
    assert np.array_equal(truncate_mu(mu, 3).values, mu.values)


def test_truncate_to_conformal(grid):
    assert np.all(truncate_mu(_const(grid, 0.6j), 1).values == 0)


def test_truncate_bad_level(grid):
    with pytest.raises(InvalidArgument):
        truncate_mu(_const(grid, 0.1), 0.5)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0, 0.99), b=st.floats(0, 0.99), n=st.floats(1, 50), t=st.floats(-3, 3))
def test_dilatation_monotone_and_truncation_idempotent(a, b, n, t):
    g = make_grid((-1, 1, -1, 1), 4)
    lo, hi = sorted((a, b))
    K1 = dilatation(_const(g, lo * np.exp(1j * t))).values
    K2 = dilatation(_const(g, hi)).values
    assert np.all(K1.real <= K2.real + 1e-12)
    mu = _const(g, hi * np.exp(1j * t))
    once = truncate_mu(mu, n)
    assert np.allclose(truncate_mu(once, n).values, once.values, rtol=0, atol=1e-15)
    if hi > 0 and n > 1:
        assert np.allclose(np.angle(once.values), np.angle(mu.values))


def test_circle_norm_full_circle():
    assert circle_norm(lambda z: np.ones(np.shape(z)), 0, 0.5, unit_disk()) == pytest.approx(math.pi, rel=1e-12)


def test_circle_norm_boundary_point():
    v = circle_norm(lambda z: np.ones(np.shape(z)), 1, 0.5, unit_disk())
    assert v == pytest.approx(0.5 * 2 * math.acos(0.25), rel=1e-12)
    assert v == pytest.approx(1.318, abs=1e-3)


def test_circle_norm_linear():
    one = circle_norm(lambda z: np.ones(np.shape(z)), 1, 0.5, unit_disk())
    assert circle_norm(lambda z: np.full(np.shape(z), 2.5), 1, 0.5, unit_disk()) == pytest.approx(2.5 * one)


def test_circle_norm_empty_flag():
    res = circle_norm(lambda z: np.ones(np.shape(z)), 0, 3.0, unit_disk(), detail=True)
    assert res.value == 0 and res.empty


def test_circle_averages():
    assert circle_average(lambda z: np.full(np.shape(z), 7.0), 0.3, 0.4, unit_disk()) == pytest.approx(7.0)
    assert circle_average(np.abs, 0, 0.3) == pytest.approx(0.3)
    assert circle_average(np.real, 0, 0.3) == pytest.approx(0.0, abs=1e-14)


def test_norm_equals_average_times_length():
    q = lambda z: 1 + np.abs(z) ** 2  # noqa: E731
    full = circle_norm(q, 0.8, 0.6, unit_disk(), detail=True)
    avg = circle_average(q, 0.8, 0.6, unit_disk())
    assert abs(full.value - avg * full.length) < 1e-12


def test_grid_field_norm_matches_function(grid):
    q = ComplexField.from_function(grid, lambda z: 1 + np.abs(z) ** 2)
    exact = 2 * math.pi * 0.5 * (1 + 0.25)
    assert circle_norm(q, 0, 0.5) == pytest.approx(exact, rel=1e-3)


def test_extend_by_zero(grid):
    q = ComplexField.from_function(grid, lambda z: 1 + z)
    out = extend_by_zero(q, unit_disk())
    inside = np.abs(grid.z) < 1
    assert np.all(out.values[~inside] == 0)
    assert np.array_equal(out.values[inside], q.values[inside])


def test_radial_stretch_dilatation_constant(grid):
    mu = radial_stretch_mu(grid, unit_disk(), 2.0)
    K = dilatation(mu).values.real
    m = (np.abs(grid.z) < 1) & (np.abs(grid.z) > 0)
    assert np.allclose(K[m], 2.0)


def test_generators(grid):
    mu = generate_mu("constant", grid, square(1.0), value=0.2)
    inner = (np.abs(grid.z.real) < 0.9) & (np.abs(grid.z.imag) < 0.9)
    assert np.allclose(mu.values[inner], 0.2)
    assert np.all(mu.values[np.abs(grid.z.real) > 1.1] == 0)
    with pytest.raises(InvalidArgument):
        generate_mu("nope", grid, square(1.0))


def test_mu_csv_round_trip(tmp_path, grid):
    mu = constant_mu(grid, unit_disk(), 0.25 - 0.1j)
    save_mu_csv(mu, tmp_path / "mu.csv")
    back = load_mu_csv(tmp_path / "mu.csv", grid)
    assert np.array_equal(back.values, mu.values)


def test_radial_profile_requires_increasing_radii():
    with pytest.raises(InvalidArgument):
        RadialProfile(0j, np.array([0.2, 0.1]), np.array([1.0, 2.0]))


def test_masked_interpolation_does_not_leak(grid):
    inside = np.abs(grid.z) < 1
    K = ComplexField(grid, np.where(inside, 2.0, 1.0), inside)
    t = np.linspace(0, 2 * np.pi, 50)
    near = (1 - 0.3 * grid.h) * np.exp(1j * t)
    assert np.allclose(K(near), 2.0)
    plain = ComplexField(grid, K.values, np.ones(grid.shape, bool))
    assert np.min(plain(near)) < 1.9
