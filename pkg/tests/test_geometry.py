import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcdirichlet.errors import InvalidArgument, InvalidDomain
from qcdirichlet.geometry import (annulus, circle_trace, domain_mask, make_grid, polygon, square,
                                  square_grid, unit_disk)


def test_grid_spacing_small():
    g = make_grid((-1, 1, -1, 1), 4)
    assert g.z.size == 16
    assert g.spacing == pytest.approx((2 / 3, 2 / 3))


def test_grid_spacing_512():
    g = make_grid((-2, 2, -2, 2), 512)
    assert g.h == pytest.approx(4 / 511)


@pytest.mark.parametrize("bbox", [(0, 0, -1, 1), (-1, 1, 2, 2), (1, 0, 0, 1)])
def test_degenerate_bbox(bbox):
    with pytest.raises(InvalidArgument):
        make_grid(bbox, 8)


def test_grid_node_lookup_round_trip():
    g = square_grid(1.5, 33, center=0.2 - 0.1j)
    i, j = 7, 21
    fi, fj = g.fractional_index(g.node(i, j))
    assert (fi, fj) == pytest.approx((i, j))


def test_disk_mask_points():
    g = make_grid((-2, 2, -2, 2), 5)
    m = domain_mask(unit_disk(), g)
    assert m[2, 2]
    assert not m[4, 2]


def test_disk_mask_matches_modulus_exactly():
    g = make_grid((-1.3, 1.3, -1.3, 1.3), 257)
    assert np.array_equal(domain_mask(unit_disk(), g), np.abs(g.z) < 1)


def test_square_corner_inside():
    assert square(1.0).contains(np.array([0.999 + 0.999j]))[0]


def test_self_intersecting_polygon():
    with pytest.raises(InvalidDomain):
        polygon([0, 1 + 1j, 1, 1j])


def test_full_circle_trace():
    line = circle_trace(unit_disk(), 0, 0.5)
    assert line.n_arcs == 1
    assert line.angular_measure == pytest.approx(2 * math.pi)


def test_boundary_point_trace():
    line = circle_trace(unit_disk(), 1, 0.5)
    assert line.n_arcs == 1
    assert line.angular_measure == pytest.approx(2 * math.acos(0.25), abs=1e-12)
    assert line.angular_measure == pytest.approx(2.636, abs=1e-3)


def test_boundary_trace_against_rejection_sampling():
    rng = np.random.default_rng(4)
    t = rng.uniform(0, 2 * math.pi, 200_000)
    frac = np.mean(np.abs(1 + 0.5 * np.exp(1j * t)) < 1)
    assert circle_trace(unit_disk(), 1, 0.5).angular_measure == pytest.approx(2 * math.pi * frac, abs=0.02)


def test_empty_trace():
    assert circle_trace(unit_disk(), 0, 2).is_empty


def test_annulus_trace_skips_the_hole():
    line = circle_trace(annulus(0.3, 1.0), 0.5, 0.4)
    assert line.n_arcs == 1
    # the hole |z| < 0.3 removes the arc through z = 0.1
    assert line.angular_measure < 2 * math.pi - 0.5


def test_square_trace_refinement_stable():
    sq = square(1.0)
    a = circle_trace(sq, 0.6 + 0.2j, 0.7, 256).angular_measure
    b = circle_trace(sq, 0.6 + 0.2j, 0.7, 512).angular_measure
    assert abs(a - b) < 1e-6


def test_slit_cuts_the_circle():
    sl = square(1.0, slits=[(-1 + 0j, 0j)])
    line = circle_trace(sl, -0.5, 0.25)
    assert line.n_arcs == 2
    assert line.angular_measure == pytest.approx(2 * math.pi)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-1.4, 1.4), y=st.floats(-1.4, 1.4), r=st.floats(0.05, 2.0))
def test_arc_length_is_radius_times_measure(x, y, r):
    for spec in (unit_disk(), square(1.0), annulus(0.3, 1.0)):
        line = circle_trace(spec, complex(x, y), r)
        _, w = line.quadrature()
        assert abs(w.sum() - r * line.angular_measure) <= 1e-12 * max(1.0, r * 2 * math.pi)
