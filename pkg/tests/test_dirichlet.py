import math

import numpy as np
import pytest

from qcdirichlet.beltrami import mrm_solve
from qcdirichlet.dirichlet import (BoundaryData, SchwarzSeries, boundary_oscillation, check_star_shaped, cos_data,
                                   random_trig_data, schwarz_integral, solve_dirichlet, stoilow_factor_check,
                                   szego_riemann, theodorsen_riemann, trace_check, write_correspondence_csv, write_report_csv,
                                   write_trace_csv)
from qcdirichlet.errors import InvalidArgument, InvalidDomain, ResolutionGuard, StageError
from qcdirichlet.fields import ComplexField, constant_mu
from qcdirichlet.geometry import make_grid, polygon, square, unit_disk

RADII = 1.0 - 2.0 ** -np.arange(1, 7)


def disk_points(n=200, rmax=0.95, seed=0):
    rng = np.random.default_rng(seed)
    return rmax * np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * math.pi * rng.uniform(0, 1, n))


# Schwarz integral -----------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 3])
def test_schwarz_reproduces_power(k):
    z = disk_points(rmax=0.9)
    h = schwarz_integral(cos_data(k), z, N=1024)
    assert np.max(np.abs(h - z**k)) < 1e-10


def test_schwarz_constant_and_mean_value():
    z = disk_points()
    assert np.allclose(schwarz_integral(lambda t: np.full_like(t, 2.5), z), 2.5, atol=1e-12)
    fn = random_trig_data(3, 12)
    t = 2 * math.pi * np.arange(4096) / 4096
    h0 = schwarz_integral(fn, np.array([0j]), N=4096)[0]
    assert h0.imag == 0.0
    assert abs(h0.real - fn(t).mean()) < 1e-12


def test_schwarz_linear_in_data():
    z = disk_points(50)
    a, b = random_trig_data(1, 8), random_trig_data(2, 8)
    lhs = schwarz_integral(lambda t: 2 * a(t) - 3 * b(t), z)
    rhs = 2 * schwarz_integral(a, z) - 3 * schwarz_integral(b, z)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_schwarz_gauge_and_guard():
    z = np.array([0.3 + 0.1j])
    assert schwarz_integral(cos_data(1), z, gauge=0.4)[0] == pytest.approx(z[0] + 0.4j, abs=1e-12)
    with pytest.raises(ResolutionGuard):
        schwarz_integral(cos_data(1), np.array([0.999 + 0j]), N=1024)
    with pytest.raises(InvalidArgument):
        schwarz_integral(cos_data(1), z, N=64)


def test_series_matches_integral():
    fn = random_trig_data(7, 20)
    z = disk_points(100, rmax=0.99)
    s = SchwarzSeries.from_data(fn, 2048)
    assert np.max(np.abs(s(z) - schwarz_integral(fn, z, N=2048))) < 1e-10


def test_series_derivative():
    s = SchwarzSeries.from_data(cos_data(3), 256)
    z = disk_points(20)
    assert np.allclose(s.derivative(z), 3 * z**2, atol=1e-12)


# Trace check ----------------------------------------------------------------


def test_trace_cos_bound():
    prof = trace_check(SchwarzSeries.from_data(cos_data(1)), cos_data(1), RADII)
    assert np.all(prof.values <= 2 * (1 - RADII))
    assert np.all(np.diff(prof.values) < 0)


def test_trace_constant_zero():
    c = lambda t: np.full_like(t, -1.25)
    prof = trace_check(SchwarzSeries.from_data(c), c, RADII)
    assert np.max(prof.values) < 1e-14


def test_trace_random_trig_decreasing_and_exact():
    fn = random_trig_data(0, 40)
    h = SchwarzSeries.from_data(fn, 2048)
    radii = np.array([0.5, 0.9, 0.99, 0.999])
    prof = trace_check(h, fn, radii)
    assert np.all(np.diff(prof.values) < 0)
    # the harmonic extension of a trigonometric polynomial is r^k cos/sin term by term
    rng = np.random.default_rng(0)
    a = rng.standard_normal(41) / (1 + np.arange(41))
    b = rng.standard_normal(41) / (1 + np.arange(41))
    b[0] = 0.0
    k = np.arange(41)
    t = np.linspace(0, 2 * math.pi, 300)[:, None]
    for r in radii:
        exact = np.sum(r**k * (a * np.cos(k * t) + b * np.sin(k * t)), axis=1)
        assert np.max(np.abs(h(r * np.exp(1j * t[:, 0])).real - exact)) < 1e-10


def test_trace_random_trig_boundary_limit():
    # the profile at r = 0.999 is still O(1 - r); the limit on the circle itself is the sharp test
    fn = random_trig_data(0, 40)
    h = SchwarzSeries.from_data(fn, 4096)
    t = 2 * math.pi * np.arange(1000) / 1000
    assert np.max(np.abs(h(np.exp(1j * t)).real - fn(t))) < 1e-6
    assert trace_check(h, fn, [0.99, 0.999]).values[-1] > 1e-3


def test_trace_radii_validated():
    with pytest.raises(InvalidArgument):
        trace_check(SchwarzSeries.from_data(cos_data(1)), cos_data(1), [0.5, 0.4])


def test_boundary_data_validation():
    with pytest.raises(InvalidArgument):
        BoundaryData(np.array([1, 1j, -1, -1j]), np.zeros(4))
    th = 2 * math.pi * np.arange(9) / 8
    with pytest.raises(InvalidArgument):
        BoundaryData(np.exp(1j * th), th)
    d = BoundaryData.on_circle(cos_data(2), 64)
    assert d(0.125) == pytest.approx(math.cos(2 * math.pi * 0.25), abs=1e-2)
    assert d.locate(np.array([1j]))[0] == pytest.approx(0.25, abs=1e-12)


# Riemann map ----------------------------------------------------------------


def test_theodorsen_circle():
    cm = theodorsen_riemann(lambda t: np.full_like(t, 2.0))
    assert cm.coeffs.size == 1 and cm.coeffs[0] == pytest.approx(math.log(2.0))
    assert cm(np.array([1.0 + 0.5j]))[0] == pytest.approx(0.5 + 0.25j, abs=1e-12)


def test_theodorsen_ellipse():
    a, b = 1.0, 0.8
    rho = lambda t: 1.0 / np.sqrt(np.cos(t) ** 2 / a**2 + np.sin(t) ** 2 / b**2)
    cm = theodorsen_riemann(rho)
    assert cm.residual < 1e-12 and cm.epsilon < 1
    w = np.exp(1j * 2 * math.pi * np.arange(64) / 64)
    F = cm.forward(w)
    assert np.max(np.abs(np.abs(F) - rho(np.angle(F)))) < 1e-10
    assert abs(cm.coeffs[0].imag) == 0.0
    z = 0.7 * disk_points(50)
    assert np.max(np.abs(cm.forward(cm(z)) - z)) < 1e-12
    assert cm.derivative(np.array([0j]))[0].real > 0


def test_theodorsen_fixed_point():
    rho = lambda t: 1.0 + 0.2 * np.cos(t)
    cm = theodorsen_riemann(rho)
    # one more sweep of the iteration leaves the correspondence where it is
    from qcdirichlet.dirichlet import _conjugate

    again = cm.phi + _conjugate(np.log(rho(cm.theta)))
    assert np.max(np.abs(again - cm.theta)) < 1e-11
    assert np.all(np.diff(cm.theta) > 0)


def test_theodorsen_epsilon_guard():
    rho = lambda t: np.exp(1.5 * np.cos(t))
    with pytest.raises(InvalidDomain):
        theodorsen_riemann(rho)


def test_szego_explicit_map():
    t = 2 * math.pi * np.arange(512) / 512
    F = lambda w: w + 0.2 * w**2
    cm = szego_riemann(F(np.exp(1j * t)))
    assert cm.method == "szego"
    # log F(w)/w = 0.2 w - 0.02 w^2 + ...
    assert abs(cm.coeffs[0]) < 1e-4 and abs(cm.coeffs[1] - 0.2) < 1e-4
    w = 0.5 * np.exp(1j * np.linspace(0, 6, 7))
    assert np.max(np.abs(cm(F(w)) - w)) < 1e-4


def test_szego_square_conformal_radius():
    from scipy.special import beta

    t = 2 * math.pi * np.arange(1024) / 1024
    pts = np.exp(1j * t) / np.maximum(np.abs(np.cos(t)), np.abs(np.sin(t)))
    # Schwarz-Christoffel: F(w) = C int (1 + w^4)^(-1/2), corner sqrt 2 at w = e^{i pi/4}
    radius = math.sqrt(2) / (0.25 * beta(0.25, 0.5))
    assert math.exp(szego_riemann(pts).coeffs[0].real) == pytest.approx(radius, rel=1e-4)
    sq = lambda s: 1 / np.maximum(np.abs(np.cos(s)), np.abs(np.sin(s)))
    assert math.exp(theodorsen_riemann(sq).coeffs[0].real) == pytest.approx(radius, rel=1e-4)


def test_szego_rejects_wrong_winding():
    t = 2 * math.pi * np.arange(64) / 64
    with pytest.raises(InvalidDomain):
        szego_riemann(np.exp(-1j * t))
    with pytest.raises(InvalidDomain):
        szego_riemann(3 + np.exp(1j * t))


def test_star_shaped_check():
    check_star_shaped(square())
    # a thin L whose vertex centroid falls outside
    L = polygon([0, 4, 4 + 0.2j, 0.2 + 0.2j, 0.2 + 4j, 4j])
    with pytest.raises(InvalidDomain):
        check_star_shaped(L)


# Pipeline -------------------------------------------------------------------


@pytest.fixture(scope="module")
def mu0_report():
    return solve_dirichlet(0.0, unit_disk(), BoundaryData.on_circle(cos_data(1)), resolution=256)


def test_pipeline_mu0_is_identity(mu0_report):
    f = mu0_report.f
    m = f.mask
    assert np.max(np.abs(f.values[m] - f.grid.z[m])) < 1e-10
    assert mu0_report.limit_error < 1e-6
    assert mu0_report.jacobian_positive_fraction == 1.0


def test_pipeline_trace_monotone(mu0_report):
    vals = mu0_report.trace.values
    assert np.all(np.diff(vals) < 0)
    assert np.all(vals <= 2 * (1 - mu0_report.trace.radii) + 1e-12)


def test_pipeline_constant_data():
    rep = solve_dirichlet(0.4, unit_disk(), BoundaryData.on_circle(lambda t: np.full_like(t, 3.0)), resolution=64)
    assert rep.constant
    assert np.all(rep.f.values[rep.mask] == 3.0)
    assert rep.residual == 0.0


@pytest.fixture(scope="module")
def const_reports():
    phi = BoundaryData.on_circle(cos_data(2))
    base = solve_dirichlet(0.3, unit_disk(), phi, resolution=256)
    return phi, base


def test_pipeline_constant_mu(const_reports):
    _, rep = const_reports
    assert rep.residual < 1e-8
    assert rep.jacobian_positive_fraction == 1.0
    assert rep.limit_error < 5e-3
    assert np.all(np.diff(rep.trace.values) < 0)


def test_pipeline_gauge(const_reports):
    phi, base = const_reports
    rep = solve_dirichlet(0.3, unit_disk(), phi, resolution=256, gauge=0.7)
    m = base.mask
    d = rep.f.values[m] - base.f.values[m]
    assert np.max(np.abs(d.real)) < 1e-12
    assert np.max(np.abs(d.imag - 0.7)) < 1e-12


@pytest.mark.parametrize("n", [2, 4, 8])
def test_pipeline_truncation_above_kmax(const_reports, n):
    # K = 1.3 / 0.7 < 2, so these levels leave the coefficient alone
    phi, base = const_reports
    rep = solve_dirichlet(0.3, unit_disk(), phi, resolution=256, truncation=n)
    assert np.array_equal(rep.f.values, base.f.values)


def test_pipeline_truncation_active(const_reports):
    phi, base = const_reports
    rep = solve_dirichlet(0.3, unit_disk(), phi, resolution=256, truncation=1.2)
    assert np.max(np.abs(rep.f.values - base.f.values)) > 1e-3
    assert rep.residual < 1e-8


def test_pipeline_square():
    sq = square()
    phi = BoundaryData.on_domain(sq, lambda z: np.cos(np.angle(z)))
    rep = solve_dirichlet(0.2, sq, phi, resolution=256)
    assert rep.provenance["riemann_method"] == "szego"
    assert rep.residual < 1e-8
    assert rep.jacobian_positive_fraction == 1.0
    assert rep.trace.values[-1] < rep.trace.values[0]
    assert rep.limit_error < 2e-2


def test_pipeline_rejects_annulus():
    from qcdirichlet.geometry import annulus

    with pytest.raises(StageError) as info:
        solve_dirichlet(0.0, annulus(0.5, 1.0), BoundaryData.on_circle(cos_data(1)), resolution=64)
    assert info.value.stage == "domain" and isinstance(info.value.error, InvalidDomain)


def test_report_writers(tmp_path, const_reports):
    _, rep = const_reports
    write_report_csv(rep, tmp_path / "r.csv")
    write_trace_csv(rep, tmp_path / "t.csv")
    write_correspondence_csv(rep, tmp_path / "c.csv")
    trace = (tmp_path / "t.csv").read_text().strip().splitlines()
    assert "[" in trace[0]
    assert trace[-1].startswith("1.0,")
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 1 + 2048 // 16
    assert "trace_error@limit" in (tmp_path / "r.csv").read_text()


# Boundary oscillation -------------------------------------------------------

EPS = 0.2 / 2.0 ** np.arange(8)


@pytest.mark.parametrize("fn", [lambda z: z, lambda z: z * np.abs(z)])
def test_oscillation_continuous_maps(fn):
    prof = boundary_oscillation(fn, unit_disk(), 1.0, EPS, n_samples=2000)
    assert prof.values[0] < 0.01
    assert np.all(np.diff(prof.values) > 0)
    assert "truncated" not in prof.label


def test_oscillation_identity_is_two_eps():
    prof = boundary_oscillation(lambda z: z, unit_disk(), 1.0, EPS, n_samples=2000)
    assert np.allclose(prof.values, 2 * prof.radii, rtol=0.05)


def test_oscillation_singular_inner():
    fn = lambda z: np.exp((z + 1) / (z - 1))
    prof = boundary_oscillation(fn, unit_disk(), 1.0, EPS, n_samples=4000)
    assert np.min(prof.values) > 1.0


def test_oscillation_ladder_validated():
    with pytest.raises(InvalidArgument):
        boundary_oscillation(lambda z: z, unit_disk(), 1.0, [0.1, 0.2])


def test_oscillation_outside_point_truncates():
    prof = boundary_oscillation(lambda z: z, unit_disk(), 1.5, [0.7, 0.3], n_samples=500)
    assert prof.label.endswith("truncated")
    assert prof.radii.tolist() == [0.7]


# Stoilow factorization ------------------------------------------------------


@pytest.fixture(scope="module")
def g_bundle():
    grid = make_grid((-2, 2, -2, 2), 1024)
    return mrm_solve(constant_mu(grid, unit_disk(), 0.3))


@pytest.mark.parametrize("post,verdict,lo,hi", [(lambda w: w, "holds", 0, 1e-6), (lambda w: w**2, "holds", 0, 1e-3),
                                                (np.conj, "fails", 0.5, 1.0)])
def test_stoilow(g_bundle, post, verdict, lo, hi):
    f = ComplexField(g_bundle.grid, post(g_bundle.f.values), g_bundle.f.mask)
    out = stoilow_factor_check(f, g_bundle, mask=np.abs(g_bundle.grid.z) < 0.9)
    assert out["gap_fraction"] <= 0.05
    assert out["verdict"] == verdict
    assert lo <= out["dbar_relative"] <= hi
