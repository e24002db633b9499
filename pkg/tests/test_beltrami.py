import math

import numpy as np
import pytest

from qcdirichlet.beltrami import (beltrami_residual, beurling_transform, bundle_from_map, cauchy_transform,
                                  homeo_check, iteration_bound, jacobian, mrm_solve, wirtinger, write_bundle_csv)
from qcdirichlet.errors import EllipticityViolation, NoConvergence, SupportViolation
from qcdirichlet.fields import ComplexField, constant_mu, radial_stretch_mu
from qcdirichlet.geometry import annulus, make_grid, unit_disk


def field(grid, fn):
    return ComplexField.from_function(grid, fn)


@pytest.fixture(scope="module")
def box():
    return make_grid((-4, 4, -4, 4), 256)


def test_wirtinger_affine():
    g = make_grid((-1, 1, -1, 1), 33)
    fz, fzb = wirtinger(field(g, lambda z: z))
    assert np.allclose(fz.values, 1, atol=1e-12) and np.allclose(fzb.values, 0, atol=1e-12)
    fz, fzb = wirtinger(field(g, np.conj))
    assert np.allclose(fz.values, 0, atol=1e-12) and np.allclose(fzb.values, 1, atol=1e-12)


def test_wirtinger_second_order():
    errs = []
    for n in (33, 65):
        g = make_grid((-1, 1, -1, 1), n)
        fz, _ = wirtinger(field(g, np.exp))
        errs.append(np.max(np.abs(fz.values - np.exp(g.z))[4:-4, 4:-4]))
    # at least second order; for analytic f the h^2 terms cancel in f_z
    assert errs[0] / errs[1] > 3.5


def test_residual_affine():
    g = make_grid((-1, 1, -1, 1), 65)
    mu = ComplexField(g, np.full(g.shape, 0.3 + 0j), np.ones(g.shape, bool))
    assert beltrami_residual(field(g, lambda z: z + 0.3 * np.conj(z)), mu) < 1e-10


def test_residual_radial_stretch_converges():
    res = []
    for n in (65, 129):
        g = make_grid((-1, 1, -1, 1), n)
        mu = radial_stretch_mu(g, annulus(0.2, 0.9), 2.0)
        mask = annulus(0.2, 0.9).contains(g.z)
        f = ComplexField(g, g.z * np.abs(g.z), mask)
        res.append(beltrami_residual(f, mu.with_values(mu.values, mask)))
    assert res[0] / res[1] > 3.0


def test_residual_square_with_constant_mu():
    g = make_grid((-1, 1, -1, 1), 129)
    mask = np.abs(g.z) < 1
    mu = ComplexField(g, np.full(g.shape, 0.5 + 0j), mask)
    r = beltrami_residual(ComplexField(g, g.z**2, mask), mu)
    exact = 0.5 * math.sqrt(np.sum(np.abs(2 * g.z[mask]) ** 2) * g.cell_area)
    assert r == pytest.approx(exact, rel=1e-6)


def test_beurling_zero_and_plancherel(box):
    zero = ComplexField(box, np.zeros(box.shape, complex), np.ones(box.shape, bool))
    assert np.all(beurling_transform(zero).values == 0)
    rng = np.random.default_rng(0)
    w = np.where(np.abs(box.z) < 1.5, rng.standard_normal(box.shape) + 1j * rng.standard_normal(box.shape), 0)
    out = beurling_transform(ComplexField(box, w, np.ones(box.shape, bool)))
    assert np.linalg.norm(out.values) <= np.linalg.norm(w) * (1 + 1e-10)


def test_beurling_support_guard(box):
    w = np.where(np.abs(box.z - 3) < 0.5, 1.0 + 0j, 0)
    with pytest.raises(SupportViolation):
        beurling_transform(ComplexField(box, w, np.ones(box.shape, bool)))


def test_beurling_disk_indicator():
    g = make_grid((-4, 4, -4, 4), 1024)
    w = ComplexField(g, np.where(np.abs(g.z) < 1, 1.0 + 0j, 0), np.ones(g.shape, bool))
    out = beurling_transform(w)
    for p in (1.5, 1.25j, 1.3 * np.exp(0.7j)):
        val = out.interpolate(np.array([p]))[0]
        assert abs(val - (-1 / p**2)) / abs(1 / p**2) < 0.02


def test_cauchy_disk_indicator(box):
    # inside the disk the transform of its indicator is conj(z) up to a constant
    w = np.where(np.abs(box.z) < 1, 1.0 + 0j, 0)
    cw = cauchy_transform(ComplexField(box, w, np.ones(box.shape, bool)))
    inner = np.abs(box.z) < 0.9
    d = cw.values[inner] - np.conj(box.z[inner])
    assert np.max(np.abs(d - d.mean())) < 0.01


def test_zero_mu_is_identity(box):
    sol = mrm_solve(constant_mu(box, unit_disk(), 0))
    assert sol.residual_norm == 0
    central = (np.abs(box.z.real) <= 2) & (np.abs(box.z.imag) <= 2)
    assert np.max(np.abs(sol.f.values - box.z)[central]) < 1e-10


def test_constant_disk_solution_and_iteration_bound():
    g = make_grid((-4, 4, -4, 4), 512)
    sol = mrm_solve(constant_mu(g, unit_disk(), 0.3), tol=1e-10)
    z = g.z
    exact = np.where(np.abs(z) < 1, z + 0.3 * np.conj(z), z + 0.3 / np.where(z == 0, 1, z))
    inner = np.abs(z) <= 0.9
    diff = sol.f.values[inner] - exact[inner]
    assert np.max(np.abs(diff - diff.mean())) / np.max(np.abs(exact[inner])) < 0.01
    pv = sol.provenance
    assert pv["iterations"] <= pv["iteration_bound"] == iteration_bound(0.3, 1e-10)
    ups = np.array(pv["updates"])
    assert np.all(np.diff(ups) < 0)
    assert sol.residual_norm <= 10 * 1e-10 * math.pi


def test_residual_scales_with_tol(box):
    mu = constant_mu(box, unit_disk(), 0.5)
    r = [mrm_solve(mu, tol).residual_norm for tol in (1e-4, 1e-6)]
    assert 20 < r[0] / r[1] < 500


def test_jacobian_single_code_path(box):
    sol = mrm_solve(constant_mu(box, unit_disk(), 0.2 + 0.1j))
    assert np.array_equal(sol.jacobian.values, jacobian(sol.fz, sol.fzb).values)


def test_ellipticity(box):
    mu = ComplexField(box, np.where(np.abs(box.z) < 1, 1.0 + 0j, 0), np.ones(box.shape, bool))
    with pytest.raises(EllipticityViolation):
        mrm_solve(mu)


def test_no_convergence_keeps_iterate(box):
    with pytest.raises(NoConvergence) as exc:
        mrm_solve(constant_mu(box, unit_disk(), 0.9), tol=1e-14, max_iter=3)
    assert exc.value.result.provenance["iterations"] == 3


def test_homeo_identity_and_reflection():
    g = make_grid((-1, 1, -1, 1), 65)
    assert homeo_check(bundle_from_map(g, lambda z: z))["homeomorphic"]
    rep = homeo_check(bundle_from_map(g, np.conj))
    assert rep["positive_fraction"] == 0 and not rep["homeomorphic"]


def test_homeo_double_cover():
    g = make_grid((-1, 1, -1, 1), 129)
    mask = annulus(0.2, 0.9).contains(g.z)
    rep = homeo_check(bundle_from_map(g, lambda z: z**2, mask=mask), mask)
    assert rep["positive_fraction"] == 1.0
    assert not rep["homeomorphic"]


def test_bundle_csv(tmp_path):
    g = make_grid((-1, 1, -1, 1), 9)
    write_bundle_csv(bundle_from_map(g, lambda z: z), tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text().splitlines()[0].count("[") >= 2


def test_tol_must_be_positive(box):
    from qcdirichlet.errors import InvalidArgument

    with pytest.raises(InvalidArgument):
        mrm_solve(constant_mu(box, unit_disk(), 0.2), tol=0.0)
