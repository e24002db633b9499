import math

import numpy as np
import pytest

from qcdirichlet.criteria import (PHI_CATALOG_NAMES, CriterionReport, bmo_norm, exp_phi, fmo_loglog_check,
                                  fmo_probe, load_phi_csv, phi_catalog, phi_divergence, phi_equivalents,
                                  radial_divergence, theorem_applicability)
from qcdirichlet.errors import InvalidArgument
from qcdirichlet.fields import constant_mu, radial_stretch_mu
from qcdirichlet.geometry import make_grid, unit_disk

LADDER = 0.5 / 2.0 ** np.arange(10)


@pytest.fixture(scope="module")
def catalog():
    return phi_catalog()


def test_unknown_verdict_rejected():
    with pytest.raises(InvalidArgument):
        CriterionReport("x", "maybe")


@pytest.mark.parametrize("name,verdict", [("exp", "holds"), ("t", "fails"), ("t^2", "fails")])
def test_phi_divergence(catalog, name, verdict):
    assert phi_divergence(catalog[name], 10.0).verdict == verdict


def test_phi_divergence_domain(catalog):
    with pytest.raises(InvalidArgument):
        phi_divergence(catalog["exp-over-t"], 0.5)


@pytest.mark.parametrize("name", PHI_CATALOG_NAMES)
def test_phi_equivalents_agree(catalog, name):
    rep = phi_equivalents(catalog[name])
    assert rep.evidence["agreement"]
    assert rep.holds


@pytest.mark.parametrize("name,label", [("exp", "holds"), ("exp-sqrt", "fails"), ("t", "fails"),
                                        ("exp-over-t", "holds"), ("t-log", "fails")])
def test_phi_classification(catalog, name, label):
    assert phi_equivalents(catalog[name]).evidence["classification"] == label


def test_catalog_convex(catalog):
    assert all(catalog[n].is_convex() for n in PHI_CATALOG_NAMES)


def test_exp_alpha_entry():
    cat = phi_catalog(2.0)
    assert "exp-alpha" in cat
    assert phi_equivalents(exp_phi(2.0)).evidence["classification"] == "holds"


def test_phi_from_csv(tmp_path):
    t = np.linspace(0.0, 60.0, 400)
    path = tmp_path / "phi.csv"
    np.savetxt(path, np.column_stack([t, np.exp(t)]), delimiter=",", header="t,phi", comments="")
    phi = load_phi_csv(path)
    assert phi.H(10.0) == pytest.approx(10.0, rel=1e-6)
    assert phi_equivalents(phi).evidence["classification"] == "holds"


def test_fmo_bounded_fields():
    assert fmo_probe(lambda z: np.ones(np.shape(z)), 0j, LADDER).holds
    assert fmo_probe(np.real, 0j, LADDER).holds


def test_fmo_log_holds_with_growing_means():
    rep = fmo_probe(lambda z: np.log(1 / np.abs(z)), 0j, LADDER)
    assert rep.holds
    means = np.array(rep.evidence["mean"])
    dev = np.array(rep.evidence["deviation"])
    assert np.all(np.diff(means) > 0.5)
    # disc deviation of log 1/|z| is 1/e at every scale
    assert np.allclose(dev, math.exp(-1), rtol=1e-3)


def test_fmo_inverse_square_never_holds():
    rep = fmo_probe(lambda z: 1 / np.abs(z) ** 2, 0j, LADDER)
    assert rep.verdict != "holds"


def test_fmo_scale_equivariant():
    f = lambda z: np.log(1 / np.abs(z))  # noqa: E731
    a = fmo_probe(f, 0j, LADDER)
    b = fmo_probe(lambda z: 3 * f(z), 0j, LADDER)
    assert np.allclose(b.evidence["deviation"], 3 * np.array(a.evidence["deviation"]))
    assert b.verdict == a.verdict


def test_fmo_point_outside_closure():
    with pytest.raises(InvalidArgument):
        fmo_probe(np.real, 1.5 + 0j, LADDER, unit_disk())


def test_fmo_ladder_leaving_field():
    g = make_grid((-1, 1, -1, 1), 64)
    from qcdirichlet.fields import ComplexField

    with pytest.raises(InvalidArgument):
        fmo_probe(ComplexField.from_function(g, np.real), 0.8 + 0j, LADDER)


def test_loglog_constant_closed_form():
    eps0 = 0.05
    eps = 0.04 / 2.0 ** np.arange(8)
    rep = fmo_loglog_check(lambda z: np.ones(np.shape(z)), 0j, eps, eps0)
    exact = 2 * math.pi * (1 / math.log(1 / eps0) - 1 / np.log(1 / eps))
    assert np.allclose(rep.evidence["ring_integral"], exact, rtol=1e-6)
    assert rep.holds


def test_loglog_log_and_power():
    eps = 0.03 / 2.0 ** np.arange(8)
    assert fmo_loglog_check(lambda z: np.log(1 / np.abs(z)), 0j, eps, 0.065).holds
    assert fmo_loglog_check(lambda z: 1 / np.abs(z) ** 2, 0j, eps, 0.065).verdict == "fails"


def test_loglog_domain_restriction():
    with pytest.raises(InvalidArgument):
        fmo_loglog_check(np.abs, 0j, [0.01, 0.005], 0.1)


def test_bmo_constant_and_translation():
    d = unit_disk()
    assert bmo_norm(lambda z: np.full(np.shape(z), 2.0), d, 200) == 0
    u = lambda z: np.real(z) ** 2  # noqa: E731
    a = bmo_norm(u, d, 300, seed=5)
    b = bmo_norm(lambda z: u(z) + 10.0, d, 300, seed=5)
    assert a == pytest.approx(b, rel=1e-12)


def test_bmo_real_part_stable():
    a = bmo_norm(np.real, unit_disk(), 1000)
    b = bmo_norm(np.real, unit_disk(), 2000)
    assert 0 < a <= b < 1.1 * a


def test_bmo_log_finite():
    v = bmo_norm(lambda z: np.log(1 / np.maximum(np.abs(z), 1e-300)), unit_disk(), 2000)
    assert 0.3 < v < 1.0


def test_radial_unit_and_constant_slopes():
    a = radial_divergence(lambda z: np.ones(np.shape(z)), None, 0j, 0.5)
    assert a.holds and a.model == "log"
    assert a.evidence["slope"] == pytest.approx(1 / (2 * math.pi), rel=0.05)
    b = radial_divergence(lambda z: np.full(np.shape(z), 3.0), None, 0j, 0.5)
    assert b.model == "log"
    assert b.evidence["slope"] == pytest.approx(1 / (6 * math.pi), rel=0.05)


def test_radial_log_borderline():
    rep = radial_divergence(lambda z: np.log(1 / np.abs(z)), None, 0j, 0.3)
    assert rep.holds and rep.model == "loglog"


def test_radial_inverse_bounded():
    rep = radial_divergence(lambda z: 1 / np.abs(z), None, 0j, 0.5)
    assert rep.verdict == "fails" and rep.model == "bounded"


def test_radial_deterministic():
    f = lambda z: 1 + np.abs(z)  # noqa: E731
    assert radial_divergence(f, None, 0j, 0.5).as_row() == radial_divergence(f, None, 0j, 0.5).as_row()


@pytest.fixture(scope="module")
def disk_grid():
    return make_grid((-1, 1, -1, 1), 512)


def test_applicability_zero_mu(disk_grid):
    rep = theorem_applicability(constant_mu(disk_grid, unit_disk(), 0), unit_disk(), [1 + 0j, 1j])
    assert all(rep.evidence["hypotheses"].values())


def test_applicability_radial_stretch(disk_grid):
    rep = theorem_applicability(radial_stretch_mu(disk_grid, unit_disk(), 2.0), unit_disk(), [1 + 0j])
    assert all(rep.evidence["hypotheses"].values())


def test_applicability_flags_convergent_point():
    g = make_grid((-1, 1, -1, 1), 512)
    K = np.minimum(1 / np.maximum(np.abs(g.z - 1), 1e-9) ** 2, 1e6)
    from qcdirichlet.fields import mu_from_dilatation, ComplexField

    mu = ComplexField(g, np.where(np.abs(g.z) < 1, mu_from_dilatation(np.maximum(K, 1.0)), 0), np.ones(g.shape, bool))
    rep = theorem_applicability(mu, unit_disk(), [1 + 0j])
    assert not rep.evidence["hypotheses"]["radial-divergence"]
    assert rep.evidence["radial_unverified_at"]
