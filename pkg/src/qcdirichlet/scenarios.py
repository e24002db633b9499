"""Registered experiments.

A scenario is a named recipe: typed parameters, declared CSV tables and a
runner. Runners return ``{table: [row, ...]}`` with rows ordered like the
declared columns; the CLI does all file writing so every table goes through
one deterministic formatter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .beltrami import homeo_check, mrm_solve
from .config import Param
from .criteria import (PHI_CATALOG_NAMES, bmo_norm, fmo_loglog_check, fmo_probe, phi_catalog,
                       phi_equivalents, radial_divergence, theorem_applicability)
from .dirichlet import (BoundaryData, PHI_DATA, SchwarzSeries, boundary_oscillation, domain_center, solve_dirichlet,
                        trace_check)
from .errors import InvalidArgument
from .fields import MU_GENERATORS, generate_mu
from .geometry import annulus, make_grid, square, unit_disk
from .modulus import (connecting_modulus, dashed_line_family, discrete_modulus, family_grid,
                      modulus_inequality_check, radial_energy, radial_segments, ring_bound,
                      weak_flatness_probe, weighted_min_closed_form)


@dataclass(frozen=True)
class Column:
    name: str
    unit: str
    doc: str

    @property
    def header(self) -> str:
        return f"{self.name} [{self.unit}]"


@dataclass(frozen=True)
class Scenario:
    name: str
    module: str
    description: str
    params: tuple
    tables: dict
    runner: Callable
    check: Callable | None = None

    def run(self, params: dict, seed: int) -> dict:
        return self.runner(params, seed)

    def matches(self, text: str) -> bool:
        text = text.strip().lower()
        return not text or text in self.name or text == self.module


REGISTRY: dict = {}


def register(name, module, description, params=(), tables=None, check=None):
    def deco(fn):
        if name in REGISTRY:
            raise ValueError(f"duplicate scenario {name}")
        REGISTRY[name] = Scenario(name, module, description, tuple(params), tables or {}, fn, check)
        return fn
    return deco


def list_scenarios(filter_text: str = "") -> list:
    return [s for s in sorted(REGISTRY.values(), key=lambda s: s.name) if s.matches(filter_text)]


# ---------------------------------------------------------------------------
# shared parameters and columns

def build_domain(name: str):
    if name == "unit-disk":
        return unit_disk()
    if name == "square":
        return square(1.0)
    if name == "slit-square":
        return square(1.0, slits=[(-1 + 0j, 0j)])
    raise InvalidArgument(f"unknown domain {name!r}")


def _ring(p):
    if not 0 < p["r1"] < p["r2"]:
        raise InvalidArgument("need 0 < r1 < r2")


def _unit_mu(p):
    if not abs(p["mu"]) < 1:
        raise InvalidArgument("coefficient must lie in the unit disk")


def _ladder(p):
    if not 0 < p["r0"] < p["outer_radius"]:
        raise InvalidArgument("need 0 < r0 < outer_radius")


def _res(default):
    return Param("resolution", int, default, "grid nodes per side", minimum=16)


def _tol(default):
    return Param("tol", float, default, "solver tolerance", minimum=0.0, strict=True)


Q = "quantity"
V = "value"
QV = [Column(Q, "-", "name of the reported quantity"), Column(V, "mixed", "value of the quantity")]
VERDICT_COLS = [
    Column("criterion", "-", "criterion that was probed"),
    Column("point", "length", "probe point, empty when global"),
    Column("verdict", "-", "holds, fails or inconclusive"),
    Column("model", "-", "best growth model, when a fit is involved"),
    Column("parameters", "json", "parameters of the probe"),
]


def _verdict_rows(reports):
    return [[r.as_row()[c.name] for c in VERDICT_COLS] for r in reports]


# ---------------------------------------------------------------------------
# modulus engine


@register(
    "annulus-modulus", "modulus",
    "discrete modulus of radial segments crossing the ring r1 < |z| < r2, against 2 pi / log(r2/r1)",
    params=[Param("r1", float, 0.25, "inner radius", minimum=0.0), Param("r2", float, 1.0, "outer radius"),
            _res(512), _tol(1e-3), Param("n_curves", int, 1500, "number of segments", minimum=8)],
    tables={"modulus.csv": [
        Column("value", "dimensionless", "discrete modulus"),
        Column("oracle", "dimensionless", "2 pi / log(r2/r1)"),
        Column("relative_error", "dimensionless", "(value - oracle) / oracle"),
        Column("kkt_residual", "relative gap", "relative duality gap at exit"),
        Column("iterations", "count", "dual solver iterations"),
        Column("n_curves", "count", "curves in the family"),
    ]},
    check=_ring,
)
def _annulus_modulus(p, seed):
    r1, r2 = p["r1"], p["r2"]
    g = family_grid(r2 * np.exp(2j * math.pi * np.arange(64) / 64), p["resolution"])
    res = discrete_modulus(radial_segments(0j, r1, r2, p["n_curves"], g), tol=p["tol"])
    oracle = 2 * math.pi / math.log(r2 / r1)
    return {"modulus.csv": [[res.value, oracle, (res.value - oracle) / oracle, res.kkt_residual,
                             res.iterations, res.n_curves]]}


@register(
    "circle-family-modulus", "modulus",
    "discrete modulus of the circles separating the ring r1 < |z| < r2, against log(r2/r1) / (2 pi)",
    params=[Param("r1", float, 0.25, "inner radius", minimum=0.0), Param("r2", float, 1.0, "outer radius"),
            _res(256), _tol(1e-3), Param("n_curves", int, 200, "number of circles", minimum=8)],
    tables={"modulus.csv": [
        Column("value", "dimensionless", "discrete modulus"),
        Column("oracle", "dimensionless", "log(r2/r1) / (2 pi)"),
        Column("relative_error", "dimensionless", "(value - oracle) / oracle"),
        Column("kkt_residual", "relative gap", "relative duality gap at exit"),
        Column("n_curves", "count", "curves in the family"),
    ]},
    check=_ring,
)
def _circle_modulus(p, seed):
    r1, r2 = p["r1"], p["r2"]
    g = family_grid(r2 * np.exp(2j * math.pi * np.arange(64) / 64), p["resolution"])
    res = discrete_modulus(dashed_line_family(None, 0j, r1, r2, p["n_curves"], g), tol=p["tol"])
    oracle = math.log(r2 / r1) / (2 * math.pi)
    return {"modulus.csv": [[res.value, oracle, (res.value - oracle) / oracle, res.kkt_residual, res.n_curves]]}


@register(
    "grotzsch-capacity", "modulus",
    "condenser capacity of the boundary circles of an annulus, against 2 pi / log(r2/r1)",
    params=[Param("r1", float, 0.25, "inner radius", minimum=0.0), Param("r2", float, 1.0, "outer radius"),
            _res(256)],
    tables={"capacity.csv": [
        Column("value", "dimensionless", "discrete capacity"),
        Column("oracle", "dimensionless", "2 pi / log(r2/r1)"),
        Column("relative_error", "dimensionless", "(value - oracle) / oracle"),
        Column("n_E", "count", "nodes pinned on the inner plate"),
        Column("n_F", "count", "nodes pinned on the outer plate"),
    ]},
    check=_ring,
)
def _grotzsch(p, seed):
    r1, r2 = p["r1"], p["r2"]
    spec = annulus(r1, r2)
    g = make_grid((-1.2 * r2, 1.2 * r2, -1.2 * r2, 1.2 * r2), p["resolution"])
    t = np.linspace(0, 2 * math.pi, 2049)
    res = connecting_modulus(r1 * np.exp(1j * t), r2 * np.exp(1j * t), spec, g)
    oracle = 2 * math.pi / math.log(r2 / r1)
    return {"capacity.csv": [[res.value, oracle, (res.value - oracle) / oracle, res.n_E, res.n_F]]}


_Q_FIELDS = {"one": lambda z: np.ones(np.shape(z)), "one-plus-r2": lambda z: 1.0 + np.abs(z) ** 2}


@register(
    "ring-bound", "modulus",
    "extremal radial density for a majorant Q over a ring, with random admissible competitors",
    params=[Param("Q", str, "one-plus-r2", "majorant field", choices=tuple(_Q_FIELDS)),
            Param("r1", float, 0.1, "inner radius", minimum=0.0), Param("r2", float, 0.9, "outer radius"),
            Param("n_random", int, 100, "random admissible profiles", minimum=1),
            Param("n_radii", int, 256, "quadrature radii", minimum=16)],
    tables={"bound.csv": QV, "competitors.csv": [
        Column("index", "count", "competitor number"),
        Column("energy", "dimensionless", "weighted energy of the competitor"),
        Column("excess", "dimensionless", "energy minus the extremal energy 1/I"),
    ]},
    check=_ring,
)
def _ring_bound(p, seed):
    q = _Q_FIELDS[p["Q"]]
    rb = ring_bound(q, 0j, p["r1"], p["r2"], n_radii=p["n_radii"])
    e0 = radial_energy(q, 0j, rb.radii, rb.widths, rb.eta0)
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(p["n_random"]):
        eta = rng.random(rb.radii.size) + 0.05
        eta /= np.sum(eta * rb.widths)
        e = radial_energy(q, 0j, rb.radii, rb.widths, eta)
        rows.append([i, e, e - 1.0 / rb.I])
    return {"bound.csv": [["I", rb.I], ["extremal_energy", e0], ["inverse_I", 1.0 / rb.I],
                          ["extremal_gap", e0 - 1.0 / rb.I], ["min_excess", min(r[2] for r in rows)]],
            "competitors.csv": rows}


@register(
    "weighted-min-closed-form", "modulus",
    "closed-form weighted minimum of sum phi alpha^p against an SLSQP brute force",
    params=[Param("n_trials", int, 200, "random weight vectors", minimum=1),
            Param("max_atoms", int, 64, "largest atom count", minimum=2),
            Param("p", float, 2.0, "exponent", minimum=1.0)],
    tables={"trials.csv": [
        Column("trial", "count", "trial number"),
        Column("atoms", "count", "number of atoms"),
        Column("closed_form", "dimensionless", "closed-form minimum"),
        Column("brute_force", "dimensionless", "numerical minimum"),
        Column("difference", "dimensionless", "closed form minus numerical minimum"),
        Column("constraint_error", "dimensionless", "|sum alpha0 dmu - 1| for the extremal alpha0"),
    ]},
)
def _weighted_min(p, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(p["n_trials"]):
        n = int(rng.integers(2, p["max_atoms"] + 1))
        phi = rng.uniform(0.1, 10.0, n)
        m = rng.uniform(0.1, 2.0, n)
        val, a0 = weighted_min_closed_form(phi, p["p"], m)
        expo = p["p"]
        x0 = np.full(n, 1.0 / m.sum())
        sol = minimize(lambda a: float(np.dot(phi * np.abs(a) ** expo, m)), x0,
                       jac=lambda a: expo * phi * np.abs(a) ** (expo - 1) * np.sign(a) * m,
                       constraints=[{"type": "eq", "fun": lambda a: float(np.dot(a, m)) - 1.0, "jac": lambda a: m}],
                       bounds=[(0, None)] * n, method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
        rows.append([i, n, val, float(sol.fun), val - float(sol.fun), abs(float(np.dot(a0, m)) - 1.0)])
    return {"trials.csv": rows}


@register(
    "weak-flatness-disk", "modulus",
    "connecting-family moduli at a boundary point of the unit disk over a shrinking radius ladder",
    params=[_res(512), Param("outer_radius", float, 0.5, "radius R of the outer circle"),
            Param("r0", float, 0.4, "largest inner radius"), Param("levels", int, 5, "halvings", minimum=2)],
    tables={"profile.csv": [Column("radius", "length", "inner radius r"),
                            Column("modulus", "dimensionless", "modulus of the connecting family")]},
    check=_ladder,
)
def _wf_disk(p, seed):
    radii = p["r0"] / 2.0 ** np.arange(p["levels"])
    prof = weak_flatness_probe(unit_disk(), 1 + 0j, radii, p["outer_radius"], resolution=p["resolution"])
    return {"profile.csv": [[r, v] for r, v in zip(prof.radii, prof.values)]}


@register(
    "weak-flatness-slit", "modulus",
    "connecting-family moduli across the two banks of a slit in the square",
    params=[_res(512), Param("outer_radius", float, 0.4, "radius R of the outer circle"),
            Param("r0", float, 0.25, "largest inner radius"), Param("levels", int, 5, "halvings", minimum=2),
            Param("z0", float, -0.5, "slit point on the real axis")],
    tables={"profile.csv": [Column("radius", "length", "inner radius r"),
                            Column("modulus", "dimensionless", "modulus of the connecting family")]},
    check=_ladder,
)
def _wf_slit(p, seed):
    radii = p["r0"] / 2.0 ** np.arange(p["levels"])
    prof = weak_flatness_probe(build_domain("slit-square"), complex(p["z0"]), radii, p["outer_radius"],
                               resolution=p["resolution"], configuration="slit")
    return {"profile.csv": [[r, v] for r, v in zip(prof.radii, prof.values)]}


def _test_map(name):
    if name == "identity":
        return (lambda z: np.asarray(z, dtype=complex)), (lambda z: np.ones(np.shape(z)))
    if name == "affine":
        k = (1 + 0.3) / (1 - 0.3)
        return (lambda z: np.asarray(z) + 0.3 * np.conj(z)), (lambda z: np.full(np.shape(z), k))
    if name == "radial-stretch":
        return (lambda z: np.asarray(z) * np.abs(z)), (lambda z: np.full(np.shape(z), 2.0))
    raise InvalidArgument(f"unknown map {name!r}")


STANDARD_LADDER = ((0j, 0.1, 0.4), (0.25 + 0.1j, 0.2, 0.5), (1 + 0j, 0.2, 0.5))
INEQ_COLS = ["z0_re", "z0_im", "eps", "eps0", "image_modulus", "weighted_modulus", "radial_bound",
             "margin_weighted", "margin_radial", "clipped", "verdict"]


@register(
    "modulus-inequality", "modulus",
    "modulus of the image of dashed-line families against the weighted and radial lower bounds",
    params=[Param("map", str, "radial-stretch", "test map", choices=("identity", "affine", "radial-stretch")),
            _res(256), _tol(1e-3), Param("slack", float, 0.03, "allowed relative grid error", minimum=0.0)],
    tables={"inequality.csv": [
        Column("z0_re", "length", "real part of the centre"),
        Column("z0_im", "length", "imaginary part of the centre"),
        Column("eps", "length", "inner radius"),
        Column("eps0", "length", "outer radius"),
        Column("image_modulus", "dimensionless", "discrete modulus of the image family"),
        Column("weighted_modulus", "dimensionless", "1/K weighted modulus of the source family"),
        Column("radial_bound", "dimensionless", "integral of dr over the K circle norm"),
        Column("margin_weighted", "dimensionless", "relative margin over the weighted bound"),
        Column("margin_radial", "dimensionless", "relative margin over the radial bound"),
        Column("clipped", "flag", "1 when image curves left the map's grid"),
        Column("verdict", "-", "holds or fails at the given slack"),
    ]},
)
def _inequality(p, seed):
    f, K = _test_map(p["map"])
    rows = []
    for z0, eps, eps0 in STANDARD_LADDER:
        rep = modulus_inequality_check(f, K, z0, eps, eps0, unit_disk(), resolution=p["resolution"], tol=p["tol"],
                                       slack=p["slack"])
        row = rep.as_row()
        rows.append([row[c] for c in INEQ_COLS])
    return {"inequality.csv": rows}


# ---------------------------------------------------------------------------
# criteria


def _fmo_fields():
    return {
        "constant": lambda z: np.ones(np.shape(z)),
        "real-part": lambda z: np.real(z),
        "log": lambda z: np.log(1.0 / np.abs(z)),
        "inverse-square": lambda z: 1.0 / np.abs(z) ** 2,
    }


@register(
    "fmo-catalog", "criteria",
    "finite mean oscillation at the origin for bounded, logarithmic and power singular fields",
    params=[Param("levels", int, 10, "dyadic radii", minimum=6), Param("eps_max", float, 0.5, "largest radius")],
    tables={"verdicts.csv": VERDICT_COLS, "means.csv": [
        Column("field", "-", "test field"),
        Column("radius", "length", "disc radius"),
        Column("mean", "field units", "disc mean of the field"),
        Column("deviation", "field units", "mean absolute deviation from the disc mean"),
    ]},
)
def _fmo(p, seed):
    eps = p["eps_max"] / 2.0 ** np.arange(p["levels"])
    reports, rows = [], []
    for name, fn in _fmo_fields().items():
        rep = fmo_probe(fn, 0j, eps)
        rep.parameters["field"] = name
        reports.append(rep)
        for r, m, d in zip(eps, rep.evidence["mean"], rep.evidence["deviation"]):
            rows.append([name, r, m, d])
    ll = fmo_loglog_check(_fmo_fields()["log"], 0j, 0.03 / 2.0 ** np.arange(8), 0.065)
    ll.parameters["field"] = "log"
    reports.append(ll)
    return {"verdicts.csv": _verdict_rows(reports), "means.csv": rows}


@register(
    "phi-equivalence", "criteria",
    "five equivalent integral tests on the built-in catalog of dilatation weights",
    params=[Param("alpha", float, 1.0, "rate of the exponential entry", minimum=0.0),
            Param("n_decades", int, 8, "blocks in the tail test", minimum=4)],
    tables={"classification.csv": [
        Column("phi", "-", "catalog entry"),
        Column("form", "-", "integral form"),
        Column("verdict", "-", "divergent or convergent"),
        Column("last_ratio", "dimensionless", "ratio of the last two block integrals"),
    ], "summary.csv": [
        Column("phi", "-", "catalog entry"),
        Column("agreement", "flag", "1 when all forms agree"),
        Column("classification", "-", "shared classification"),
        Column("convex", "flag", "1 when the weight is convex on the sampled range"),
    ]},
)
def _phi_equiv(p, seed):
    cat = phi_catalog(p["alpha"])
    word = {"holds": "divergent", "fails": "convergent"}
    rows, summary = [], []
    for name in PHI_CATALOG_NAMES:
        rep = phi_equivalents(cat[name], p["n_decades"])
        ev = rep.evidence
        for form, verdict in ev["verdicts"].items():
            ratios = ev["ratios"][form]
            rows.append([name, form, word.get(verdict, verdict), float(ratios[-1]) if len(ratios) else math.nan])
        label = word.get(ev["classification"], ev["classification"])
        summary.append([name, int(ev["agreement"]), label, int(cat[name].is_convex())])
    return {"classification.csv": rows, "summary.csv": summary}


def _k_fields():
    return {
        "one": lambda z: np.ones(np.shape(z)),
        "three": lambda z: np.full(np.shape(z), 3.0),
        "log": lambda z: 1.0 + np.log(1.0 / np.abs(z)),
        "inverse": lambda z: 1.0 / np.abs(z),
    }


@register(
    "radial-divergence", "criteria",
    "growth of the integral of dr over the circle norm of K as the inner radius shrinks",
    params=[Param("K", str, "log", "dilatation field", choices=tuple(_k_fields())),
            Param("delta", float, 0.5, "outer radius"), Param("levels", int, 12, "dyadic levels", minimum=6)],
    tables={"verdicts.csv": VERDICT_COLS, "profile.csv": [
        Column("eps", "length", "inner radius"),
        Column("F", "dimensionless", "integral from eps to delta"),
    ]},
)
def _radial(p, seed):
    rep = radial_divergence(_k_fields()[p["K"]], None, 0j, p["delta"], p["levels"])
    rep.parameters["K"] = p["K"]
    ev = rep.evidence
    return {"verdicts.csv": _verdict_rows([rep]), "profile.csv": [[e, f] for e, f in zip(ev["eps"], ev["F"])]}


@register(
    "bmo-estimate", "criteria",
    "sampled lower estimate of the BMO seminorm of log 1/|z| on the unit disk",
    params=[Param("n_discs", int, 2000, "sampled discs", minimum=100), Param("levels", int, 3, "doublings",
                                                                               minimum=1)],
    tables={"estimates.csv": [
        Column("n_discs", "count", "sampled discs"),
        Column("estimate", "dimensionless", "largest mean deviation found"),
    ]},
)
def _bmo(p, seed):
    u = lambda z: np.log(1.0 / np.maximum(np.abs(z), 1e-300))  # noqa: E731
    rows = []
    for k in range(p["levels"]):
        n = p["n_discs"] * 2**k
        rows.append([n, float(bmo_norm(u, unit_disk(), n, seed))])
    return {"estimates.csv": rows}


@register(
    "theorem-applicability", "criteria",
    "which existence hypotheses hold for a generated coefficient on the unit disk",
    params=[Param("mu", str, "logarithmic-blowup", "coefficient generator", choices=tuple(sorted(MU_GENERATORS))),
            Param("value", float, 0.3, "constant generator value"), Param("k", float, 2.0, "stretch exponent"),
            _res(512), Param("alpha", float, 1.0, "rate in exp(alpha t)", minimum=0.0)],
    tables={"verdicts.csv": VERDICT_COLS, "hypotheses.csv": [
        Column("hypothesis", "-", "hypothesis name"),
        Column("verdict", "-", "holds, fails or inconclusive"),
    ]},
)
def _applicability(p, seed):
    spec = unit_disk()
    g = make_grid((-1, 1, -1, 1), p["resolution"])
    mu = generate_mu(p["mu"], g, spec, value=p["value"], k=p["k"])
    rep = theorem_applicability(mu, spec, [0j, 0.5 + 0j], alpha=p["alpha"])
    hyp = rep.evidence["hypotheses"]
    return {"verdicts.csv": _verdict_rows([rep]), "hypotheses.csv": [[k, "holds" if hyp[k] else "fails"] for k in sorted(hyp)]}


# ---------------------------------------------------------------------------
# Beltrami solver


@register(
    "beltrami-disk-constant", "beltrami",
    "normalized solution for a constant coefficient on the unit disk against the piecewise closed form",
    params=[Param("mu", float, 0.3, "constant coefficient"), _res(1024), _tol(1e-10),
            Param("half_width", float, 4.0, "half width of the solver box")],
    tables={"summary.csv": QV},
    check=_unit_mu,
)
def _beltrami_disk(p, seed):
    a = p["mu"]
    hw = p["half_width"]
    g = make_grid((-hw, hw, -hw, hw), p["resolution"])
    spec = unit_disk()
    mu = generate_mu("constant", g, spec, value=a)
    sol = mrm_solve(mu, p["tol"])
    z = g.z
    exact = np.where(np.abs(z) < 1, z + a * np.conj(z), z + a / np.where(z == 0, 1, z))
    # both maps are normalized up to an additive constant; compare after matching the origin
    inner = np.abs(z) <= 0.9
    off = sol.f.values[inner] - exact[inner]
    off = off - np.mean(off)
    rel = float(np.max(np.abs(off)) / np.max(np.abs(exact[inner])))
    hc = homeo_check(sol, np.abs(z) < 1.5, seed=seed)
    pv = sol.provenance
    return {"summary.csv": [["iterations", pv["iterations"]], ["iteration_bound", pv["iteration_bound"]],
                            ["relative_error", rel], ["residual", sol.residual_norm],
                            ["jacobian_positive_fraction", hc["positive_fraction"]],
                            ["homeomorphic", int(hc["homeomorphic"])]]}


# ---------------------------------------------------------------------------
# Dirichlet pipeline


REPORT_COLS = QV
TRACE_COLS = [Column("radius", "length", "test radius; 1 is the extrapolated radial limit"),
              Column("trace_error", "data units", "sup of |Re f - phi| on the test circle")]
CORR_COLS = [Column("re_boundary", "length", "boundary point of D, real part"),
             Column("im_boundary", "length", "boundary point of D, imaginary part"),
             Column("re_image", "length", "radial limit of g0, real part"),
             Column("im_image", "length", "radial limit of g0, imaginary part"),
             Column("circle_angle", "rad", "angle of the matching point on the unit circle")]
DIR_TABLES = {"report.csv": REPORT_COLS, "trace.csv": TRACE_COLS, "correspondence.csv": CORR_COLS}


def _dirichlet_tables(rep, every=16):
    trace = []
    if rep.trace is not None:
        trace = [[r, v] for r, v in zip(rep.trace.radii, rep.trace.values)]
    trace.append([1.0, rep.limit_error])
    corr = []
    c = rep.correspondence
    if c:
        for b, im, a in list(zip(c["boundary"], c["image"], c["circle_angle"]))[::every]:
            corr.append([b.real, b.imag, im.real, im.imag, a])
    return {"report.csv": [list(r) for r in rep.rows()], "trace.csv": trace, "correspondence.csv": corr}


def _data(p, seed):
    name = p["data"]
    if name == "random-trig":
        return PHI_DATA[name](seed=seed, degree=p["degree"])
    if name == "cos-k":
        return PHI_DATA[name](k=p["degree"])
    return PHI_DATA[name]()


_DATA_PARAMS = [Param("data", str, "cos-k", "boundary data", choices=tuple(sorted(PHI_DATA))),
                Param("degree", int, 1, "cos frequency or trig degree", minimum=1)]


@register(
    "dirichlet-disk-mu0-cos", "dirichlet",
    "pipeline with a zero coefficient and cos data on the unit disk, where f = z",
    params=[_res(512), _tol(1e-10), Param("n_boundary", int, 2048, "boundary samples", minimum=256)],
    tables=DIR_TABLES,
)
def _dir_mu0(p, seed):
    rep = solve_dirichlet(0.0, unit_disk(), BoundaryData.on_circle(PHI_DATA["cos-k"](k=1), p["n_boundary"]),
                          resolution=p["resolution"], tol=p["tol"], n_boundary=p["n_boundary"])
    out = _dirichlet_tables(rep)
    m = rep.mask
    err = float(np.max(np.abs(rep.f.values[m] - rep.f.grid.z[m])))
    out["report.csv"].append(["max_error_vs_z", err])
    return out


@register(
    "dirichlet-disk-constant-mu", "dirichlet",
    "pipeline with a constant coefficient on the unit disk or a star-shaped square",
    params=[Param("mu", complex, 0.3 + 0j, "constant coefficient"),
            Param("domain", str, "unit-disk", "domain", choices=("unit-disk", "square")),
            _res(1024), _tol(1e-10), Param("n_boundary", int, 2048, "boundary samples", minimum=256),
            Param("gauge", float, 0.0, "imaginary part of h at the centre")] + _DATA_PARAMS,
    tables=DIR_TABLES,
    check=_unit_mu,
)
def _dir_const(p, seed):
    spec = build_domain(p["domain"])
    data = _data(p, seed)
    c = domain_center(spec)
    phi = BoundaryData.on_domain(spec, lambda z: data(np.angle(z - c)), p["n_boundary"])
    rep = solve_dirichlet(p["mu"], spec, phi, resolution=p["resolution"], tol=p["tol"], n_boundary=p["n_boundary"],
                          gauge=p["gauge"])
    return _dirichlet_tables(rep)


@register(
    "schwarz-harmonic", "dirichlet",
    "Schwarz series of cos(n theta) data against z^n on |z| <= 0.9",
    params=[Param("N", int, 2048, "boundary samples", minimum=256), Param("n_max", int, 8, "largest n", minimum=1)],
    tables={"errors.csv": [Column("n", "count", "frequency"),
                           Column("max_error", "dimensionless", "max |h - z^n| on the test set")],
            "trace.csv": [Column("n", "count", "frequency"), Column("radius", "length", "test radius"),
                          Column("trace_error", "data units", "sup of |Re h - phi| on the circle")]},
)
def _schwarz(p, seed):
    rng = np.random.default_rng(seed)
    z = 0.9 * np.sqrt(rng.random(4000)) * np.exp(2j * math.pi * rng.random(4000))
    z = np.concatenate([z, 0.9 * np.exp(2j * math.pi * np.arange(256) / 256)])
    rows, trace = [], []
    for n in range(1, p["n_max"] + 1):
        data = PHI_DATA["cos-k"](k=n)
        h = SchwarzSeries.from_data(data(2 * math.pi * np.arange(p["N"]) / p["N"]), p["N"])
        rows.append([n, float(np.max(np.abs(h(z) - z**n)))])
        prof = trace_check(h, data, [0.5, 0.9, 0.99])
        trace += [[n, r, v] for r, v in zip(prof.radii, prof.values)]
    return {"errors.csv": rows, "trace.csv": trace}


_OSC_MAPS = {
    "identity": lambda z: np.asarray(z, dtype=complex),
    "radial-stretch": lambda z: np.asarray(z) * np.abs(z),
    "singular-inner": lambda z: np.exp((np.asarray(z) + 1) / (np.asarray(z) - 1)),
}


@register(
    "boundary-oscillation", "dirichlet",
    "diameter of the image of D near a boundary point over a shrinking radius ladder",
    params=[Param("map", str, "singular-inner", "test map", choices=tuple(_OSC_MAPS)),
            Param("z0", complex, 1 + 0j, "boundary point"), Param("levels", int, 8, "halvings", minimum=2),
            Param("n_samples", int, 10000, "sample points per level", minimum=100)],
    tables={"oscillation.csv": [Column("eps", "length", "radius"),
                                Column("diameter", "length", "diameter of f(D near z0)")]},
)
def _oscillation(p, seed):
    eps = 0.5 / 2.0 ** np.arange(p["levels"])
    prof = boundary_oscillation(_OSC_MAPS[p["map"]], unit_disk(), p["z0"], eps, p["n_samples"], seed)
    return {"oscillation.csv": [[r, v] for r, v in zip(prof.radii, prof.values)]}

