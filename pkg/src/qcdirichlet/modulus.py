"""Discrete conformal modulus of curve families, plus closed-form lower bounds.

The modulus of a family is the convex program

    minimise   sum_n w_n rho_n^2 * cell_area
    subject to (L rho)_c >= 1   for every curve c,

where ``L`` deposits each curve's arc length onto grid nodes with bilinear
weights. It is solved through its dual

    maximise   sum_c lam_c - |L^T lam|_w^2 / (4 * cell_area),   lam >= 0,

whose maximiser gives ``rho = L^T lam / (2 * cell_area * w)``. Families of
all paths joining two continua are handled by the equivalent condenser
capacity (a discrete Dirichlet-energy minimisation) in
:func:`connecting_modulus`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from .errors import InvalidArgument
from .fields import ComplexField, RadialProfile, circle_norm, evaluator
from .geometry import DashedLine, DomainSpec, Grid, circle_trace, make_grid, _segments_cross

SAMPLES_PER_CELL = 3.0


# ---------------------------------------------------------------------------
# Families and densities


@dataclass
class CurveFamily:
    """Curves on a grid. Each curve is a list of polylines (a dashed line may
    have several arcs); ``kind`` is ``"paths"`` or ``"dashed-lines"``."""

    curves: list
    grid: Grid
    kind: str = "paths"

    def __post_init__(self):
        if not self.curves:
            raise InvalidArgument("a curve family needs at least one curve")
        cleaned = []
        for c in self.curves:
            polys = [np.asarray(p, dtype=complex) for p in (c if isinstance(c, (list, tuple)) else [c])]
            for p in polys:
                if len(p) < 2:
                    raise InvalidArgument("every curve needs at least two samples")
                if np.any(np.abs(np.diff(p)) <= 0):
                    raise InvalidArgument("curve samples must have positive segment lengths")
                if not np.all(self.grid.contains(p)):
                    raise InvalidArgument("curve samples leave the grid bounding box")
            cleaned.append(polys)
        self.curves = cleaned

    def __len__(self):
        return len(self.curves)

    def lengths(self) -> np.ndarray:
        return np.array([sum(np.abs(np.diff(p)).sum() for p in c) for c in self.curves])

    def subfamily(self, index) -> "CurveFamily":
        return CurveFamily([self.curves[k] for k in index], self.grid, self.kind)

    def mapped(self, f: Callable, grid: Grid) -> "CurveFamily":
        """Push every polyline through ``f`` sample by sample."""
        return CurveFamily([[np.asarray(f(p), dtype=complex) for p in c] for c in self.curves], grid, self.kind)


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise InvalidArgument(f"density must have shape {self.grid.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidArgument("density must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    def energy(self, weights=None) -> float:
        w = 1.0 if weights is None else weights
        return float(np.sum(w * self.values**2) * self.grid.cell_area)


@dataclass
class ModulusResult:
    value: float
    density: DensityField
    kkt_residual: float
    iterations: int
    converged: bool = True
    dual_value: float = float("nan")
    min_line_integral: float = float("nan")
    n_curves: int = 0

    def as_row(self) -> dict:
        return {
            "value": self.value,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": int(self.converged),
            "dual_value": self.dual_value,
            "n_curves": self.n_curves,
        }


def _resample(poly: np.ndarray, h: float, per_cell: float = SAMPLES_PER_CELL):
    """Midpoints and lengths of sub-segments no longer than ``h / per_cell``."""
    seg = np.diff(poly)
    seg_len = np.abs(seg)
    m = np.maximum(1, np.ceil(seg_len * per_cell / h)).astype(np.int64)
    idx = np.repeat(np.arange(len(seg)), m)
    starts = np.cumsum(m) - m
    k = np.arange(idx.size) - starts[idx]
    t = (k + 0.5) / m[idx]
    return poly[idx] + t * seg[idx], seg_len[idx] / m[idx]


def _bilinear_stencil(grid: Grid, pts: np.ndarray):
    fi, fj = grid.fractional_index(pts)
    i0 = np.clip(np.floor(fi).astype(np.int64), 0, grid.nx - 2)
    j0 = np.clip(np.floor(fj).astype(np.int64), 0, grid.ny - 2)
    tx = np.clip(fi - i0, 0.0, 1.0)
    ty = np.clip(fj - j0, 0.0, 1.0)
    ny = grid.ny
    nodes = [i0 * ny + j0, (i0 + 1) * ny + j0, i0 * ny + j0 + 1, (i0 + 1) * ny + j0 + 1]
    weights = [(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty]
    return nodes, weights


def deposition_matrix(family: CurveFamily) -> sp.csr_matrix:
    """Sparse ``(n_curves, n_nodes)`` matrix with ``(L rho)_c = ∫_c rho ds``."""
    grid = family.grid
    rows, cols, vals = [], [], []
    for c, polys in enumerate(family.curves):
        for p in polys:
            pts, w = _resample(p, grid.h)
            nodes, weights = _bilinear_stencil(grid, pts)
            for nd, wt in zip(nodes, weights):
                rows.append(np.full(pts.size, c, dtype=np.int64))
                cols.append(nd)
                vals.append(w * wt)
    L = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(family.curves), grid.nx * grid.ny),
    )
    L.sum_duplicates()
    return L


def line_integral(rho: DensityField, curve) -> float:
    """∫_curve rho ds with rho interpolated bilinearly (same rule the solver enforces)."""
    polys = curve if isinstance(curve, (list, tuple)) else [curve]
    if isinstance(curve, DashedLine):
        polys = curve.polylines()
    total = 0.0
    for p in polys:
        pts, w = _resample(np.asarray(p, dtype=complex), rho.grid.h)
        nodes, weights = _bilinear_stencil(rho.grid, pts)
        flat = rho.values.ravel()
        total += float(sum(np.dot(flat[nd] * wt, w) for nd, wt in zip(nodes, weights)))
    return total


# ---------------------------------------------------------------------------
# The convex program


def discrete_modulus(family: CurveFamily, tol: float = 1e-3, max_iter: int = 20000, weights=None) -> ModulusResult:
    """Discrete modulus by dual ascent (bound-constrained quasi-Newton on the dual).

    ``weights`` (a node array or a real :class:`ComplexField`) turns the energy
    into ``∫ w rho^2``; ``w = 1/K`` gives the right-hand side of the modulus
    inequality for dashed lines. The returned density is rescaled to be exactly
    admissible, so ``value`` is an upper bound on the discrete optimum and
    ``kkt_residual`` is the relative duality gap certifying it.
    """
    if not 0 < tol <= 1e-2:
        raise InvalidArgument(f"tol must lie in (0, 1e-2], got {tol}")
    grid = family.grid
    A = grid.cell_area
    L = deposition_matrix(family)
    if weights is None:
        w = np.ones(grid.nx * grid.ny)
    else:
        w = np.asarray(weights.values if isinstance(weights, ComplexField) else weights, dtype=float).ravel()
        if w.shape != (grid.nx * grid.ny,) or np.any(w[L.indices] <= 0):
            raise InvalidArgument("weights must be positive on every node the curves touch")
    touched = np.unique(L.indices)
    L = L[:, touched].tocsr()
    w = w[touched]
    LT = L.T.tocsr()
    inv_w = 1.0 / w
    nc = L.shape[0]
    if np.any(np.asarray(L.sum(axis=1)).ravel() <= 0):
        raise InvalidArgument("a curve has zero length on the grid")

    def density(lam):
        return (LT @ lam) * inv_w / (2.0 * A)

    def neg_dual(lam):
        rho = density(lam)
        g = lam.sum() - A * np.dot(w * rho, rho)
        return -g, -(1.0 - L @ rho)

    lam = np.ones(nc)
    lam /= np.mean(L @ density(lam))
    iterations = 0
    best = None
    for _ in range(20):
        res = minimize(
            neg_dual, lam, jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * nc,
            options=dict(maxiter=max(1, max_iter - iterations), ftol=1e-16, gtol=1e-14, maxcor=30),
        )
        iterations += int(res.nit)
        lam = res.x
        rho = density(lam)
        li = L @ rho
        scale = li.min()
        if scale <= 0:
            continue
        rho_f = rho / scale
        primal = A * np.dot(w * rho_f, rho_f)
        dual = -float(res.fun)
        gap = (primal - dual) / primal
        best = (primal, dual, gap, rho_f, li.min() / scale)
        if gap <= tol or iterations >= max_iter:
            break
    if best is None:
        raise InvalidArgument("dual ascent produced no admissible density")
    primal, dual, gap, rho_f, _ = best
    full = np.zeros(grid.nx * grid.ny)
    full[touched] = rho_f
    dens = DensityField(grid, full.reshape(grid.shape))
    return ModulusResult(
        value=float(primal), density=dens, kkt_residual=float(max(gap, 0.0)), iterations=iterations,
        converged=bool(gap <= tol), dual_value=float(dual), min_line_integral=float((L @ rho_f).min()),
        n_curves=nc,
    )


# ---------------------------------------------------------------------------
# Family builders


def family_grid(points: np.ndarray, resolution: int, pad_cells: float = 3.0) -> Grid:
    """Square grid enclosing ``points`` with a few cells of padding."""
    pts = np.asarray(points).ravel()
    xmin, xmax = pts.real.min(), pts.real.max()
    ymin, ymax = pts.imag.min(), pts.imag.max()
    side = max(xmax - xmin, ymax - ymin)
    h = side / (resolution - 1 - 2 * pad_cells)
    half = 0.5 * side + pad_cells * h
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    return make_grid((cx - half, cx + half, cy - half, cy + half), resolution)


def radial_segments(z0: complex, r1: float, r2: float, n: int, grid: Grid) -> CurveFamily:
    theta = 2 * math.pi * (np.arange(n) + 0.5) / n
    return CurveFamily([[np.array([z0 + r1 * np.exp(1j * t), z0 + r2 * np.exp(1j * t)])] for t in theta], grid, "paths")


def dashed_line_family(spec: DomainSpec | None, z0: complex, r1: float, r2: float, n: int, grid: Grid,
                       samples_per_cell: float = 2.0) -> CurveFamily:
    """Sigma: the dashed lines D ∩ S(z0, r) for n radii evenly spread in (r1, r2)."""
    radii = r1 + (r2 - r1) * (np.arange(n) + 0.5) / n
    curves = []
    for r in radii:
        m = max(64, int(math.ceil(samples_per_cell * 2 * math.pi * r / grid.h)))
        if spec is None:
            line = DashedLine(complex(z0), float(r), ((0.0, 2 * math.pi),), m)
        else:
            line = circle_trace(spec, z0, r, m)
        if not line.is_empty:
            curves.append(line.polylines())
    return CurveFamily(curves, grid, "dashed-lines")


# ---------------------------------------------------------------------------
# Closed forms


def weighted_min_closed_form(phi, p: float = 2.0, measure=None):
    """Minimum of ∫ phi * alpha^p dmu over alpha >= 0 with ∫ alpha dmu = 1.

    ``phi`` holds positive samples on the atoms of a finite measure space with
    masses ``measure`` (all ones when omitted). Returns ``(value, alpha0)`` with
    value = (∫ phi^(-lam) dmu)^(-1/lam), lam = 1/(p - 1), and the unique
    minimiser alpha0 proportional to phi^(-lam).
    """
    phi = np.asarray(phi, dtype=float)
    m = np.ones_like(phi) if measure is None else np.asarray(measure, dtype=float)
    if not p > 1:
        raise InvalidArgument(f"p must exceed 1, got {p}")
    if np.any(phi <= 0) or not np.all(np.isfinite(phi)):
        raise InvalidArgument("phi must be finite and strictly positive")
    if np.any(m < 0) or not m.sum() > 0:
        raise InvalidArgument("measure must be nonnegative with positive total mass")
    lam = 1.0 / (p - 1.0)
    s = float(np.dot(phi**-lam, m))
    return s ** (-1.0 / lam), phi**-lam / s


@dataclass
class RingBound:
    I: float
    radii: np.ndarray
    widths: np.ndarray
    norms: np.ndarray
    eta0: np.ndarray
    bound: float
    flagged: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _midpoint_radii(r1, r2, n):
    edges = np.linspace(r1, r2, n + 1)
    return 0.5 * (edges[1:] + edges[:-1]), np.diff(edges)


def ring_bound(Q, z0: complex, r1: float, r2: float, n_radii: int = 512, spec: DomainSpec | None = None,
               n_samples: int | None = None) -> RingBound:
    """Extremal radial density for ∫∫ Q eta^2(|z - z0|) over a ring.

    I = ∫ dr / ||Q||_1(z0, r), eta0 = 1 / (I ||Q||_1), and the minimum energy
    over profiles with unit integral is 1/I. Radii where the circle norm
    vanishes contribute +inf to I and are listed in ``flagged``.
    """
    if not 0 < r1 < r2:
        raise InvalidArgument(f"need 0 < r1 < r2, got {r1}, {r2}")
    radii, widths = _midpoint_radii(r1, r2, n_radii)
    norms = np.array([circle_norm(Q, z0, r, spec, n_samples) for r in radii])
    flagged = np.flatnonzero(norms <= 0)
    if flagged.size:
        return RingBound(math.inf, radii, widths, norms, np.zeros_like(radii), 0.0, flagged)
    I = float(np.sum(widths / norms))
    eta0 = 1.0 / (I * norms)
    return RingBound(I, radii, widths, norms, eta0, 1.0 / I, flagged)


def radial_energy(Q, z0: complex, radii, widths, eta, n_theta: int = 1024) -> float:
    """Polar quadrature of ∫∫ Q(z) eta(|z - z0|)^2 dm over the ring of ``radii``."""
    q = evaluator(Q)
    theta = 2 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    total = 0.0
    for r, dr, e in zip(radii, widths, eta):
        vals = q(z0 + r * np.exp(1j * theta))
        total += e * e * np.sum(vals) * (2 * math.pi / n_theta) * r * dr
    return float(total)


def dashed_line_bound(K, z0: complex, eps: float, eps0: float, spec: DomainSpec | None = None,
                      n_radii: int = 512, detail: bool = False):
    """Lower bound ∫_eps^eps0 dr / ||K||_1(z0, r) for the modulus of the image family.

    Norms are taken over the dashed lines D ∩ S(z0, r); radii with an empty or
    zero-norm dashed line contribute +inf.
    """
    if not 0 < eps < eps0:
        raise InvalidArgument(f"need 0 < eps < eps0, got {eps}, {eps0}")
    radii, widths = _midpoint_radii(eps, eps0, n_radii)
    norms = np.array([circle_norm(K, z0, r, spec) for r in radii])
    zero = norms <= 0
    value = math.inf if np.any(zero) else float(np.sum(widths / norms))
    if detail:
        return value, radii, norms, np.flatnonzero(zero)
    return value


def grotzsch_bound(r: float, R: float) -> float:
    """(2/pi) log(R/r): lower bound for sets meeting every circle S(z0, rho), r < rho < R."""
    if not 0 < r < R:
        raise InvalidArgument(f"need 0 < r < R, got {r}, {R}")
    return 2.0 / math.pi * math.log(R / r)


# ---------------------------------------------------------------------------
# Path families joining two continua


def _rasterize(grid: Grid, polylines, inside: np.ndarray) -> np.ndarray:
    """Flat indices of in-domain nodes nearest to densely sampled polylines."""
    out = []
    for p in polylines:
        p = np.asarray(p, dtype=complex)
        if p.size == 1:
            pts = p
        else:
            pts, _ = _resample(p, grid.h, per_cell=4.0)
            pts = np.concatenate([pts, p[[0, -1]]])
        fi, fj = grid.fractional_index(pts)
        i = np.rint(fi).astype(np.int64)
        j = np.rint(fj).astype(np.int64)
        ok = (i >= 0) & (i < grid.nx) & (j >= 0) & (j < grid.ny)
        i, j = i[ok], j[ok]
        keep = inside[i, j]
        out.append(i[keep] * grid.ny + j[keep])
    return np.unique(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)


def _edges_crossing_slits(grid: Grid, a_nodes, b_nodes, slits):
    if not slits:
        return np.zeros(a_nodes.size, dtype=bool)
    z = grid.z.ravel()
    za, zb = z[a_nodes], z[b_nodes]
    bad = np.zeros(a_nodes.size, dtype=bool)
    for s0, s1 in slits:
        lo = min(s0.real, s1.real) - grid.h
        hi = max(s0.real, s1.real) + grid.h
        blo = min(s0.imag, s1.imag) - grid.h
        bhi = max(s0.imag, s1.imag) + grid.h
        cand = np.flatnonzero(
            (np.maximum(za.real, zb.real) >= lo) & (np.minimum(za.real, zb.real) <= hi)
            & (np.maximum(za.imag, zb.imag) >= blo) & (np.minimum(za.imag, zb.imag) <= bhi)
        )
        for k in cand:
            if _segments_cross(za[k], zb[k], s0, s1):
                bad[k] = True
    return bad


@dataclass
class CapacityResult:
    value: float
    potential: np.ndarray
    n_E: int
    n_F: int


def connecting_modulus(E, F, spec: DomainSpec, grid: Grid) -> CapacityResult:
    """M(Delta(E, F; D)) as the condenser capacity of (E, F) relative to D.

    Minimises the five-point Dirichlet energy of u over in-domain nodes with
    u = 0 on E and u = 1 on F; the domain boundary is a free (Neumann)
    boundary and grid edges crossing a slit are removed.
    """
    inside = spec.contains(grid.z)
    e_nodes = _rasterize(grid, E, inside)
    f_nodes = _rasterize(grid, F, inside)
    if e_nodes.size == 0 or f_nodes.size == 0:
        raise InvalidArgument("continuum E or F has no grid node inside the domain")
    if np.intersect1d(e_nodes, f_nodes).size:
        raise InvalidArgument("continua E and F touch on the grid; refine the resolution")
    hx, hy = grid.spacing
    idx = np.arange(grid.nx * grid.ny).reshape(grid.shape)
    ins = inside
    pairs = []
    for a, b, wgt in (
        (idx[:-1, :], idx[1:, :], hy / hx),
        (idx[:, :-1], idx[:, 1:], hx / hy),
    ):
        ok = ins.ravel()[a.ravel()] & ins.ravel()[b.ravel()]
        pairs.append((a.ravel()[ok], b.ravel()[ok], wgt))
    ea = np.concatenate([p[0] for p in pairs])
    eb = np.concatenate([p[1] for p in pairs])
    ew = np.concatenate([np.full(p[0].size, p[2]) for p in pairs])
    cut = _edges_crossing_slits(grid, ea, eb, spec.slits)
    ea, eb, ew = ea[~cut], eb[~cut], ew[~cut]
    n = grid.nx * grid.ny
    W = sp.coo_matrix((ew, (ea, eb)), shape=(n, n))
    W = (W + W.T).tocsr()
    deg = np.asarray(W.sum(axis=1)).ravel()
    Lap = (sp.diags(deg) - W).tocsr()

    fixed = np.zeros(n, dtype=bool)
    fixed[e_nodes] = True
    fixed[f_nodes] = True
    u = np.zeros(n)
    u[f_nodes] = 1.0
    free = np.flatnonzero(ins.ravel() & ~fixed & (deg > 0))
    if free.size:
        A = Lap[free][:, free].tocsc()
        rhs = -(Lap[free][:, f_nodes] @ np.ones(f_nodes.size))
        u[free] = spla.spsolve(A, rhs)
    diff = u[ea] - u[eb]
    energy = float(np.sum(ew * diff * diff))
    return CapacityResult(energy, u.reshape(grid.shape), int(e_nodes.size), int(f_nodes.size))


# ---------------------------------------------------------------------------
# Weak flatness probe


def _boundary_hugging_arcs(spec: DomainSpec, z0: complex, r: float, R: float, offset: float, n: int = 8192):
    """Two continua following the boundary on either side of z0, pushed inward,
    each stretching from distance r to distance R from z0."""
    b = spec.boundary_polyline(n)[:-1]
    k0 = int(np.argmin(np.abs(b - z0)))
    b = np.roll(b, -k0)
    tangent = np.roll(b, -1) - np.roll(b, 1)
    inward = 1j * tangent / np.abs(tangent)
    shifted = b + offset * inward
    dist = np.abs(b - z0)
    half = n // 2
    pieces = []
    for side in (np.arange(1, half), np.arange(n - 1, half, -1)):
        d = dist[side]
        # walk away from z0 until the boundary first leaves B(z0, R)
        stop = np.argmax(d > R) if np.any(d > R) else d.size
        sel = side[:stop]
        sel = sel[(dist[sel] >= r)]
        pieces.append(shifted[sel])
    return pieces


def weak_flatness_probe(spec: DomainSpec, z0: complex, radii: Sequence[float], outer_radius: float,
                        resolution: int = 512, configuration: str = "boundary") -> RadialProfile:
    """Moduli M(Delta(E, F; D)) for test continua meeting S(z0, R) and S(z0, r).

    ``configuration="boundary"`` uses two arcs hugging ∂D on either side of z0.
    ``configuration="slit"`` expects z0 on a slit of ``spec`` and places E and
    F on its two banks. The returned profile is indexed by the inner radius r;
    a weakly flat point shows values growing without bound as r shrinks.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii.size < 2 or radii[0] <= 0 or radii[-1] >= outer_radius:
        raise InvalidArgument("radii must be positive, at least two, and below the outer radius")
    grid = make_grid(spec.bounding_box(), resolution)
    if spec.boundary_distance(np.array([z0]))[0] > grid.h:
        raise InvalidArgument("z0 is not within one grid spacing of the boundary")
    offset = 1.5 * grid.h
    values = []
    for r in radii:
        if configuration == "boundary":
            E, F = _boundary_hugging_arcs(spec, z0, r, outer_radius, offset)
        elif configuration == "slit":
            E, F = _slit_banks(spec, z0, r, outer_radius, offset)
        else:
            raise InvalidArgument(f"unknown probe configuration {configuration!r}")
        values.append(connecting_modulus([E], [F], spec, grid).value)
    return RadialProfile(complex(z0), radii, np.array(values), label=f"weak-flatness:{configuration}")


def _slit_banks(spec: DomainSpec, z0: complex, r: float, R: float, offset: float):
    best = None
    for a, b in spec.slits:
        ab = b - a
        t = ((z0 - a) * np.conj(ab)).real / abs(ab) ** 2
        if -1e-9 <= t <= 1 + 1e-9 and abs(a + t * ab - z0) < 1e-9 * (1 + abs(z0)):
            best = (a, b)
    if best is None:
        raise InvalidArgument("z0 does not lie on a slit of the domain")
    a, b = best
    u = (b - a) / abs(b - a)
    normal = 1j * u
    s = np.linspace(r, R, 256)
    # both banks run from z0 toward the slit end a
    line = z0 - s[:, None] * u
    line = line.ravel()
    return line + offset * normal, line - offset * normal


# ---------------------------------------------------------------------------
# The modulus inequality for dashed lines


@dataclass
class InequalityReport:
    z0: complex
    eps: float
    eps0: float
    image_modulus: float
    weighted_modulus: float
    radial_bound: float
    margin_weighted: float
    margin_radial: float
    clipped: bool
    verdict: str
    n_curves: int
    notes: str = ""

    def as_row(self) -> dict:
        return {
            "z0_re": self.z0.real, "z0_im": self.z0.imag, "eps": self.eps, "eps0": self.eps0,
            "image_modulus": self.image_modulus, "weighted_modulus": self.weighted_modulus,
            "radial_bound": self.radial_bound, "margin_weighted": self.margin_weighted,
            "margin_radial": self.margin_radial, "clipped": int(self.clipped), "verdict": self.verdict,
        }


def _curve_count(f, z0, eps, eps0, h_img, spec):
    probe = np.linspace(eps, eps0, 257)
    worst = 0.0
    for t in np.linspace(0, 2 * math.pi, 64, endpoint=False):
        pts = z0 + probe * np.exp(1j * t)
        if spec is not None:
            pts = pts[spec.contains(pts)]
        if pts.size > 1:
            img = np.asarray(f(pts))
            worst = max(worst, float(np.max(np.abs(np.diff(img)))) * 256 / (eps0 - eps))
    # image spacing between neighbouring curves at most half a cell
    return int(np.clip(math.ceil(2.0 * worst * (eps0 - eps) / h_img), 64, 2000))


def modulus_inequality_check(f, K, z0: complex, eps: float, eps0: float, spec: DomainSpec | None = None,
                             resolution: int = 256, tol: float = 1e-3, slack: float = 0.03) -> InequalityReport:
    """Compare M(f Sigma_eps) with the two dashed-line lower bounds.

    ``f`` is a callable map (or anything :func:`evaluator` accepts, e.g. a
    solution bundle's map field) and ``K`` its dilatation (field or callable).
    The weighted bound is the discrete infimum of ∫ rho^2 / K over densities
    admissible for every dashed line; requiring admissibility for all lines
    rather than almost all can only raise it. Margins are relative:
    (M(f Sigma) - bound) / bound; the verdict allows ``slack`` of grid error.
    """
    fmap = evaluator(f)
    kfun = evaluator(K)
    z0 = complex(z0)
    radial = dashed_line_bound(kfun, z0, eps, eps0, spec)

    # source family and 1/K weighted modulus on a grid around the ring
    src_pts = z0 + eps0 * np.exp(1j * np.linspace(0, 2 * math.pi, 64))
    src_grid = family_grid(np.concatenate([src_pts, [z0]]), resolution)
    n_src = int(np.clip(math.ceil(2.0 * (eps0 - eps) / src_grid.h), 64, 2000))
    sigma = dashed_line_family(spec, z0, eps, eps0, n_src, src_grid)
    with np.errstate(divide="ignore"):
        wts = 1.0 / np.asarray(kfun(src_grid.z), dtype=float)
    wts = np.where(np.isfinite(wts) & (wts > 0), wts, 1.0)
    weighted = discrete_modulus(sigma, tol=tol, weights=wts).value

    # image family on its own grid
    probe_family = dashed_line_family(spec, z0, eps, eps0, 16, src_grid)
    img_pts = np.concatenate([np.asarray(fmap(p)) for c in probe_family.curves for p in c])
    clipped = not np.all(np.isfinite(img_pts))
    if clipped:
        return InequalityReport(z0, eps, eps0, math.nan, weighted, radial, math.nan, math.nan, True,
                                "inconclusive", 0, "image curves left the map's grid")
    img_grid = family_grid(img_pts, resolution)
    n_img = _curve_count(fmap, z0, eps, eps0, img_grid.h, spec)
    sigma_img = dashed_line_family(spec, z0, eps, eps0, n_img, src_grid, samples_per_cell=8.0)
    mapped = []
    for c in sigma_img.curves:
        imgs = [np.asarray(fmap(p), dtype=complex) for p in c]
        if not all(np.all(np.isfinite(q)) for q in imgs):
            clipped = True
            break
        mapped.append(imgs)
    if clipped:
        return InequalityReport(z0, eps, eps0, math.nan, weighted, radial, math.nan, math.nan, True,
                                "inconclusive", 0, "image curves left the map's grid")
    img_grid = family_grid(np.concatenate([q for c in mapped for q in c]), resolution)
    lhs = discrete_modulus(CurveFamily(mapped, img_grid, "dashed-lines"), tol=tol).value
    m_w = (lhs - weighted) / weighted
    m_r = (lhs - radial) / radial
    verdict = "holds" if min(m_w, m_r) >= -slack else "fails"
    return InequalityReport(z0, eps, eps0, lhs, weighted, radial, m_w, m_r, False, verdict, len(mapped),
                            "weighted bound uses admissibility for every line (upward bias)")


# ---------------------------------------------------------------------------
# CSV output


def write_modulus_csv(result: ModulusResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value [dimensionless]", "kkt_residual [relative gap]", "iterations [count]"])
        w.writerow([repr(result.value), repr(result.kkt_residual), result.iterations])


def write_density_csv(density: DensityField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "rho [1/length]"])
        for (i, j) in np.argwhere(density.values > 0):
            w.writerow([int(i), int(j), repr(float(density.values[i, j]))])
