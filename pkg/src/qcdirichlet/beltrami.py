"""Homeomorphic solutions of f_zbar = mu f_z on the plane and residual checks.

The solver iterates omega <- mu (1 + S omega) with the Beurling transform S
applied spectrally on the periodic extension of the grid, then sets
f = z + C omega with C the inverse of d/dzbar. The coefficient must vanish
outside the central half of the box so the periodic images stay apart.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EllipticityViolation, InvalidArgument, NoConvergence, SupportViolation
from .fields import ComplexField
from .geometry import Grid


def wirtinger(f: ComplexField):
    """(f_z, f_zbar) by centered differences, second-order one-sided at the box edge."""
    hx, hy = f.grid.spacing
    v = np.asarray(f.values, dtype=complex)
    fx = np.gradient(v, hx, axis=0, edge_order=2)
    fy = np.gradient(v, hy, axis=1, edge_order=2)
    fz = 0.5 * (fx - 1j * fy)
    fzb = 0.5 * (fx + 1j * fy)
    return f.with_values(fz), f.with_values(fzb)


def jacobian(fz: ComplexField, fzb: ComplexField) -> ComplexField:
    return fz.with_values(np.abs(fz.values) ** 2 - np.abs(fzb.values) ** 2)


def beltrami_residual(f: ComplexField, mu: ComplexField) -> float:
    """L2 norm over the mask of f_zbar - mu f_z, derivatives by finite differences."""
    if f.grid != mu.grid:
        raise InvalidArgument("f and mu must share a grid")
    fz, fzb = wirtinger(f)
    return _residual_norm(fz.values, fzb.values, mu, f.mask & mu.mask)


def _residual_norm(fz, fzb, mu: ComplexField, mask) -> float:
    r = np.where(mask, fzb - mu.values * fz, 0.0)
    return float(math.sqrt(np.sum(np.abs(r) ** 2) * mu.grid.cell_area))


# ---------------------------------------------------------------------------
# Spectral operators


def _wavenumbers(grid: Grid):
    hx, hy = grid.spacing
    kx = 2 * math.pi * np.fft.fftfreq(grid.nx, hx)
    ky = 2 * math.pi * np.fft.fftfreq(grid.ny, hy)
    return kx[:, None] + 1j * ky[None, :]


def _check_support(omega: ComplexField, what: str = "omega"):
    grid = omega.grid
    xmin, xmax, ymin, ymax = grid.bbox
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    qx, qy = 0.25 * (xmax - xmin), 0.25 * (ymax - ymin)
    nz = np.abs(omega.values) > 0
    if not np.any(nz):
        return
    z = grid.z[nz]
    # one grid cell of tolerance for supports whose edge falls on the boundary nodes
    if np.any(np.abs(z.real - cx) > qx + grid.spacing[0]) or np.any(np.abs(z.imag - cy) > qy + grid.spacing[1]):
        raise SupportViolation(f"{what} must vanish outside the central half of the box")


def beurling_transform(omega: ComplexField, check_support: bool = True) -> ComplexField:
    """S omega via the multiplier conj(xi)/xi (0 at xi = 0)."""
    if check_support:
        _check_support(omega)
    xi = _wavenumbers(omega.grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(xi != 0, np.conj(xi) / xi, 0.0)
    out = np.fft.ifft2(m * np.fft.fft2(np.asarray(omega.values, dtype=complex)))
    return omega.with_values(out)


def cauchy_transform(omega: ComplexField, check_support: bool = True) -> ComplexField:
    """Inverse of d/dzbar: spectral on the zero-mean part plus mean(omega) * conj(z - center)."""
    if check_support:
        _check_support(omega)
    grid = omega.grid
    v = np.asarray(omega.values, dtype=complex)
    mean = v.mean()
    xi = _wavenumbers(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(xi != 0, 2.0 / (1j * xi), 0.0)
    out = np.fft.ifft2(m * np.fft.fft2(v - mean))
    xmin, xmax, ymin, ymax = grid.bbox
    c = complex(0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
    out = out + mean * np.conj(grid.z - c)
    return omega.with_values(out)


# ---------------------------------------------------------------------------
# Solution bundles


@dataclass(frozen=True, eq=False)
class SolutionBundle:
    f: ComplexField
    fz: ComplexField
    fzb: ComplexField
    mu: ComplexField
    residual_norm: float
    normalization: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.f.grid

    @property
    def jacobian(self) -> ComplexField:
        return jacobian(self.fz, self.fzb)

    def residual(self) -> float:
        return _residual_norm(self.fz.values, self.fzb.values, self.mu, self.f.mask & self.mu.mask)

    def __call__(self, z):
        return self.f.interpolate(z)


def bundle_from_map(grid: Grid, fn, mu: ComplexField | None = None, mask=None) -> SolutionBundle:
    """Wrap an explicit map sampled on ``grid``; derivatives by finite differences."""
    f = ComplexField.from_function(grid, lambda z: np.asarray(fn(z), dtype=complex))
    if mask is not None:
        f = f.with_values(f.values, mask)
    fz, fzb = wirtinger(f)
    if mu is None:
        mu = ComplexField(grid, np.zeros(grid.shape, dtype=complex), np.ones(grid.shape, dtype=bool))
    res = _residual_norm(fz.values, fzb.values, mu, f.mask & mu.mask)
    return SolutionBundle(f, fz, fzb, mu, res, {"kind": "explicit"}, {"source": "explicit map"})


def mrm_solve(mu: ComplexField, tol: float = 1e-10, max_iter: int = 500) -> SolutionBundle:
    """Normalized homeomorphic solution f = z + C omega of the Beltrami equation.

    Iterates omega <- mu + mu S omega from omega = 0 until the L2 update drops
    below ``tol``; then f - z is shifted so its average over the four box
    corners is zero.
    """
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    a = np.abs(mu.values)
    kmax = float(a.max()) if a.size else 0.0
    if kmax >= 1.0:
        node = tuple(int(k) for k in np.unravel_index(np.argmax(a), a.shape))
        raise EllipticityViolation(f"|mu| reaches {kmax:.6g} >= 1", node=node)
    _check_support(mu, "mu")
    grid = mu.grid
    m = np.asarray(mu.values, dtype=complex)
    xi = _wavenumbers(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        beurling = np.where(xi != 0, np.conj(xi) / xi, 0.0)
    dA = grid.cell_area

    omega = np.zeros(grid.shape, dtype=complex)
    history = []
    it = 0
    converged = kmax == 0.0
    if converged:
        history.append(0.0)
    while not converged and it < max_iter:
        s = np.fft.ifft2(beurling * np.fft.fft2(omega))
        new = m * (1.0 + s)
        upd = math.sqrt(np.sum(np.abs(new - omega) ** 2) * dA)
        omega = new
        it += 1
        history.append(upd)
        converged = upd < tol
    s_omega = np.fft.ifft2(beurling * np.fft.fft2(omega))
    cw = cauchy_transform(ComplexField(grid, omega, np.ones(grid.shape, dtype=bool)), check_support=False).values
    corners = np.array([cw[0, 0], cw[-1, 0], cw[0, -1], cw[-1, -1]])
    shift = corners.mean()
    full = np.ones(grid.shape, dtype=bool)
    f = ComplexField(grid, grid.z + cw - shift, full)
    fz = ComplexField(grid, 1.0 + s_omega, full)
    fzb = ComplexField(grid, omega, full)
    res = _residual_norm(fz.values, fzb.values, mu, mu.mask)
    prov = {
        "solver": "beurling-neumann",
        "tol": tol,
        "iterations": it,
        "k_max": kmax,
        "updates": history,
        "iteration_bound": iteration_bound(kmax, tol),
    }
    bundle = SolutionBundle(f, fz, fzb, mu, res, {"kind": "corners", "shift": complex(shift)}, prov)
    if not converged:
        raise NoConvergence(f"no convergence after {it} iterations (last update {history[-1]:.3g})", result=bundle,
                            stage="beltrami")
    return bundle


def iteration_bound(kmax: float, tol: float, margin: int = 5) -> int:
    """Iterations guaranteed by geometric contraction at rate ``kmax`` (plus a margin)."""
    if kmax <= 0:
        return margin
    return int(math.ceil(math.log(tol) / math.log(kmax))) + margin


# ---------------------------------------------------------------------------
# Homeomorphism proxies


def _cell_corner_values(values):
    return values[:-1, :-1], values[1:, :-1], values[1:, 1:], values[:-1, 1:]


def _in_quads(p, q0, q1, q2, q3):
    """Whether points p lie inside the (possibly nonconvex) quadrilaterals q0..q3."""
    inside = np.zeros(p.shape, dtype=bool)
    quad = (q0, q1, q2, q3)
    for k in range(4):
        a, b = quad[k], quad[(k + 1) % 4]
        cond = (a.imag > p.imag) != (b.imag > p.imag)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a.real + (p.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
        inside ^= cond & (p.real < xc)
    return inside


def homeo_check(f, mask=None, n_samples: int = 100_000, seed: int = 0) -> dict:
    """Jacobian positivity and a sampled cell-overlap test on the masked grid.

    ``f`` is a SolutionBundle or a ComplexField. The overlap test maps every
    grid cell by its corner values, samples up to ``n_samples`` cells and
    looks for a non-adjacent cell whose image centroid falls inside a sampled
    cell image.
    """
    if isinstance(f, SolutionBundle):
        field_, J = f.f, f.jacobian.values
    else:
        field_ = f
        fz, fzb = wirtinger(f)
        J = jacobian(fz, fzb).values
    m = field_.mask if mask is None else np.asarray(mask, dtype=bool) & field_.mask
    Jm = np.real(J[m])
    frac = float(np.mean(Jm > 0)) if Jm.size else 0.0
    v = np.asarray(field_.values, dtype=complex)
    c0, c1, c2, c3 = _cell_corner_values(v)
    cm = m[:-1, :-1] & m[1:, :-1] & m[1:, 1:] & m[:-1, 1:]
    ci, cj = np.nonzero(cm)
    overlaps = 0
    sampled = 0
    if ci.size:
        cent = 0.25 * (c0 + c1 + c2 + c3)[ci, cj]
        diam = np.maximum(np.abs(c2 - c0), np.abs(c3 - c1))[ci, cj]
        rng = np.random.default_rng(seed)
        pick = rng.choice(ci.size, size=min(n_samples, ci.size), replace=False)
        pick.sort()
        sampled = pick.size
        tree = cKDTree(np.column_stack([cent.real, cent.imag]))
        radius = float(np.max(diam[pick]))
        pairs = tree.query_ball_point(np.column_stack([cent[pick].real, cent[pick].imag]), r=radius)
        src = np.repeat(pick, [len(p) for p in pairs])
        dst = np.fromiter((d for p in pairs for d in p), dtype=np.int64, count=src.size)
        far = (np.abs(ci[src] - ci[dst]) > 1) | (np.abs(cj[src] - cj[dst]) > 1)
        src, dst = src[far], dst[far]
        if src.size:
            qi, qj = ci[src], cj[src]
            hit = _in_quads(cent[dst], c0[qi, qj], c1[qi, qj], c2[qi, qj], c3[qi, qj])
            overlaps = int(np.count_nonzero(hit))
    flag = bool(Jm.size and frac == 1.0 and overlaps == 0)
    return {
        "positive_fraction": frac,
        "min_jacobian": float(Jm.min()) if Jm.size else math.nan,
        "sampled_cells": int(sampled),
        "overlaps": overlaps,
        "homeomorphic": flag,
    }


def write_bundle_csv(bundle: SolutionBundle, path, mask=None) -> None:
    m = bundle.f.mask if mask is None else mask
    J = bundle.jacobian.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "re_f [length]", "im_f [length]", "jacobian [dimensionless]"])
        for i, j in np.argwhere(m):
            v = bundle.f.values[i, j]
            w.writerow([int(i), int(j), repr(float(v.real)), repr(float(v.imag)), repr(float(np.real(J[i, j])))])
