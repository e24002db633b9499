"""Coefficient fields, dilatation fields and their norms over circles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import EllipticityViolation, InvalidArgument
from .geometry import DashedLine, DomainSpec, Grid, circle_trace, domain_mask


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Samples on the nodes of a grid plus a boolean mask of meaningful nodes.

    Real-valued fields (dilatations, densities, majorants) use the same class
    with a real dtype.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        mask = np.array(self.mask, dtype=bool, copy=True)
        if values.shape != self.grid.shape or mask.shape != self.grid.shape:
            raise InvalidArgument(f"field arrays must have shape {self.grid.shape}, got {values.shape}/{mask.shape}")
        if not np.all(np.isfinite(values[mask])):
            raise InvalidArgument("field samples must be finite at masked nodes")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable, mask=None, fill=0.0):
        z = grid.z
        if mask is None:
            mask = np.ones(grid.shape, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(fn(z))
        vals = np.where(mask, vals, fill)
        return cls(grid, vals, mask)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def with_values(self, values, mask=None) -> "ComplexField":
        return ComplexField(self.grid, values, self.mask if mask is None else mask)

    def integral(self) -> float | complex:
        """Node-sum quadrature over the mask."""
        return np.sum(np.where(self.mask, self.values, 0)) * self.grid.cell_area

    def interpolate(self, z, fill=np.nan):
        """Bilinear interpolation at arbitrary points; ``fill`` outside the bbox.

        Unmasked corners are left out and the remaining weights renormalized,
        so values outside the mask never leak across a domain boundary.
        Cells with no masked corner fall back to plain bilinear weights.
        """
        if self.mask.all():
            return bilinear(self.grid, self.values, z, fill)
        m = self.mask.astype(float)
        num = bilinear(self.grid, np.where(self.mask, self.values, 0), z, fill)
        den = bilinear(self.grid, m, z, 0.0)
        plain = bilinear(self.grid, self.values, z, fill)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 1e-12, num / np.where(den > 1e-12, den, 1.0), plain)

    def __call__(self, z):
        return self.interpolate(z)


def bilinear(grid: Grid, values: np.ndarray, z, fill=np.nan):
    z = np.asarray(z, dtype=complex)
    fi, fj = grid.fractional_index(z)
    outside = ~((fi >= 0) & (fi <= grid.nx - 1) & (fj >= 0) & (fj <= grid.ny - 1))
    i0 = np.clip(np.floor(fi).astype(np.int64), 0, grid.nx - 2)
    j0 = np.clip(np.floor(fj).astype(np.int64), 0, grid.ny - 2)
    tx = np.clip(fi - i0, 0.0, 1.0)
    ty = np.clip(fj - j0, 0.0, 1.0)
    v = values
    out = (
        v[i0, j0] * (1 - tx) * (1 - ty)
        + v[i0 + 1, j0] * tx * (1 - ty)
        + v[i0, j0 + 1] * (1 - tx) * ty
        + v[i0 + 1, j0 + 1] * tx * ty
    )
    if np.any(outside):
        out = np.where(outside, fill, out)
    return out


def evaluator(q) -> Callable:
    """Turn a field or a plain callable into a function of complex points."""
    if isinstance(q, ComplexField):
        return lambda z: q.interpolate(z, fill=0.0)
    if callable(q):
        return q
    if np.isscalar(q):
        c = q
        return lambda z: np.full(np.shape(z), c, dtype=float)
    raise InvalidArgument(f"cannot evaluate object of type {type(q).__name__}")


@dataclass(frozen=True)
class RadialProfile:
    """Values of a quantity at increasing radii around a center."""

    center: complex
    radii: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if radii.shape != values.shape:
            raise InvalidArgument("radii and values must have equal length")
        if np.any(np.diff(radii) <= 0) or np.any(radii <= 0):
            raise InvalidArgument("radii must be positive and strictly increasing")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)


# ---------------------------------------------------------------------------
# Dilatation and truncation


def dilatation(mu: ComplexField) -> ComplexField:
    """K = (1 + |mu|) / (1 - |mu|) at every node; unmasked nodes count as mu = 0."""
    a = np.abs(mu.values)
    bad = mu.mask & ~(a < 1.0)
    if np.any(bad):
        node = tuple(int(k) for k in np.argwhere(bad)[0])
        raise EllipticityViolation(f"|mu| >= 1 at masked node {node} (|mu| = {a[node]:.6g})", node=node)
    a = np.where(mu.mask, a, 0.0)
    return ComplexField(mu.grid, (1.0 + a) / (1.0 - a), mu.mask)


def truncate_mu(mu: ComplexField, n: float) -> ComplexField:
    """Cap the dilatation at ``n`` while keeping arg(mu)."""
    if not n >= 1:
        raise InvalidArgument(f"truncation level must be >= 1, got {n}")
    k = (n - 1.0) / (n + 1.0)
    a = np.abs(mu.values)
    over = a > k
    with np.errstate(divide="ignore", invalid="ignore"):
        capped = np.where(over, mu.values * (k / np.where(over, a, 1.0)), mu.values)
    return mu.with_values(capped)


def mu_from_dilatation(K, direction=1.0):
    """Beltrami coefficient of modulus (K - 1)/(K + 1) pointing along ``direction``."""
    K = np.asarray(K, dtype=float)
    d = np.asarray(direction, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    return (K - 1.0) / (K + 1.0) * unit


def extend_by_zero(q: ComplexField, spec: DomainSpec) -> ComplexField:
    inside = domain_mask(spec, q.grid)
    return ComplexField(q.grid, np.where(inside, q.values, 0), np.ones(q.grid.shape, dtype=bool))


# ---------------------------------------------------------------------------
# Circle norms


class CircleIntegral(NamedTuple):
    value: float
    length: float
    n_arcs: int
    empty: bool


def circle_samples(r: float, spacing: float | None) -> int:
    """Quadrature node count for a full circle: eight nodes per grid cell crossed."""
    if spacing is None or spacing <= 0:
        return 8 * 128
    return 8 * max(16, int(math.ceil(2 * math.pi * r / spacing)))


def _dashed(spec, z0, r, n):
    if spec is None:
        return DashedLine(complex(z0), float(r), ((0.0, 2 * math.pi),), n)
    return circle_trace(spec, z0, r, n)


def circle_norm(q, z0: complex, r: float, spec: DomainSpec | None = None, n_samples: int | None = None,
                detail: bool = False):
    """Integral of ``q`` over the dashed line ``D ∩ S(z0, r)`` against arc length.

    ``spec=None`` integrates over the whole circle. An empty intersection
    gives 0 (``detail=True`` returns a :class:`CircleIntegral` carrying the
    empty flag and the arc count).
    """
    if not r > 0:
        raise InvalidArgument(f"radius must be positive, got {r}")
    spacing = q.grid.h if isinstance(q, ComplexField) else None
    n = n_samples or circle_samples(r, spacing)
    line = _dashed(spec, z0, r, n)
    pts, wts = line.quadrature()
    if len(pts) == 0:
        out = CircleIntegral(0.0, 0.0, 0, True)
    else:
        vals = np.asarray(evaluator(q)(pts), dtype=float)
        out = CircleIntegral(float(np.dot(vals, wts)), float(wts.sum()), line.n_arcs, False)
    return out if detail else out.value


def circle_average(q, z0: complex, r: float, spec: DomainSpec | None = None, n_samples: int | None = None,
                   detail: bool = False):
    res = circle_norm(q, z0, r, spec, n_samples, detail=True)
    avg = res.value / res.length if res.length > 0 else 0.0
    if detail:
        return CircleIntegral(avg, res.length, res.n_arcs, res.empty)
    return avg


def radial_profile(q, z0, radii, spec=None, kind="norm", n_samples=None) -> RadialProfile:
    fn = circle_norm if kind == "norm" else circle_average
    vals = [fn(q, z0, r, spec, n_samples) for r in radii]
    return RadialProfile(complex(z0), np.asarray(radii, float), np.asarray(vals), label=f"circle-{kind}")


# ---------------------------------------------------------------------------
# Generators and CSV I/O


def constant_mu(grid: Grid, spec: DomainSpec, value: complex) -> ComplexField:
    inside = domain_mask(spec, grid)
    return ComplexField(grid, np.where(inside, complex(value), 0j), np.ones(grid.shape, dtype=bool))


def radial_stretch_mu(grid: Grid, spec: DomainSpec | None, k: float, center: complex = 0j) -> ComplexField:
    """Coefficient of ``z |z|^(k-1)`` about ``center``: ((k-1)/(k+1)) * z / conj(z)."""
    w = grid.z - center
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = np.where(np.abs(w) > 0, w / np.conj(w), 0.0)
    vals = (k - 1.0) / (k + 1.0) * direction
    inside = np.ones(grid.shape, dtype=bool) if spec is None else domain_mask(spec, grid)
    return ComplexField(grid, np.where(inside, vals, 0j), np.ones(grid.shape, dtype=bool))


def log_blowup_dilatation(z, center: complex = 0j, floor: float = 1e-12):
    """K(z) = 1 + log+(1/|z - center|): unbounded but exponentially integrable."""
    r = np.maximum(np.abs(np.asarray(z) - center), floor)
    return 1.0 + np.maximum(0.0, np.log(1.0 / r))


def log_blowup_mu(grid: Grid, spec: DomainSpec | None, center: complex = 0j) -> ComplexField:
    w = grid.z - center
    K = log_blowup_dilatation(grid.z, center, floor=0.5 * grid.h)
    with np.errstate(divide="ignore", invalid="ignore"):
        direction = np.where(np.abs(w) > 0, w / np.conj(w), 1.0)
    vals = mu_from_dilatation(K, direction)
    inside = np.ones(grid.shape, dtype=bool) if spec is None else domain_mask(spec, grid)
    return ComplexField(grid, np.where(inside, vals, 0j), np.ones(grid.shape, dtype=bool))


MU_GENERATORS = {
    "constant": lambda grid, spec, value=0.0, **_: constant_mu(grid, spec, value),
    "radial-stretch": lambda grid, spec, k=2.0, center=0j, **_: radial_stretch_mu(grid, spec, k, center),
    "logarithmic-blowup": lambda grid, spec, center=0j, **_: log_blowup_mu(grid, spec, center),
}


def generate_mu(name: str, grid: Grid, spec: DomainSpec, **params) -> ComplexField:
    try:
        gen = MU_GENERATORS[name]
    except KeyError:
        raise InvalidArgument(f"unknown mu generator {name!r}; choose from {sorted(MU_GENERATORS)}") from None
    return gen(grid, spec, **params)


def load_mu_csv(path, grid: Grid) -> ComplexField:
    """Read ``i, j, re_mu, im_mu`` rows; nodes not listed get mu = 0 and stay masked."""
    vals = np.zeros(grid.shape, dtype=complex)
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = {"i", "j", "re_mu", "im_mu"} - set(reader.fieldnames or [])
        if missing:
            raise InvalidArgument(f"mu CSV is missing columns {sorted(missing)}")
        for row in reader:
            i, j = int(row["i"]), int(row["j"])
            if not (0 <= i < grid.nx and 0 <= j < grid.ny):
                raise InvalidArgument(f"node ({i}, {j}) outside a {grid.shape} grid")
            vals[i, j] = complex(float(row["re_mu"]), float(row["im_mu"]))
    return ComplexField(grid, vals, np.ones(grid.shape, dtype=bool))


def save_mu_csv(mu: ComplexField, path, only_nonzero: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "re_mu", "im_mu"])
        for i, j in np.argwhere(mu.mask):
            v = mu.values[i, j]
            if only_nonzero and v == 0:
                continue
            w.writerow([int(i), int(j), repr(float(np.real(v))), repr(float(np.imag(v)))])
