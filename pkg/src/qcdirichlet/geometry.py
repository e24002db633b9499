"""Grids, domains and dashed lines (arcs of circles lying inside a domain)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvalidDomain

TWO_PI = 2.0 * math.pi
MIN_RESOLUTION = 2
MAX_RESOLUTION = 4096


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian grid; node ``(i, j)`` sits at ``x[i] + 1j * y[j]``.

    Arrays living on a grid have shape ``(nx, ny)`` (``indexing="ij"``).
    """

    bbox: tuple  # (xmin, xmax, ymin, ymax)
    resolution: tuple  # (nx, ny)

    @property
    def nx(self) -> int:
        return self.resolution[0]

    @property
    def ny(self) -> int:
        return self.resolution[1]

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny)

    @property
    def spacing(self) -> tuple:
        xmin, xmax, ymin, ymax = self.bbox
        return ((xmax - xmin) / (self.nx - 1), (ymax - ymin) / (self.ny - 1))

    @property
    def h(self) -> float:
        """Largest of the two spacings."""
        return max(self.spacing)

    @property
    def cell_area(self) -> float:
        hx, hy = self.spacing
        return hx * hy

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.bbox[0], self.bbox[1], self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.bbox[2], self.bbox[3], self.ny)

    @property
    def z(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return X + 1j * Y

    def node(self, i, j):
        hx, hy = self.spacing
        return (self.bbox[0] + i * hx) + 1j * (self.bbox[2] + j * hy)

    def fractional_index(self, z):
        """Continuous index coordinates of complex points (inverse of :meth:`node`)."""
        z = np.asarray(z)
        hx, hy = self.spacing
        return (z.real - self.bbox[0]) / hx, (z.imag - self.bbox[2]) / hy

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        xmin, xmax, ymin, ymax = self.bbox
        return (z.real >= xmin) & (z.real <= xmax) & (z.imag >= ymin) & (z.imag <= ymax)


def make_grid(bbox: Sequence[float], resolution) -> Grid:
    """Build a uniform grid over ``bbox = (xmin, xmax, ymin, ymax)``.

    ``resolution`` is an int (same count on both axes) or a pair ``(nx, ny)``.
    Node counts include both ends of each interval, so the spacing on an axis
    is ``extent / (n - 1)``.
    """
    bbox = tuple(float(b) for b in bbox)
    if len(bbox) != 4 or not all(math.isfinite(b) for b in bbox):
        raise InvalidArgument(f"bbox must hold four finite numbers, got {bbox!r}")
    if not (bbox[1] > bbox[0] and bbox[3] > bbox[2]):
        raise InvalidArgument(f"bbox has zero or negative extent: {bbox!r}")
    if np.isscalar(resolution):
        resolution = (resolution, resolution)
    resolution = tuple(int(n) for n in resolution)
    if len(resolution) != 2 or any(not MIN_RESOLUTION <= n <= MAX_RESOLUTION for n in resolution):
        raise InvalidArgument(
            f"resolution must lie in [{MIN_RESOLUTION}, {MAX_RESOLUTION}] per axis, got {resolution!r}"
        )
    return Grid(bbox, resolution)


def square_grid(half_width: float, n: int, center: complex = 0j) -> Grid:
    c = complex(center)
    return make_grid((c.real - half_width, c.real + half_width, c.imag - half_width, c.imag + half_width), n)


# ---------------------------------------------------------------------------
# Domains


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of two closed segments."""

    def orient(a, b, c):
        return (b - a).real * (c - a).imag - (b - a).imag * (c - a).real

    def on_seg(a, b, c):
        return min(a.real, b.real) - 1e-15 <= c.real <= max(a.real, b.real) + 1e-15 and min(
            a.imag, b.imag
        ) - 1e-15 <= c.imag <= max(a.imag, b.imag) + 1e-15

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d1 == 0 and on_seg(q1, q2, p1):
        return True
    if d2 == 0 and on_seg(q1, q2, p2):
        return True
    if d3 == 0 and on_seg(p1, p2, q1):
        return True
    if d4 == 0 and on_seg(p1, p2, q2):
        return True
    return False


def _point_segment_distance(z, a, b):
    z = np.asarray(z, dtype=complex)
    ab = b - a
    t = np.clip(((z - a) * np.conj(ab)).real / (abs(ab) ** 2), 0.0, 1.0)
    return np.abs(z - (a + t * ab))


@dataclass(frozen=True)
class DomainSpec:
    """A bounded Jordan domain (unit disk or simple polygon) or an annulus.

    ``slits`` is an optional tuple of segments ``(a, b)`` removed from the
    domain; a slit has no area but blocks curves and cuts dashed lines.
    """

    kind: str
    vertices: tuple = ()
    center: complex = 0j
    r1: float = 0.0
    r2: float = 1.0
    positive_orientation: bool = True
    slits: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "unit-disk":
            pass
        elif self.kind == "annulus":
            if not (0.0 < self.r1 < self.r2):
                raise InvalidDomain(f"annulus needs 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")
        elif self.kind == "polygon":
            verts = tuple(complex(v) for v in self.vertices)
            if len(verts) >= 2 and verts[0] == verts[-1]:
                verts = verts[:-1]
            if len(verts) < 3:
                raise InvalidDomain("polygon needs at least three vertices")
            object.__setattr__(self, "vertices", verts)
            self._check_simple(verts)
            area = 0.5 * sum(
                (verts[k].real * verts[(k + 1) % len(verts)].imag - verts[(k + 1) % len(verts)].real * verts[k].imag)
                for k in range(len(verts))
            )
            if area == 0:
                raise InvalidDomain("polygon has zero area")
            object.__setattr__(self, "positive_orientation", area > 0)
        else:
            raise InvalidDomain(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "slits", tuple((complex(a), complex(b)) for a, b in self.slits))

    @staticmethod
    def _check_simple(verts):
        n = len(verts)
        edges = [(verts[k], verts[(k + 1) % n]) for k in range(n)]
        for a in range(n):
            for b in range(a + 1, n):
                if b == a + 1 or (a == 0 and b == n - 1):
                    continue
                if _segments_cross(*edges[a], *edges[b]):
                    raise InvalidDomain(f"polygon edges {a} and {b} intersect")
        for k in range(n):
            if verts[k] == verts[(k + 1) % n]:
                raise InvalidDomain(f"polygon has a repeated vertex at index {k}")

    # -- queries -----------------------------------------------------------

    @property
    def edges(self):
        if self.kind != "polygon":
            return []
        n = len(self.vertices)
        return [(self.vertices[k], self.vertices[(k + 1) % n]) for k in range(n)]

    def contains(self, z) -> np.ndarray:
        """Strict interior test, vectorised over ``z``."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "unit-disk":
            inside = np.abs(z) < 1.0
        elif self.kind == "annulus":
            r = np.abs(z - self.center)
            inside = (r > self.r1) & (r < self.r2)
        else:
            inside = self._polygon_contains(z)
        for a, b in self.slits:
            inside &= _point_segment_distance(z, a, b) > 1e-13
        return inside

    def _polygon_contains(self, z):
        x, y = z.real, z.imag
        inside = np.zeros(z.shape, dtype=bool)
        on_edge = np.zeros(z.shape, dtype=bool)
        scale = max(abs(v) for v in self.vertices) + 1.0
        for a, b in self.edges:
            crosses = (a.imag > y) != (b.imag > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xc = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            inside ^= crosses & (x < xc)
            on_edge |= _point_segment_distance(z, a, b) <= 1e-12 * scale
        return inside & ~on_edge

    def boundary_distance(self, z) -> np.ndarray:
        """Distance from points to the boundary (slits included)."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "unit-disk":
            d = np.abs(1.0 - np.abs(z))
        elif self.kind == "annulus":
            r = np.abs(z - self.center)
            d = np.minimum(np.abs(r - self.r1), np.abs(self.r2 - r))
        else:
            d = np.full(z.shape, np.inf)
            for a, b in self.edges:
                d = np.minimum(d, _point_segment_distance(z, a, b))
        for a, b in self.slits:
            d = np.minimum(d, _point_segment_distance(z, a, b))
        return d

    def bounding_box(self) -> tuple:
        if self.kind == "unit-disk":
            return (-1.0, 1.0, -1.0, 1.0)
        if self.kind == "annulus":
            c = self.center
            return (c.real - self.r2, c.real + self.r2, c.imag - self.r2, c.imag + self.r2)
        xs = [v.real for v in self.vertices]
        ys = [v.imag for v in self.vertices]
        return (min(xs), max(xs), min(ys), max(ys))

    def inradius(self, n_probe: int = 129) -> float:
        """Radius of the largest disc inside the domain (probed on a lattice)."""
        if self.kind == "unit-disk":
            return 1.0
        if self.kind == "annulus":
            return 0.5 * (self.r2 - self.r1)
        xmin, xmax, ymin, ymax = self.bounding_box()
        X, Y = np.meshgrid(np.linspace(xmin, xmax, n_probe), np.linspace(ymin, ymax, n_probe), indexing="ij")
        Z = X + 1j * Y
        inside = self.contains(Z)
        return float(np.max(np.where(inside, self.boundary_distance(Z), 0.0)))

    def boundary_curves(self):
        """Boundary pieces as ('circle', c, R) or ('segment', a, b) tuples."""
        if self.kind == "unit-disk":
            pieces = [("circle", 0j, 1.0)]
        elif self.kind == "annulus":
            pieces = [("circle", self.center, self.r1), ("circle", self.center, self.r2)]
        else:
            pieces = [("segment", a, b) for a, b in self.edges]
        pieces += [("segment", a, b) for a, b in self.slits]
        return pieces

    def boundary_polyline(self, n: int = 2048) -> np.ndarray:
        """Closed, positively oriented sampling of the outer boundary (first point repeated)."""
        if self.kind == "unit-disk":
            t = np.linspace(0.0, TWO_PI, n + 1)
            return np.exp(1j * t)
        if self.kind == "annulus":
            t = np.linspace(0.0, TWO_PI, n + 1)
            return self.center + self.r2 * np.exp(1j * t)
        verts = list(self.vertices)
        if not self.positive_orientation:
            verts = verts[::-1]
        verts.append(verts[0])
        verts = np.array(verts)
        seg = np.abs(np.diff(verts))
        s = np.concatenate([[0.0], np.cumsum(seg)])
        t = np.linspace(0.0, s[-1], n + 1)
        return np.interp(t, s, verts.real) + 1j * np.interp(t, s, verts.imag)


def unit_disk() -> DomainSpec:
    return DomainSpec("unit-disk")


def annulus(r1: float, r2: float, center: complex = 0j) -> DomainSpec:
    return DomainSpec("annulus", center=complex(center), r1=r1, r2=r2)


def polygon(vertices, slits=()) -> DomainSpec:
    return DomainSpec("polygon", vertices=tuple(vertices), slits=tuple(slits))


def square(half_width: float = 1.0, center: complex = 0j, slits=()) -> DomainSpec:
    c = complex(center)
    a = half_width
    return polygon([c + complex(-a, -a), c + complex(a, -a), c + complex(a, a), c + complex(-a, a)], slits=slits)


def domain_mask(spec: DomainSpec, grid: Grid) -> np.ndarray:
    """Boolean field, true exactly at nodes strictly inside the domain."""
    return spec.contains(grid.z)


# ---------------------------------------------------------------------------
# Dashed lines


@dataclass(frozen=True)
class DashedLine:
    """The arcs of the circle ``S(center, radius)`` lying in a domain.

    ``arcs`` holds ``(start, end)`` angle pairs with ``start < end``; a full
    circle is the single arc ``(0, 2*pi)``. ``samples`` is the number of
    quadrature nodes a full circle would get; arcs get a proportional share.
    """

    center: complex
    radius: float
    arcs: tuple
    samples: int

    @property
    def is_empty(self) -> bool:
        return len(self.arcs) == 0

    @property
    def is_full_circle(self) -> bool:
        return len(self.arcs) == 1 and math.isclose(self.arcs[0][1] - self.arcs[0][0], TWO_PI, abs_tol=1e-14)

    @property
    def angular_measure(self) -> float:
        return float(sum(b - a for a, b in self.arcs))

    @property
    def length(self) -> float:
        return self.radius * self.angular_measure

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def arc_samples(self, a: float, b: float):
        """Midpoint-rule angles and length weights for one arc.

        For the full circle this is the periodic trapezoid rule. Midpoints keep
        every node strictly inside the domain.
        """
        m = max(2, int(math.ceil(self.samples * (b - a) / TWO_PI)))
        dt = (b - a) / m
        theta = a + dt * (np.arange(m) + 0.5)
        return theta, np.full(m, self.radius * dt)

    def quadrature(self, samples: int | None = None):
        """Concatenated nodes and weights over all arcs."""
        line = self if samples is None else DashedLine(self.center, self.radius, self.arcs, samples)
        pts, wts = [], []
        for a, b in line.arcs:
            theta, w = line.arc_samples(a, b)
            pts.append(self.center + self.radius * np.exp(1j * theta))
            wts.append(w)
        if not pts:
            return np.zeros(0, dtype=complex), np.zeros(0)
        return np.concatenate(pts), np.concatenate(wts)

    def polylines(self, samples: int | None = None):
        """One open polyline per arc (closed for a full circle), ends included."""
        n = self.samples if samples is None else samples
        out = []
        for a, b in self.arcs:
            m = max(2, int(math.ceil(n * (b - a) / TWO_PI)))
            theta = np.linspace(a, b, m + 1)
            out.append(self.center + self.radius * np.exp(1j * theta))
        return out


def _circle_circle_angles(z0, r, c, R):
    d = z0 - c
    ad = abs(d)
    if ad == 0.0:
        return []
    cosv = (R * R - ad * ad - r * r) / (2.0 * r * ad)
    if not -1.0 < cosv < 1.0:
        return []
    base = math.atan2(d.imag, d.real)
    # S(z0, r) meets S(c, R) where cos(theta - arg(d)) equals cosv
    acos = math.acos(cosv)
    return [base + acos, base - acos]


def _circle_segment_angles(z0, r, a, b):
    ab = b - a
    w = a - z0
    A = abs(ab) ** 2
    B = 2.0 * (w * np.conj(ab)).real
    C = abs(w) ** 2 - r * r
    disc = B * B - 4 * A * C
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    out = []
    for t in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
        if -1e-14 <= t <= 1 + 1e-14:
            p = a + t * ab - z0
            out.append(math.atan2(p.imag, p.real))
    return out


def circle_trace(spec: DomainSpec, z0: complex, r: float, n_samples: int = 256) -> DashedLine:
    """Arcs of ``S(z0, r)`` inside the domain, located analytically.

    Crossing angles with every boundary piece are computed in closed form;
    each gap between consecutive crossings is classified by its midpoint.
    """
    if not r > 0:
        raise InvalidArgument(f"radius must be positive, got {r}")
    if n_samples < 16:
        raise InvalidArgument(f"n_samples must be at least 16, got {n_samples}")
    z0 = complex(z0)
    angles = []
    for piece in spec.boundary_curves():
        if piece[0] == "circle":
            angles += _circle_circle_angles(z0, r, piece[1], piece[2])
        else:
            angles += _circle_segment_angles(z0, r, piece[1], piece[2])
    # slit crossings cut the circle even though both sides lie in D
    cuts = np.mod(np.array([t for a, b in spec.slits for t in _circle_segment_angles(z0, r, a, b)]), TWO_PI)

    def is_cut(t):
        return cuts.size > 0 and bool(np.min(np.abs(np.angle(np.exp(1j * (cuts - t))))) < 1e-12)
    if not angles:
        inside = bool(spec.contains(np.array([z0 + r]))[0])
        arcs = ((0.0, TWO_PI),) if inside else ()
        return DashedLine(z0, float(r), arcs, int(n_samples))

    ang = np.unique(np.mod(np.array(angles), TWO_PI))
    # merge numerically coincident crossings (corners, tangencies)
    keep = np.concatenate([[True], np.diff(ang) > 1e-13])
    ang = ang[keep]
    if len(ang) > 1 and ang[0] + TWO_PI - ang[-1] <= 1e-13:
        ang = ang[:-1]
    starts = ang
    ends = np.concatenate([ang[1:], [ang[0] + TWO_PI]])
    mids = 0.5 * (starts + ends)
    inside = spec.contains(z0 + r * np.exp(1j * mids))
    intervals = [(float(s), float(e)) for s, e, ok in zip(starts, ends, inside) if ok and e - s > 1e-13]
    if len(intervals) == len(starts) and cuts.size == 0:
        # every gap inside: the crossings were only touching points
        return DashedLine(z0, float(r), ((0.0, TWO_PI),), int(n_samples))
    merged = []
    for s, e in intervals:
        if merged and abs(merged[-1][1] - s) < 1e-13 and not is_cut(s):
            merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    if (len(merged) > 1 and abs(merged[-1][1] - (merged[0][0] + TWO_PI)) < 1e-13
            and not is_cut(merged[0][0])):
        first = merged.pop(0)
        last = merged.pop()
        merged.append((last[0], first[1] + TWO_PI))
    return DashedLine(z0, float(r), tuple(merged), int(n_samples))
