"""Dirichlet problem Re f = phi on the boundary for the Beltrami equation.

The solution is assembled as f = h o g: g0 is the normalized plane solution
for the truncated coefficient, R straightens g0(D) onto the unit disk
(Theodorsen iteration for nearly round star-shaped images, a Szego kernel
equation otherwise), g = R o g0, and h is the
Schwarz integral of the boundary data pulled back through g.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CloughTocher2DInterpolator
from scipy.spatial import ConvexHull

from .beltrami import SolutionBundle, homeo_check, mrm_solve
from .errors import InvalidArgument, InvalidDomain, NoConvergence, ResolutionGuard, StageError, ToolkitError
from .fields import ComplexField, RadialProfile, bilinear, truncate_mu
from .geometry import DomainSpec, Grid, circle_trace, make_grid

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# Boundary data and the Schwarz integral


@dataclass
class BoundaryData:
    """Real data on a closed boundary, sampled at parameters t in [0, 1].

    ``points`` run once around the boundary with the first point repeated at
    the end; values are interpolated piecewise linearly in t.
    """

    points: np.ndarray
    values: np.ndarray
    params: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        self.values = np.asarray(self.values, dtype=float)
        if self.points.shape != self.values.shape or self.points.size < 4:
            raise InvalidArgument("boundary data needs matching point and value arrays of length >= 4")
        if not np.all(np.isfinite(self.values)):
            raise InvalidArgument("boundary values must be finite")
        if abs(self.points[0] - self.points[-1]) > 1e-12 * (1 + abs(self.points[0])):
            raise InvalidArgument("boundary parameterization must be closed (first = last point)")
        if abs(self.values[0] - self.values[-1]) > 1e-9 * (1 + abs(self.values[0])):
            raise InvalidArgument("boundary values must agree at the closing point")
        if self.params is None:
            s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.points)))])
            self.params = s / s[-1]
        self.params = np.asarray(self.params, dtype=float)

    def __call__(self, t):
        t = np.mod(np.asarray(t, dtype=float), 1.0)
        return np.interp(t, self.params, self.values)

    def locate(self, z):
        """Parameter of the nearest point on the sampled boundary polyline."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        a, b = self.points[:-1], self.points[1:]
        e = b - a
        out = np.empty(flat.size)
        for s in range(0, flat.size, 1024):
            q = flat[s:s + 1024, None]
            t = np.clip(((q - a) * np.conj(e)).real / np.abs(e) ** 2, 0.0, 1.0)
            d = np.abs(a + t * e - q)
            k = np.argmin(d, axis=1)
            tk = t[np.arange(k.size), k]
            out[s:s + 1024] = self.params[k] + tk * (self.params[k + 1] - self.params[k])
        return out.reshape(z.shape)

    @property
    def is_constant(self) -> bool:
        return bool(np.ptp(self.values) <= 1e-14 * (1 + np.max(np.abs(self.values))))

    @classmethod
    def on_circle(cls, fn: Callable, n: int = 2048):
        """Data phi(theta) on the unit circle, t = theta / 2 pi."""
        theta = TWO_PI * np.arange(n + 1) / n
        vals = np.asarray(fn(theta), dtype=float)
        vals[-1] = vals[0]
        return cls(np.exp(1j * theta), vals, theta / TWO_PI)

    @classmethod
    def on_domain(cls, spec: DomainSpec, fn: Callable, n: int = 2048):
        """Data phi(z) at boundary points z of a disk or polygon, t = angle about the domain center / 2 pi."""
        c = domain_center(spec)
        pts = _star_boundary(spec, c, n)
        vals = np.asarray(fn(pts), dtype=float)
        vals[-1] = vals[0]
        return cls(pts, vals, np.arange(n + 1) / n)


def cos_data(k: int = 1):
    return lambda theta: np.cos(k * theta)


def random_trig_data(seed: int, degree: int):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(degree + 1) / (1 + np.arange(degree + 1))
    b = rng.standard_normal(degree + 1) / (1 + np.arange(degree + 1))
    b[0] = 0.0
    k = np.arange(degree + 1)

    def fn(theta):
        th = np.asarray(theta, dtype=float)[..., None]
        return np.sum(a * np.cos(k * th) + b * np.sin(k * th), axis=-1)

    return fn


def step_smoothed_data(width: float = 0.2):
    """A smoothed step: tanh(sin(theta) / width)."""
    return lambda theta: np.tanh(np.sin(theta) / width)


PHI_DATA = {"cos-k": cos_data, "random-trig": random_trig_data, "step-smoothed": step_smoothed_data}


def _circle_samples(phi, n: int):
    theta = TWO_PI * np.arange(n) / n
    if isinstance(phi, BoundaryData):
        return theta, phi(theta / TWO_PI)
    if callable(phi):
        return theta, np.asarray(phi(theta), dtype=float)
    vals = np.asarray(phi, dtype=float)
    if vals.size != n:
        raise InvalidArgument("sampled data must have one value per circle node")
    return theta, vals


def schwarz_integral(phi, z, N: int = 1024, gauge: float = 0.0):
    """h(z) = (1/2 pi) ∫ phi(e^{it}) (e^{it} + z)/(e^{it} - z) dt + i * gauge by the N-node trapezoid rule.

    ``phi`` is a BoundaryData on the unit circle, a callable of the angle, or
    N samples. Requires |z| <= 1 - 2 pi / N.
    """
    if N < 256:
        raise InvalidArgument("N must be at least 256")
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1 - TWO_PI / N + 1e-15):
        raise ResolutionGuard(f"|z| exceeds 1 - 2 pi / N = {1 - TWO_PI / N:.6g}; raise N")
    theta, vals = _circle_samples(phi, N)
    zeta = np.exp(1j * theta)
    flat = z.ravel()
    out = np.empty(flat.size, dtype=complex)
    for a in range(0, flat.size, 4096):
        blk = flat[a:a + 4096]
        ker = (zeta[None, :] + blk[:, None]) / (zeta[None, :] - blk[:, None])
        out[a:a + 4096] = ker @ vals / N
    out = out - 1j * out.imag * (flat == 0) + 1j * gauge
    return out.reshape(z.shape)


@dataclass
class SchwarzSeries:
    """Analytic h(w) = c0 + 2 sum_{k>=1} c_k w^k + i * gauge from FFT coefficients of the data."""

    coeffs: np.ndarray
    gauge: float = 0.0

    @classmethod
    def from_data(cls, phi, N: int = 2048, gauge: float = 0.0):
        _, vals = _circle_samples(phi, N)
        c = np.fft.fft(vals) / N
        m = N // 2
        a = np.empty(m, dtype=complex)
        a[0] = c[0].real
        a[1:] = 2.0 * c[1:m]
        return cls(_trim(a), gauge)

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        acc = np.zeros(w.shape, dtype=complex)
        for a in self.coeffs[::-1]:
            acc = acc * w + a
        return acc + 1j * self.gauge

    def derivative(self, w):
        w = np.asarray(w, dtype=complex)
        k = np.arange(1, self.coeffs.size)
        acc = np.zeros(w.shape, dtype=complex)
        for a in (k * self.coeffs[1:])[::-1]:
            acc = acc * w + a
        return acc


def trace_check(h: Callable, phi, radii, n_angles: int = 512) -> RadialProfile:
    """sup over test angles of |Re h(r e^{it}) - phi(e^{it})| for each radius."""
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0) or radii[0] <= 0 or radii[-1] >= 1:
        raise InvalidArgument("radii must increase inside (0, 1)")
    theta = TWO_PI * (np.arange(n_angles) + 0.5) / n_angles
    target = phi(theta / TWO_PI) if isinstance(phi, BoundaryData) else np.asarray(phi(theta), dtype=float)
    errs = [float(np.max(np.abs(np.real(h(r * np.exp(1j * theta))) - target))) for r in radii]
    return RadialProfile(0j, radii, np.array(errs), label="trace-error")


# ---------------------------------------------------------------------------
# Star-shaped domains and the Theodorsen map


def domain_center(spec: DomainSpec) -> complex:
    if spec.kind == "unit-disk":
        return 0j
    if spec.kind == "polygon":
        return complex(np.mean(spec.vertices))
    raise InvalidDomain("the Dirichlet pipeline handles the unit disk and star-shaped polygons")


def _star_boundary(spec: DomainSpec, c: complex, n: int) -> np.ndarray:
    """Boundary points hit by n uniform rays from c (closed: first point repeated)."""
    theta = TWO_PI * np.arange(n + 1) / n
    if spec.kind == "unit-disk":
        return np.exp(1j * theta)
    d = np.exp(1j * theta)
    best = np.full(n + 1, np.inf)
    for a, b in spec.edges:
        e = b - a
        den = (np.conj(d) * e).imag
        with np.errstate(divide="ignore", invalid="ignore"):
            s = ((np.conj(a - c) * e).imag) / den
            u = ((np.conj(a - c) * d).imag) / den
        ok = (np.abs(den) > 1e-15) & (s > 0) & (u >= -1e-12) & (u <= 1 + 1e-12)
        best = np.where(ok & (s < best), s, best)
    if not np.all(np.isfinite(best)):
        raise InvalidDomain("domain is not star-shaped about its vertex centroid")
    return c + best * d


def check_star_shaped(spec: DomainSpec, n: int = 4096) -> None:
    if spec.kind == "unit-disk":
        return
    c = domain_center(spec)
    if not spec.contains(np.array([c]))[0]:
        raise InvalidDomain("vertex centroid lies outside the polygon")
    for a, b in spec.edges:
        # every edge must be seen from the center with positive orientation
        if ((np.conj(a - c) * (b - c)).imag <= 0) == spec.positive_orientation:
            raise InvalidDomain("polygon is not star-shaped about its vertex centroid")


@dataclass
class ConformalMap:
    """Riemann map R of a star-shaped domain onto the unit disk, R(0) = 0, R'(0) > 0.

    Stored through its inverse F(w) = w exp(sum_{k>=0} a_k w^k) on the disk.
    ``theta`` is the boundary correspondence: F(e^{i phi_j}) has argument theta_j.
    """

    coeffs: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    iterations: int
    residual: float
    epsilon: float
    method: str = "theodorsen"
    clamped: dict = field(default_factory=dict)

    def forward(self, w):
        w = np.asarray(w, dtype=complex)
        acc = np.zeros(w.shape, dtype=complex)
        for a in self.coeffs[::-1]:
            acc = acc * w + a
        return w * np.exp(acc)

    def _F_and_dF(self, w):
        acc = np.zeros(w.shape, dtype=complex)
        dacc = np.zeros(w.shape, dtype=complex)
        for k in range(self.coeffs.size - 1, -1, -1):
            dacc = dacc * w + acc
            acc = acc * w + self.coeffs[k]
        E = np.exp(acc)
        return w * E, E * (1.0 + w * dacc)

    def boundary_angle(self, theta):
        """phi with arg F(e^{i phi}) = theta (inverse correspondence)."""
        th = np.asarray(theta, dtype=float)
        base = self.theta[0]
        tt = np.concatenate([self.theta, [self.theta[0] + TWO_PI]])
        pp = np.concatenate([self.phi, [TWO_PI]])
        x = np.mod(th - base, TWO_PI) + base
        return np.interp(x, tt, pp)

    def __call__(self, zeta, tol: float = 1e-13, max_newton: int = 60, strict: bool = True):
        """R(zeta) by Newton on F(w) = zeta, started from the polar correspondence.

        Points just outside the image of the truncated series (near corners)
        pin Newton to the circle. ``strict=False`` keeps those pinned values
        and records their count and worst mismatch in ``self.clamped``.
        """
        zeta = np.asarray(zeta, dtype=complex)
        flat = zeta.ravel()
        ang = np.angle(flat)
        rb = np.abs(self.forward(np.exp(1j * self.boundary_angle(ang))))
        w = np.abs(flat) / rb * np.exp(1j * self.boundary_angle(ang))
        big = np.abs(w) >= 1
        w[big] = w[big] / np.abs(w[big]) * (1 - 1e-12)
        active = np.arange(w.size)
        for _ in range(max_newton):
            F, dF = self._F_and_dF(w[active])
            step = (F - flat[active]) / dF
            cur = w[active]
            new = cur - step
            # halve steps that would leave the disk
            for _ in range(30):
                out = ~(np.abs(new) < 1.0)
                if not np.any(out):
                    break
                step[out] *= 0.5
                new[out] = cur[out] - step[out]
            w[active] = new
            active = active[np.abs(step) >= tol]
            if active.size == 0:
                break
        if active.size:
            pinned = np.abs(w[active]) > 1 - 1e-6
            if strict or not np.all(pinned):
                raise NoConvergence(f"inverse Riemann map failed at {active.size} points", stage="riemann")
            miss = float(np.max(np.abs(self.forward(w[active]) - flat[active])))
            self.clamped = {"points": int(active.size), "max_mismatch": miss}
        return w.reshape(zeta.shape)

    def derivative(self, zeta, w=None):
        """R'(zeta); pass ``w = R(zeta)`` when already known."""
        w = self(zeta) if w is None else w
        _, dF = self._F_and_dF(np.asarray(w, dtype=complex))
        return 1.0 / dF


def _conjugate(u: np.ndarray) -> np.ndarray:
    """Periodic conjugate function (multiplier -i sign k) of samples on uniform angles."""
    n = u.size
    c = np.fft.fft(u)
    k = np.fft.fftfreq(n, 1.0 / n)
    return np.real(np.fft.ifft(-1j * np.sign(k) * c))


def log_slope(rho, n: int = 2048) -> float:
    """max |d log rho / d theta| sampled on 4n angles."""
    fine = np.linspace(0.0, TWO_PI, 4 * n, endpoint=False)
    lr_fine = np.log(np.asarray(rho(fine), dtype=float))
    if not np.all(np.isfinite(lr_fine)):
        raise InvalidDomain("boundary radius must be positive and finite")
    dl = np.gradient(np.concatenate([lr_fine[-2:], lr_fine, lr_fine[:2]]), fine[1] - fine[0])[2:-2]
    return float(np.max(np.abs(dl)))


def theodorsen_riemann(rho, tol: float = 1e-12, max_iter: int = 500, n: int = 2048, damping: float = 1.0) -> ConformalMap:
    """Conformal map of a star-shaped domain r < rho(theta) onto the unit disk.

    Iterates theta(phi) = phi + conj[log rho(theta(phi))] on n uniform nodes.
    ``rho`` is a positive callable of the angle. The epsilon condition
    max |d log rho / d theta| < 1 guarantees contraction; it is recorded, and
    inputs failing it are accepted only with ``damping`` < 1.
    """
    phi = TWO_PI * np.arange(n) / n
    eps = log_slope(rho, n)
    if eps >= 1.0 and damping >= 1.0:
        raise InvalidDomain(f"epsilon condition fails (max |d log rho| = {eps:.3g}); use damping < 1")

    def logrho(t):
        return np.log(np.asarray(rho(np.mod(t, TWO_PI)), dtype=float))

    theta = phi.copy()
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        new = phi + _conjugate(logrho(theta))
        res = float(np.max(np.abs(new - theta)))
        theta = theta + damping * (new - theta)
        if res < tol:
            break
    if res >= tol:
        raise NoConvergence(f"Theodorsen iteration stalled at {res:.3g}", stage="riemann")
    if np.any(np.diff(theta) <= 0) or theta[-1] - theta[0] >= TWO_PI:
        raise InvalidDomain("boundary correspondence is not monotone")
    return _map_from_correspondence(phi, theta, logrho(theta), it, res, eps)


def _map_from_correspondence(phi, theta, log_r, iterations, residual, eps, method="theodorsen") -> ConformalMap:
    # log F(w)/w = log |F| + i (theta - phi) has these Fourier coefficients
    n = phi.size
    c = np.fft.fft(log_r + 1j * (theta - phi)) / n
    coeffs = c[: n // 2].copy()
    coeffs[0] = c[0].real
    return ConformalMap(_trim(coeffs), phi, theta, iterations, residual, eps, method)


def szego_riemann(points, n: int = 2048) -> ConformalMap:
    """Riemann map of the Jordan domain bounded by ``points`` onto the disk, 0 -> 0.

    ``points`` sample the boundary once counterclockwise at uniform parameter
    steps (no repeated end point) and the domain must contain 0. The Szego
    kernel S(., 0) solves the Kerzman-Stein equation (I + A) S = H by the
    trapezoid Nystrom rule; |R'| is proportional to |S|^2 on the boundary, so
    the correspondence is monotone by construction. Needs no smallness
    condition on the boundary, only more nodes near corners.
    """
    z = np.asarray(points, dtype=complex)
    m = z.size
    if m < 16:
        raise InvalidArgument("need at least 16 boundary points")
    dt = TWO_PI / m
    dz = (np.roll(z, -1) - np.roll(z, 1)) / (2 * dt)
    speed = np.abs(dz)
    if np.any(speed == 0):
        raise InvalidDomain("repeated boundary points")
    T = dz / speed
    wind = np.sum(np.angle(np.roll(z, -1) / z)) / TWO_PI
    if round(wind) != 1:
        raise InvalidDomain("boundary must wind once counterclockwise around 0")
    diff = z[None, :] - z[:, None]  # w - z with z on rows
    np.fill_diagonal(diff, 1.0)
    # skew-hermitian Kerzman-Stein kernel, sign as in (I + A) S = H for S(., 0)
    A = (np.conj(T[:, None]) / np.conj(diff) - T[None, :] / diff) / (2j * math.pi)
    np.fill_diagonal(A, 0.0)
    rhs = np.conj(T / z / (2j * math.pi))
    S = np.linalg.solve(np.eye(m) + A * (speed * dt)[None, :], rhs)
    dens = np.abs(S) ** 2 * speed
    if not np.all(np.isfinite(dens)) or np.min(dens) <= 0:
        raise NoConvergence("Szego kernel vanished on the boundary", stage="riemann")
    # R = -i T S^2 / |S|^2 on the boundary fixes the rotation; |R'| |dz| integrates to 2 pi
    start = float(np.angle(-1j * T[0] * S[0] ** 2))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens + np.roll(dens, -1)) * dt)])
    circ = start + TWO_PI * cum / cum[-1]
    ang = np.unwrap(np.angle(np.concatenate([z, z[:1]])))
    lr = np.log(np.abs(np.concatenate([z, z[:1]])))
    phi = TWO_PI * np.arange(n) / n
    x = np.mod(phi - circ[0], TWO_PI) + circ[0]
    theta = np.interp(x, circ, ang) + (phi - x)
    log_r = np.interp(x, circ, lr)
    res = float(np.max(np.abs((np.eye(m) + A * (speed * dt)[None, :]) @ S - rhs)))
    return _map_from_correspondence(phi, theta, log_r, 0, res, math.nan, "szego")


def _trim(a: np.ndarray, rel: float = 1e-16) -> np.ndarray:
    """Drop trailing series coefficients below rounding level."""
    big = np.flatnonzero(np.abs(a) > rel * max(1.0, float(np.max(np.abs(a)))))
    return a[: (big[-1] + 1 if big.size else 1)].copy()


# ---------------------------------------------------------------------------
# The pipeline


@dataclass
class DirichletReport:
    f: ComplexField | None
    residual: float
    residual_fd: float
    trace: RadialProfile | None
    jacobian_positive_fraction: float
    h: SchwarzSeries | None = None
    g0: SolutionBundle | None = None
    riemann: ConformalMap | None = None
    constant: bool = False
    mask: np.ndarray | None = None
    correspondence: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    oscillation: dict = field(default_factory=dict)
    limit_error: float = 0.0

    def g(self, z):
        return self.riemann(self.g0(z) - self.provenance["image_center"], strict=False)

    def __call__(self, z):
        if self.constant:
            return np.full(np.shape(z), self.provenance["constant"] + 0j)
        return self.h(self.g(z))

    def rows(self) -> list:
        out = [("residual", self.residual), ("residual_fd", self.residual_fd),
               ("jacobian_positive_fraction", self.jacobian_positive_fraction)]
        if self.trace is not None:
            out += [(f"trace_error@{r:.6g}", v) for r, v in zip(self.trace.radii, self.trace.values)]
        out.append(("trace_error@limit", self.limit_error))
        return out


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except ToolkitError as exc:
        raise StageError(name, exc) from exc


def _solver_grid(spec: DomainSpec, resolution: int) -> Grid:
    xmin, xmax, ymin, ymax = spec.bounding_box()
    c = complex(0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
    # the domain sits inside the central half of the box, with a margin
    half = 1.25 * max(xmax - xmin, ymax - ymin)
    return make_grid((c.real - half, c.real + half, c.imag - half, c.imag + half), resolution)


def _resample_mu(mu, spec: DomainSpec, grid: Grid) -> ComplexField:
    inside = spec.contains(grid.z)
    if isinstance(mu, ComplexField):
        if mu.grid == grid:
            vals = mu.values
        else:
            vals = bilinear(mu.grid, mu.values, grid.z, fill=0.0)
    elif callable(mu):
        vals = np.asarray(mu(grid.z), dtype=complex)
    else:
        vals = np.full(grid.shape, complex(mu))
    return ComplexField(grid, np.where(inside, vals, 0j), np.ones(grid.shape, dtype=bool))


def _radial_limits(g0: SolutionBundle, spec: DomainSpec, n: int):
    c = domain_center(spec)
    pts = _star_boundary(spec, c, n)[:-1]
    vals = [g0(c + (1 - 2.0**-k) * (pts - c)) for k in (7, 8)]
    # linear extrapolation to r = 1 from the two radii
    return pts, 2.0 * vals[1] - vals[0]


def _image_radius(w: np.ndarray):
    """Star-shaped radius function of a closed sample list of boundary images."""
    ang = np.unwrap(np.angle(w))
    if ang[-1] < ang[0]:
        raise InvalidDomain("image boundary winds clockwise")
    if np.any(np.diff(ang) <= 0) or ang[-1] - ang[0] >= TWO_PI:
        raise InvalidDomain("image boundary is not star-shaped; lower the truncation level or shrink mu")
    a = np.concatenate([ang, [ang[0] + TWO_PI]])
    lr = np.log(np.abs(np.concatenate([w, [w[0]]])))

    def rho(t):
        x = np.mod(np.asarray(t, dtype=float) - a[0], TWO_PI) + a[0]
        return np.exp(np.interp(x, a, lr))

    return rho, ang


def solve_dirichlet(mu, spec: DomainSpec, phi: BoundaryData, truncation: float = math.inf, resolution: int = 512,
                    tol: float = 1e-10, n_boundary: int = 2048, gauge: float = 0.0, trace_radii=None,
                    eval_grid: Grid | None = None) -> DirichletReport:
    """Regular solution f = h o g of the Dirichlet problem on a disk or star-shaped polygon.

    ``mu`` is a ComplexField, a callable or a constant; it is extended by zero
    outside D and truncated at dilatation ``truncation``. ``gauge`` sets
    Im h(0). The report carries f on the masked evaluation grid, its Beltrami
    residual against the truncated coefficient (chain rule through the
    solver's spectral derivatives, plus a finite-difference cross-check), the
    boundary trace profile and the factors (h, g).
    """
    _stage("domain", check_star_shaped, spec)
    grid = _solver_grid(spec, resolution)
    center = domain_center(spec)
    if trace_radii is None:
        trace_radii = 1.0 - 2.0 ** -np.arange(1, 7)
    if phi.is_constant:
        c = float(phi.values[0])
        eg = eval_grid or grid
        mask = spec.contains(eg.z)
        f = ComplexField(eg, np.where(mask, c + 0j, 0j), mask)
        return DirichletReport(f, 0.0, 0.0, None, 1.0, constant=True, mask=mask,
                               provenance={"constant": c, "truncation": truncation})
    mu_t = _resample_mu(mu, spec, grid)
    if math.isfinite(truncation):
        mu_t = _stage("truncate", truncate_mu, mu_t, truncation)
    g0 = _stage("beltrami", mrm_solve, mu_t, tol)

    pts, w = _radial_limits(g0, spec, n_boundary)
    wc = complex(g0(np.array([center]))[0])
    rho, ang = _stage("image", _image_radius, w - wc)
    if _stage("image", log_slope, rho, n_boundary) < 1.0:
        riemann = _stage("riemann", theodorsen_riemann, rho, n=n_boundary)
    else:
        # corners of g0(D) break the contraction; the kernel method has no such limit
        riemann = _stage("riemann", szego_riemann, w - wc, n_boundary)

    # pull the data back: circle angle -> image angle -> boundary parameter of D
    img_theta = riemann.theta  # image angles at the uniform circle nodes
    params = phi.locate(pts)
    order = np.argsort(ang)
    a_sorted = ang[order]
    p_unwrapped = np.unwrap(params[order] * TWO_PI) / TWO_PI
    x = np.mod(img_theta - a_sorted[0], TWO_PI) + a_sorted[0]
    t_back = np.interp(x, np.concatenate([a_sorted, [a_sorted[0] + TWO_PI]]),
                       np.concatenate([p_unwrapped, [p_unwrapped[0] + 1.0]]))
    data = phi(t_back)
    h = SchwarzSeries.from_data(data, n_boundary, gauge)

    eg = eval_grid or grid
    mask = spec.contains(eg.z)
    zi = eg.z[mask]
    g0i = g0(zi) - wc
    gz = riemann(g0i, strict=False)
    fvals = np.zeros(eg.shape, dtype=complex)
    fvals[mask] = h(gz)
    f = ComplexField(eg, fvals, mask)

    # residual: chain rule f_z = h'(g) R'(g0) g0_z, f_zbar = h'(g) R'(g0) g0_zbar
    if eg == grid:
        g0z, g0zb, muv = g0.fz.values[mask], g0.fzb.values[mask], mu_t.values[mask]
    else:
        g0z = bilinear(grid, g0.fz.values, zi)
        g0zb = bilinear(grid, g0.fzb.values, zi)
        muv = bilinear(grid, mu_t.values, zi)
    scale = h.derivative(gz) * riemann.derivative(g0i, gz)
    r = scale * (g0zb - muv * g0z)
    residual = float(math.sqrt(np.sum(np.abs(r) ** 2) * eg.cell_area))
    residual_fd = _fd_residual(f, mu_t, spec, eg)
    jac = np.abs(g0z) ** 2 - np.abs(g0zb) ** 2
    pos = float(np.mean(jac > 0))

    report = DirichletReport(
        f, residual, residual_fd, None, pos, h=h, g0=g0, riemann=riemann, mask=mask,
        correspondence={"boundary": pts, "image": w, "circle_angle": riemann.boundary_angle(ang)},
        provenance={"truncation": truncation, "tol": tol, "resolution": resolution, "gauge": gauge,
                    "image_center": wc, "riemann_method": riemann.method, "riemann_iterations": riemann.iterations,
                    "epsilon": riemann.epsilon, "beltrami_iterations": g0.provenance["iterations"]},
    )
    if spec.kind == "unit-disk":
        report.trace = trace_check(report, phi, trace_radii)
    else:
        report.trace = _polygon_trace(report, phi, spec, trace_radii)
    report.limit_error = _limit_error(report, phi, spec)
    report.provenance["riemann_clamped"] = dict(riemann.clamped)
    return report


def _fd_residual(f: ComplexField, mu_t: ComplexField, spec: DomainSpec, eg: Grid) -> float:
    """Finite-difference residual on nodes whose whole stencil lies in D."""
    from .beltrami import wirtinger

    mask = f.mask
    inner = mask.copy()
    inner[1:-1, 1:-1] &= mask[2:, 1:-1] & mask[:-2, 1:-1] & mask[1:-1, 2:] & mask[1:-1, :-2]
    inner[[0, -1], :] = False
    inner[:, [0, -1]] = False
    fz, fzb = wirtinger(f)
    muv = mu_t.values if mu_t.grid == eg else bilinear(mu_t.grid, mu_t.values, eg.z, fill=0.0)
    r = np.where(inner, fzb.values - muv * fz.values, 0.0)
    return float(math.sqrt(np.sum(np.abs(r) ** 2) * eg.cell_area))


def _polygon_trace(report, phi: BoundaryData, spec: DomainSpec, radii) -> RadialProfile:
    c = domain_center(spec)
    pts = phi.points[:-1][:: max(1, (phi.points.size - 1) // 512)]
    target = phi(phi.locate(pts))
    errs = [float(np.max(np.abs(np.real(report(c + r * (pts - c))) - target))) for r in radii]
    return RadialProfile(c, np.asarray(radii, float), np.array(errs), label="trace-error")


def _limit_error(report, phi: BoundaryData, spec: DomainSpec, n: int = 512) -> float:
    """Boundary error of the radial limits, extrapolated like the solver's image boundary."""
    c = domain_center(spec)
    pts = _star_boundary(spec, c, n)[:-1]
    vals = [np.real(report(c + (1 - 2.0**-k) * (pts - c))) for k in (7, 8)]
    return float(np.max(np.abs(2.0 * vals[1] - vals[0] - phi(phi.locate(pts)))))


# ---------------------------------------------------------------------------
# Boundary behaviour experiments


def _hull_diameter(w: np.ndarray) -> float:
    w = w[np.isfinite(w)]
    if w.size < 2:
        return 0.0
    pts = np.column_stack([w.real, w.imag])
    if w.size >= 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            pass
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def _chebyshev_arcs(line) -> np.ndarray:
    """Arc samples at Chebyshev angles, crowding the arc ends where S(z0, eps) meets the boundary."""
    pts = []
    for a, b in line.arcs:
        if line.is_full_circle:
            theta, _ = line.arc_samples(a, b)
        else:
            m = max(2, int(math.ceil(line.samples * (b - a) / TWO_PI)))
            theta = 0.5 * (a + b) + 0.5 * (b - a) * np.cos(math.pi * (np.arange(m) + 0.5) / m)
        pts.append(line.center + line.radius * np.exp(1j * theta))
    return np.concatenate(pts) if pts else np.zeros(0, dtype=complex)


def boundary_oscillation(f: Callable, spec: DomainSpec, z0: complex, eps, n_samples: int = 10_000,
                         seed: int = 0) -> RadialProfile:
    """Diameter of f(D ∩ B(z0, eps)) for each eps of a descending ladder.

    Half the seeded samples are uniform in D ∩ B(z0, eps), half lie on the
    dashed line D ∩ S(z0, eps) at Chebyshev angles of each arc, so the arc
    ends next to the boundary are resolved. Levels with no samples in D end the ladder;
    the returned label then carries the flag ``truncated``.
    """
    eps = np.asarray(eps, dtype=float)
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise InvalidArgument("eps ladder must be positive and descending")
    rng = np.random.default_rng(seed)
    z0 = complex(z0)
    diam = []
    kept = []
    for e in eps:
        area = []
        need = n_samples // 2
        for _ in range(50):
            r = e * np.sqrt(rng.uniform(0, 1, 2 * need))
            t = rng.uniform(0, TWO_PI, 2 * need)
            p = z0 + r * np.exp(1j * t)
            area.extend(p[spec.contains(p)].tolist())
            if len(area) >= need:
                break
        line = circle_trace(spec, z0, e, max(16, n_samples // 2))
        arc = _chebyshev_arcs(line)
        pts = np.concatenate([np.asarray(area[:need], dtype=complex), arc])
        if pts.size == 0:
            break
        kept.append(e)
        diam.append(_hull_diameter(np.asarray(f(pts), dtype=complex)))
    label = "cluster-diameter" + ("" if len(kept) == eps.size else ":truncated")
    if not kept:
        raise InvalidArgument("no samples of D near z0 on any level")
    order = np.argsort(kept)
    return RadialProfile(z0, np.asarray(kept)[order], np.asarray(diam)[order], label=label)


def stoilow_factor_check(f, g, mask=None, max_points: int = 200_000) -> dict:
    """Certify f = h o g with h analytic: interpolate h~ = f o g^{-1} on the image
    grid and return the relative L2 norm of d h~/dzbar.

    ``f`` and ``g`` are ComplexFields on the same grid (or a SolutionBundle
    for ``g``). More than 5% interpolation gaps inside the image makes the
    check inconclusive.
    """
    if isinstance(g, SolutionBundle):
        g = g.f
    if isinstance(f, SolutionBundle):
        f = f.f
    if f.grid != g.grid:
        raise InvalidArgument("f and g must share a grid")
    m = f.mask & g.mask if mask is None else np.asarray(mask, dtype=bool) & f.mask & g.mask
    idx = np.argwhere(m)
    stride = max(1, int(math.ceil(math.sqrt(idx.shape[0] / max_points))))
    sel = m.copy()
    if stride > 1:
        sub = np.zeros_like(m)
        sub[::stride, ::stride] = True
        sel &= sub
    src = g.values[sel]
    val = f.values[sel]
    interp = CloughTocher2DInterpolator(np.column_stack([src.real, src.imag]), val)
    n_img = int(math.sqrt(max(idx.shape[0], 16)) / stride)
    n_img = max(n_img, 16)
    lo = complex(src.real.min(), src.imag.min())
    hi = complex(src.real.max(), src.imag.max())
    ig = make_grid((lo.real, hi.real, lo.imag, hi.imag), (n_img, n_img))
    hv = interp(ig.z.real, ig.z.imag)
    # image nodes inside the image of the mask: those whose preimage-grid neighbours are masked
    inside = np.isfinite(hv)
    pts_img = np.column_stack([src.real, src.imag])
    hull = ConvexHull(pts_img)
    eq = hull.equations
    in_hull = np.all(ig.z.real[..., None] * eq[:, 0] + ig.z.imag[..., None] * eq[:, 1] + eq[:, 2] <= 1e-12, axis=-1)
    gaps = float(np.mean(~inside[in_hull])) if np.any(in_hull) else 1.0
    good = np.isfinite(hv)
    hf = ComplexField(ig, np.where(good, hv, 0), good)
    from .beltrami import wirtinger

    fz, fzb = wirtinger(hf)
    inner = good.copy()
    inner[1:-1, 1:-1] &= good[2:, 1:-1] & good[:-2, 1:-1] & good[1:-1, 2:] & good[1:-1, :-2]
    inner[[0, -1], :] = False
    inner[:, [0, -1]] = False
    nb = float(np.sqrt(np.sum(np.abs(fzb.values[inner]) ** 2)))
    na = float(np.sqrt(np.sum(np.abs(fz.values[inner]) ** 2)))
    total = math.hypot(na, nb)
    rel = nb / total if total > 0 else math.inf
    return {"dbar_relative": rel, "dbar_norm": nb * math.sqrt(ig.cell_area), "gap_fraction": gaps,
            "verdict": "inconclusive" if gaps > 0.05 else ("holds" if rel < 1e-3 else "fails")}


# ---------------------------------------------------------------------------
# Output


def write_report_csv(report: DirichletReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "value"])
        for k, v in report.rows():
            w.writerow([k, repr(float(v))])


def write_trace_csv(report: DirichletReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["radius [length]", "trace_error [data units]"])
        if report.trace is not None:
            for r, v in zip(report.trace.radii, report.trace.values):
                w.writerow([repr(float(r)), repr(float(v))])
            # extrapolated radial limit, reported at r = 1
            w.writerow([repr(1.0), repr(float(report.limit_error))])


def write_correspondence_csv(report: DirichletReport, path, every: int = 16) -> None:
    c = report.correspondence
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_boundary [length]", "im_boundary [length]", "re_image [length]", "im_image [length]",
                    "circle_angle [rad]"])
        if not c:
            return
        for b, im, a in list(zip(c["boundary"], c["image"], c["circle_angle"]))[::every]:
            w.writerow([repr(float(b.real)), repr(float(b.imag)), repr(float(im.real)), repr(float(im.imag)),
                        repr(float(a))])
