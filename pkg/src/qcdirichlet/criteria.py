"""Oscillation and integrability criteria, each returned as a CriterionReport.

Improper integrals are classified, not proved divergent: the tail is cut into
blocks that are decades of the log of the integration variable, each block
integral is computed in log space, and the verdict follows from the ratios of
successive block integrals (>= 0.5 divergent, <= 0.25 convergent).

A Phi function is carried in log-log form so tails such as exp(10**8) never
overflow: with H = log Phi,

    lh(u)  = log H(e^u),     dlh(u) = d lh / du,     lhinv = inverse of lh.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import expit, logsumexp

from .errors import InvalidArgument
from .fields import ComplexField, dilatation, evaluator
from .geometry import DomainSpec, circle_trace
from .modulus import dashed_line_bound

LN10 = math.log(10.0)
DIVERGENT_RATIO = 0.5
CONVERGENT_RATIO = 0.25
MIN_R2 = 0.99


@dataclass
class CriterionReport:
    criterion: str
    verdict: str  # holds | fails | inconclusive
    evidence: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    point: complex | None = None
    model: str = ""

    def __post_init__(self):
        if self.verdict not in ("holds", "fails", "inconclusive"):
            raise InvalidArgument(f"unknown verdict {self.verdict!r}")

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def as_row(self) -> dict:
        pt = "" if self.point is None else f"{self.point.real:.12g}{self.point.imag:+.12g}j"
        return {
            "criterion": self.criterion,
            "point": pt,
            "verdict": self.verdict,
            "model": self.model,
            "parameters": json.dumps(_plain(self.parameters), sort_keys=True),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def write_reports_csv(reports: Sequence[CriterionReport], path) -> None:
    cols = ["criterion", "point", "verdict", "model", "parameters"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in reports:
            w.writerow(r.as_row())


# ---------------------------------------------------------------------------
# Phi functions


@dataclass
class PhiFunction:
    label: str
    phi: Callable  # t -> Phi(t), may overflow to inf
    lh: Callable  # u -> log H(e^u)
    dlh: Callable  # u -> d lh/du
    lhinv: Callable | None = None
    phi0: float = 0.0  # Phi(0) (or its right limit)
    t_start: float = 1.0  # a t with H(t) > 0; tails start here

    def H(self, t):
        return np.exp(self.lh(np.log(t)))

    def invert_lh(self, v):
        """Numerical inverse of lh, used when no closed form is supplied."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        out = np.empty_like(v)
        lo0 = math.log(self.t_start)
        for k, vk in enumerate(v):
            lo, hi = lo0, lo0 + 1.0
            while self.lh(lo) > vk:
                lo = 0.5 * lo if lo > 1e-3 else math.nan
                if math.isnan(lo):
                    raise InvalidArgument(f"lh cannot be inverted at {vk}")
            while self.lh(hi) < vk:
                hi += 2 * (1 + abs(hi))
            out[k] = brentq(lambda u: self.lh(u) - vk, lo, hi, xtol=1e-13, rtol=1e-14, maxiter=400)
        return out

    def inverse_lh(self, v):
        if self.lhinv is not None:
            return self.lhinv(np.asarray(v, dtype=float))
        return self.invert_lh(v)

    def is_convex(self, t_max: float = 100.0, n: int = 256, tol: float = 1e-9) -> bool:
        """Nondecreasing with nondecreasing secant slopes on a log grid over [1, t_max]."""
        t = np.geomspace(1.0, t_max, n)
        with np.errstate(over="ignore"):
            v = np.asarray(self.phi(t), dtype=float)
        if not np.all(np.isfinite(v)):
            return False
        slopes = np.diff(v) / np.diff(t)
        scale = np.maximum(np.abs(slopes[1:]), 1.0)
        return bool(np.all(np.diff(v) >= -tol * np.abs(v[1:])) and np.all(np.diff(slopes) >= -tol * scale))


def _log1pexp(u):
    return np.logaddexp(0.0, u)


def phi_catalog(alpha: float = 1.0) -> dict:
    """Built-in Phi functions in log-log form."""
    la = math.log(alpha)
    cat = {
        "t": PhiFunction("t", lambda t: np.asarray(t, float), lambda u: np.log(u), lambda u: 1.0 / u,
                         lambda v: np.exp(v), 0.0, math.e**2),
        "t^2": PhiFunction("t^2", lambda t: np.asarray(t, float) ** 2, lambda u: math.log(2) + np.log(u),
                           lambda u: 1.0 / u, lambda v: np.exp(v - math.log(2)), 0.0, math.e),
        "exp": PhiFunction("exp", lambda t: np.exp(t), lambda u: np.asarray(u, float), lambda u: np.ones_like(u),
                           lambda v: np.asarray(v, float), 1.0, math.e),
        "exp-sqrt": PhiFunction("exp-sqrt", lambda t: np.exp(np.sqrt(t)), lambda u: 0.5 * np.asarray(u, float),
                                lambda u: 0.5 * np.ones_like(u), lambda v: 2.0 * np.asarray(v, float), 1.0, math.e**2),
        "t-log": PhiFunction(
            "t-log",
            lambda t: np.asarray(t, float) * np.log1p(t),
            lambda u: np.log(u + np.log(_log1pexp(u))),
            lambda u: (1.0 + expit(u) / _log1pexp(u)) / (u + np.log(_log1pexp(u))),
            None, 0.0, math.e**2,
        ),
        "exp-over-t": PhiFunction(
            "exp-over-t",
            lambda t: np.exp(t) / np.asarray(t, float),
            lambda u: u + np.log1p(-u * np.exp(-u)),
            lambda u: -np.expm1(-u) / (1.0 - u * np.exp(-u)),
            None, math.inf, math.e**2,
        ),
    }
    if alpha != 1.0:
        cat["exp-alpha"] = PhiFunction(
            "exp-alpha", lambda t: np.exp(alpha * np.asarray(t, float)), lambda u: la + np.asarray(u, float),
            lambda u: np.ones_like(u), lambda v: np.asarray(v, float) - la, 1.0, math.e / alpha,
        )
    return cat


PHI_CATALOG_NAMES = ("t", "t^2", "exp", "exp-sqrt", "t-log", "exp-over-t")


def exp_phi(alpha: float = 1.0) -> PhiFunction:
    if alpha == 1.0:
        return phi_catalog()["exp"]
    return phi_catalog(alpha)["exp-alpha"]


def load_phi_csv(path, label: str | None = None) -> PhiFunction:
    """Tabulated Phi from a CSV with columns t, phi (monotone cubic interpolation).

    Beyond the table, log H is extended linearly in log t, i.e. H continues as
    a power of t.
    """
    t, v = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            t.append(float(row["t"]))
            v.append(float(row["phi"]))
    t = np.asarray(t)
    v = np.asarray(v)
    order = np.argsort(t)
    t, v = t[order], v[order]
    if t.size < 4 or np.any(np.diff(t) <= 0) or np.any(np.diff(v) < 0) or np.any(v < 0):
        raise InvalidArgument("tabulated Phi needs >= 4 rows, increasing t and nondecreasing values")
    raw = PchipInterpolator(t, v, extrapolate=True)
    keep = (v > 1.0) & (t > 0)
    if keep.sum() < 3:
        raise InvalidArgument("tabulated Phi must exceed 1 on at least three rows")
    u = np.log(t[keep])
    lhv = np.log(np.log(v[keep]))
    spline = PchipInterpolator(u, lhv, extrapolate=False)
    dspline = spline.derivative()
    slope = float(dspline(u[-1]))

    def lh(x):
        x = np.asarray(x, float)
        out = np.where(x > u[-1], lhv[-1] + slope * (x - u[-1]), spline(np.clip(x, u[0], u[-1])))
        return out

    def dlh(x):
        x = np.asarray(x, float)
        return np.where(x > u[-1], slope, dspline(np.clip(x, u[0], u[-1])))

    def phi(x):
        x = np.asarray(x, float)
        big = x > t[-1]
        with np.errstate(over="ignore"):
            ext = np.exp(np.exp(lh(np.log(np.where(big, x, t[-1])))))
        return np.where(big, ext, raw(np.clip(x, t[0], t[-1])))

    return PhiFunction(label or str(path), phi, lh, dlh, None, float(v[0]), float(t[keep][0]))


# ---------------------------------------------------------------------------
# Block classification


_GL_X, _GL_W = leggauss(16)


def _block_logs(log_integrand: Callable, w0: float, n_blocks: int = 8, panels: int = 32) -> np.ndarray:
    """log of ∫ over w in [w0 + k ln10, w0 + (k+1) ln10] of exp(log_integrand(w)) dw."""
    out = np.empty(n_blocks)
    for k in range(n_blocks):
        edges = w0 + LN10 * (k + np.arange(panels + 1) / panels)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        w = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        wt = (half[:, None] * _GL_W[None, :]).ravel()
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(log_integrand(w), dtype=float) + np.log(wt)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        out[k] = logsumexp(vals)
    return out


def _classify_blocks(logs: np.ndarray) -> tuple:
    lr = np.diff(logs)
    with np.errstate(invalid="ignore"):
        ratios = np.exp(np.where(np.isfinite(lr), lr, -np.inf))
    tail = ratios[-3:]
    if np.all(tail >= DIVERGENT_RATIO):
        return "holds", ratios
    if np.all(tail <= CONVERGENT_RATIO):
        return "fails", ratios
    return "inconclusive", ratios


def _tail_bound(logs, ratios):
    r = float(np.max(ratios[-3:]))
    if r >= 1.0:
        return math.inf
    return float(np.exp(logsumexp(logs)) + np.exp(logs[-1]) * r / (1.0 - r))


def phi_divergence(Phi: PhiFunction, delta0: float, n_decades: int = 8) -> CriterionReport:
    """Classify ∫_{delta0}^inf dtau / (tau Phi^{-1}(tau)) as divergent (holds) or convergent (fails).

    With tau = e^s and s = e^v the integrand is exp(v - lhinv(v)) dv; blocks
    are decades of s = log tau.
    """
    if not delta0 > Phi.phi0:
        raise InvalidArgument(f"delta0 must exceed Phi(0) = {Phi.phi0}")
    s0 = max(math.log(delta0), 1.0)
    v0 = max(math.log(s0), float(Phi.lh(math.log(Phi.t_start))))
    try:
        logs = _block_logs(lambda v: v - Phi.inverse_lh(v), v0, n_decades)
    except (ValueError, OverflowError, FloatingPointError) as exc:
        raise InvalidArgument(f"Phi inverse not evaluable on the tail: {exc}") from exc
    if np.any(np.isnan(logs)):
        raise InvalidArgument("Phi inverse not evaluable on the tail")
    verdict, ratios = _classify_blocks(logs)
    ev = {"log_block_integrals": logs.tolist(), "ratios": ratios.tolist()}
    if verdict == "fails":
        ev["tail_bound"] = _tail_bound(logs, ratios)
    return CriterionReport("phi-divergence", verdict, ev, {"phi": Phi.label, "delta0": delta0, "decades": n_decades},
                           model="decade-ratio")


# The five equivalent tail integrals. u = log t, w = log u.

def _eq_derivative(P: PhiFunction, w):
    u = np.exp(w)
    return P.lh(u) + np.log(P.dlh(u)) - u + w


def _eq_weighted(P: PhiFunction, w):
    u = np.exp(w)
    return P.lh(u) - u + w


def _stieltjes_blocks(P: PhiFunction, w0: float, n_blocks: int, per_block: int = 4096):
    out = np.empty(n_blocks)
    for k in range(n_blocks):
        w = w0 + LN10 * (k + np.linspace(0.0, 1.0, per_block + 1))
        u = np.exp(w)
        lhv = P.lh(u)
        d = np.diff(lhv)
        du = np.diff(u)
        # H linear in t on each step: ∫ dH/t = (dH/dt) * log(t2/t1)
        with np.errstate(divide="ignore"):
            log_dh = lhv[1:] + np.log(-np.expm1(-np.maximum(d, 0.0)))
            log_dt = u[1:] + np.log(-np.expm1(-du))
        out[k] = logsumexp(log_dh - log_dt + np.log(du))
    return out


def _trapezoid_blocks(P: PhiFunction, w0: float, n_blocks: int, per_block: int = 2048):
    """∫_0^delta H(1/t) dt with t = exp(-e^w): trapezoid rule in w."""
    out = np.empty(n_blocks)
    for k in range(n_blocks):
        w = w0 + LN10 * (k + np.linspace(0.0, 1.0, per_block + 1))
        u = np.exp(w)
        vals = P.lh(u) - u + w
        wt = np.full(w.size, LN10 / per_block)
        wt[[0, -1]] *= 0.5
        out[k] = logsumexp(vals + np.log(wt))
    return out


def _eq_inverse(P: PhiFunction, v):
    return v - P.invert_lh(v)


EQUIVALENT_FORMS = ("derivative", "stieltjes", "weighted", "reciprocal", "inverse")


def phi_equivalents(Phi: PhiFunction, n_decades: int = 8) -> CriterionReport:
    """Classify the five tail integrals built from H = log Phi.

    derivative: ∫ H'(t) dt/t; stieltjes: ∫ dH(t)/t; weighted: ∫ H(t) dt/t^2;
    reciprocal: ∫_0 H(1/t) dt; inverse: ∫ d eta / H^{-1}(eta). Each uses its
    own quadrature route. Verdict holds when all five agree.
    """
    u0 = max(math.log(Phi.t_start), 1.0)
    w0 = math.log(u0)
    v0 = float(Phi.lh(u0))
    s0 = max(v0, 0.0)
    logs = {
        "derivative": _block_logs(lambda w: _eq_derivative(Phi, w), w0, n_decades),
        "stieltjes": _stieltjes_blocks(Phi, w0, n_decades),
        "weighted": _block_logs(lambda w: _eq_weighted(Phi, w), w0, n_decades),
        "reciprocal": _trapezoid_blocks(Phi, w0, n_decades),
        "inverse": _block_logs(lambda v: _eq_inverse(Phi, v), s0, n_decades),
    }
    verdicts = {}
    ratios = {}
    for name in EQUIVALENT_FORMS:
        verdicts[name], r = _classify_blocks(logs[name])
        ratios[name] = r.tolist()
    agree = len(set(verdicts.values())) == 1 and "inconclusive" not in verdicts.values()
    label = next(iter(verdicts.values())) if agree else "inconclusive"
    verdict = "holds" if agree else "fails"
    return CriterionReport(
        "phi-equivalents", verdict,
        {"verdicts": verdicts, "ratios": ratios, "agreement": agree, "classification": label},
        {"phi": Phi.label, "decades": n_decades}, model="decade-ratio",
    )


# ---------------------------------------------------------------------------
# Mean oscillation


def _polar_nodes(n_r: int, n_theta: int):
    r = (np.arange(n_r) + 0.5) / n_r
    th = 2 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    return r, th


def _disc_stats(q, z0: complex, eps: float, spec: DomainSpec | None, n_r=192, n_theta=192):
    r, th = _polar_nodes(n_r, n_theta)
    pts = z0 + eps * (r[:, None] * np.exp(1j * th)[None, :])
    wts = np.broadcast_to(r[:, None], pts.shape).copy()
    if spec is not None:
        wts = wts * spec.contains(pts)
    total = wts.sum()
    if total <= 0:
        raise InvalidArgument("disc does not meet the domain")
    vals = np.asarray(q(pts), dtype=float)
    mean = float(np.sum(wts * vals) / total)
    dev = float(np.sum(wts * np.abs(vals - mean)) / total)
    return mean, dev


def _check_field_reach(q, z0, eps, spec=None):
    if isinstance(q, ComplexField):
        x0, x1, y0, y1 = z0.real - eps, z0.real + eps, z0.imag - eps, z0.imag + eps
        if spec is not None:
            # only the part of the disc inside D is ever sampled
            a, b, c, d = spec.bounding_box()
            x0, x1, y0, y1 = max(x0, a), min(x1, b), max(y0, c), min(y1, d)
        if not np.all(q.grid.contains(np.array([complex(x0, y0), complex(x1, y1)]))):
            raise InvalidArgument("epsilon ladder leaves the sampled field")


def _linfit(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return coef, float(r2)


def _growth_fits(eps, vals):
    """R^2 of power (log v vs log 1/eps) and log (v vs log 1/eps) growth models."""
    x = np.log(1.0 / np.asarray(eps))
    out = {}
    if np.all(vals > 0):
        out["power"] = _linfit(x, np.log(vals))
    out["log"] = _linfit(x, vals)
    return out


def _bounded_tail(vals) -> bool:
    tail = np.asarray(vals[-3:], float)
    if np.max(np.abs(tail)) <= 1e-14:
        return True
    if np.min(tail) > 0 and np.max(tail) / np.min(tail) < 2.0:
        return True
    return bool(np.all(np.diff(tail) <= 1e-12 * np.max(np.abs(tail))))


def _growth_verdict(eps, vals):
    if _bounded_tail(vals):
        return "holds", "bounded", {}
    increasing = np.all(np.diff(vals) > 0)
    fits = _growth_fits(eps, vals)
    best = max(fits, key=lambda k: fits[k][1])
    info = {k: {"coef": v[0].tolist(), "r2": v[1]} for k, v in fits.items()}
    if increasing and fits[best][1] >= MIN_R2:
        return "fails", best, info
    return "inconclusive", best, info


def _ladder(eps, minimum=6):
    eps = np.asarray(eps, dtype=float)
    if eps.size < minimum:
        raise InvalidArgument(f"the epsilon ladder needs at least {minimum} levels")
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise InvalidArgument("the epsilon ladder must be positive and strictly decreasing")
    return eps


def fmo_probe(phi, z0: complex, eps: Sequence[float], spec: DomainSpec | None = None) -> CriterionReport:
    """Finite mean oscillation at z0 from disc-mean deviations on a shrinking ladder.

    ``phi`` is a real field or a callable. Holds when the deviations stay
    bounded over the last three levels; fails on monotone growth matching a
    power or log model with R^2 >= 0.99.
    """
    eps = _ladder(eps)
    q = evaluator(phi)
    z0 = complex(z0)
    if spec is not None and not (spec.contains(np.array([z0]))[0] or spec.boundary_distance(np.array([z0]))[0] <= eps[-1]):
        raise InvalidArgument("z0 is not in the closure of the domain")
    _check_field_reach(phi, z0, eps[0], spec)
    stats = [_disc_stats(q, z0, e, spec) for e in eps]
    means = np.array([s[0] for s in stats])
    devs = np.array([s[1] for s in stats])
    verdict, model, fits = _growth_verdict(eps, devs)
    ev = {"eps": eps.tolist(), "deviation": devs.tolist(), "mean": means.tolist(), "fits": fits}
    return CriterionReport("fmo", verdict, ev, {"levels": int(eps.size)}, z0, model)


def fmo_loglog_check(phi, z0: complex, eps: Sequence[float], eps0: float, spec: DomainSpec | None = None,
                     n_s: int = 256, n_theta: int = 256) -> CriterionReport:
    """Ring integrals ∫_{eps<|z-z0|<eps0} phi / (|z - z0| log(1/|z - z0|))^2 against log log(1/eps).

    In s = log(1/|z - z0|) the weight becomes ds dtheta / s^2, integrated
    exactly by Gauss-Legendre in s and the midpoint rule in theta.
    """
    eps = _ladder(eps)
    limit = math.exp(-math.e)
    if spec is not None:
        limit = min(limit, float(spec.boundary_distance(np.array([complex(z0)]))[0]))
    if not 0 < eps0 < limit:
        raise InvalidArgument(f"eps0 must lie in (0, {limit:.6g})")
    if eps[0] >= eps0:
        raise InvalidArgument("the ladder must descend below eps0")
    q = evaluator(phi)
    z0 = complex(z0)
    _check_field_reach(phi, z0, eps0, spec)
    th = 2 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    gx, gw = leggauss(n_s)
    s_lo = math.log(1.0 / eps0)
    rings = []
    # integrate shell by shell between successive ladder levels
    bounds = np.concatenate([[s_lo], np.log(1.0 / eps)])
    acc = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        s = 0.5 * (a + b) + 0.5 * (b - a) * gx
        w = 0.5 * (b - a) * gw
        pts = z0 + np.exp(-s)[:, None] * np.exp(1j * th)[None, :]
        vals = np.asarray(q(pts), dtype=float).mean(axis=1) * 2 * math.pi
        acc += float(np.sum(w * vals / s**2))
        rings.append(acc)
    rings = np.array(rings)
    ratios = rings / np.log(np.log(1.0 / eps))
    verdict, model, fits = _growth_verdict(eps, ratios)
    ev = {"eps": eps.tolist(), "ring_integral": rings.tolist(), "ratio": ratios.tolist(), "fits": fits}
    return CriterionReport("fmo-loglog", verdict, ev, {"eps0": eps0, "levels": int(eps.size)}, z0, model)


def bmo_norm(u, spec: DomainSpec, n_discs: int = 1000, seed: int = 0, spacing: float | None = None,
             detail: bool = False):
    """Lower estimate of the BMO seminorm: the largest disc-mean absolute
    deviation over ``n_discs`` random discs contained in the domain.

    Radii are log-uniform between two grid spacings and the inradius.
    """
    if n_discs < 100:
        raise InvalidArgument("n_discs must be at least 100")
    q = evaluator(u)
    if spacing is None:
        spacing = u.grid.h if isinstance(u, ComplexField) else 2.0 / 255
    rng = np.random.default_rng(seed)
    rin = spec.inradius()
    rmin = min(2 * spacing, 0.5 * rin)
    xmin, xmax, ymin, ymax = spec.bounding_box()
    centers, radii = [], []
    while len(centers) < n_discs:
        m = 256  # fixed chunks: a run with more discs extends a run with fewer
        c = rng.uniform(xmin, xmax, m) + 1j * rng.uniform(ymin, ymax, m)
        c = c[spec.contains(c)]
        top = np.minimum(spec.boundary_distance(c), rin)
        c, top = c[top > rmin], top[top > rmin]
        # every center gets its largest fitting disc and one log-uniform smaller one
        r = np.exp(math.log(rmin) + rng.uniform(0.0, 1.0, c.size) * np.log(top / rmin))
        centers.extend(np.repeat(c, 2).tolist())
        radii.extend(np.column_stack([top, r]).ravel().tolist())
    centers = np.array(centers[:n_discs])
    radii = np.array(radii[:n_discs])
    rr, th = _polar_nodes(24, 48)
    offs = (rr[:, None] * np.exp(1j * th)[None, :]).ravel()
    wts = np.broadcast_to(rr[:, None], (rr.size, th.size)).ravel()
    wts = wts / wts.sum()
    pts = centers[:, None] + radii[:, None] * offs[None, :]
    vals = np.asarray(q(pts), dtype=float)
    means = vals @ wts
    devs = np.abs(vals - means[:, None]) @ wts
    best = float(devs.max())
    if detail:
        return best, {"seed": seed, "n_discs": n_discs, "argmax_center": complex(centers[devs.argmax()]),
                      "argmax_radius": float(radii[devs.argmax()])}
    return best


# ---------------------------------------------------------------------------
# Radial divergence


_Q_GRID = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)
_MODEL_ORDER = ("log", "loglog", "bounded", "power")


def _fit_models(eps, F):
    x = np.log(1.0 / eps)
    fits = {"log": _linfit(x, F)}
    if np.all(x > 0):
        fits["loglog"] = _linfit(np.log(x), F)
    best_b = max((_linfit(eps**q, F) + (q,) for q in _Q_GRID), key=lambda t: t[1])
    fits["bounded"] = best_b
    best_p = max((_linfit(eps**-q, F) + (q,) for q in _Q_GRID), key=lambda t: t[1])
    fits["power"] = best_p
    return fits


def radial_divergence(K, spec: DomainSpec | None, z0: complex, delta: float, n_levels: int = 12,
                      radii_per_level: int = 64) -> CriterionReport:
    """Classify growth of F(eps) = ∫_eps^delta dr / ||K||_1(z0, r) over eps = delta 2^-k.

    Models: log (F linear in log 1/eps), loglog, bounded (F = a + b eps^q)
    and power (F = a + b eps^-q). Holds (divergent) for log, loglog or power;
    fails (convergent) for bounded. For a sampled K the ladder stops at two
    grid spacings.
    """
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    z0 = complex(z0)
    eps = delta * 2.0 ** -np.arange(1, n_levels + 1)
    if isinstance(K, ComplexField):
        eps = eps[eps >= 2 * K.grid.h]
    if spec is not None:
        probe = [circle_trace(spec, z0, r, 64) for r in np.geomspace(eps[-1], delta, 8)] if eps.size else []
        if probe and all(p.is_empty for p in probe):
            raise InvalidArgument("all dashed lines around z0 are empty")
    edges = np.concatenate([[delta], eps])
    shells = []
    for hi, lo in zip(edges[:-1], edges[1:]):
        shells.append(dashed_line_bound(K, z0, lo, hi, spec, n_radii=radii_per_level))
    F = np.cumsum(shells)
    params = {"delta": delta, "levels": int(eps.size)}
    if eps.size < 4 or not np.all(np.isfinite(F)):
        return CriterionReport("radial-divergence", "inconclusive", {"eps": eps.tolist(), "F": F.tolist()}, params,
                               z0, "")
    fits = _fit_models(eps, F)
    best = max(_MODEL_ORDER, key=lambda m: (round(fits[m][1], 9) if m in fits else -1, -_MODEL_ORDER.index(m)))
    r2 = fits[best][1]
    ev = {"eps": eps.tolist(), "F": F.tolist(),
          "fits": {m: {"coef": f[0].tolist(), "r2": f[1], **({"q": f[2]} if len(f) > 2 else {})} for m, f in fits.items()},
          "slope": float(fits[best][0][1])}
    if r2 < MIN_R2:
        verdict = "inconclusive"
    else:
        verdict = "fails" if best == "bounded" else "holds"
    ev["label"] = {"holds": "divergent", "fails": "convergent", "inconclusive": "unclassified"}[verdict]
    return CriterionReport("radial-divergence", verdict, ev, params, z0, best)


# ---------------------------------------------------------------------------
# Aggregation


def _phi_integral(Phi: PhiFunction, K: ComplexField, spec: DomainSpec) -> float:
    inside = spec.contains(K.grid.z) & K.mask
    with np.errstate(over="ignore"):
        vals = np.asarray(Phi.phi(np.real(K.values[inside])), dtype=float)
    return float(np.sum(vals) * K.grid.cell_area)


def theorem_applicability(mu: ComplexField, spec: DomainSpec, points: Sequence[complex], Phi: PhiFunction | None = None,
                          delta: float | None = None, alpha: float = 1.0, n_levels: int = 12) -> CriterionReport:
    """Which existence hypotheses hold numerically for the dilatation of ``mu``.

    Runs fmo_probe and radial_divergence for K_mu at every sample point, and
    checks the integral constraint ∫ Phi(K_mu) < inf together with the
    divergence of Phi (default Phi(t) = exp(alpha t)).
    """
    K = dilatation(mu)
    Kr = K.with_values(np.real(K.values), spec.contains(K.grid.z))
    Phi = Phi or exp_phi(alpha)
    if delta is None:
        xmin, xmax, ymin, ymax = spec.bounding_box()
        delta = 0.25 * min(xmax - xmin, ymax - ymin)
    h = K.grid.h
    per_point = []
    flags = {}
    for z0 in points:
        z0 = complex(z0)
        ladder = delta * 2.0 ** -np.arange(n_levels)
        ladder = ladder[ladder >= 2 * h]
        if ladder.size >= 6:
            fmo = fmo_probe(Kr, z0, ladder, spec)
        else:
            fmo = CriterionReport("fmo", "inconclusive", {"reason": "grid too coarse for the ladder"}, {}, z0)
        rad = radial_divergence(Kr, spec, z0, delta, n_levels)
        per_point.append((fmo, rad))
        key = f"{z0.real:.6g}{z0.imag:+.6g}j"
        flags[key] = {"fmo": fmo.verdict, "radial": rad.verdict, "radial_model": rad.model}
    phi_rep = phi_divergence(Phi, max(Phi.phi0, 1.0) + 1.0)
    integral = _phi_integral(Phi, Kr, spec)
    hyp = {
        "fmo": all(f.holds for f, _ in per_point),
        "radial-divergence": all(r.holds for _, r in per_point),
        "phi-condition": phi_rep.holds and math.isfinite(integral),
    }
    unverified = sorted(k for k, (f, r) in zip(flags, per_point) if not r.holds)
    verdict = "holds" if any(hyp.values()) else "fails"
    ev = {"hypotheses": hyp, "points": flags, "phi_integral": integral, "phi_divergence": phi_rep.verdict,
          "radial_unverified_at": unverified}
    return CriterionReport("theorem-applicability", verdict, ev, {"phi": Phi.label, "delta": delta}, None,
                           ",".join(k for k, v in hyp.items() if v))
