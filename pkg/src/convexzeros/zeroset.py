"""Sampled zero sets of chi_hat and the translated intersections X(eta, B).

Roots are located along rays t -> chi_hat(t u): a scan with step at most a
quarter of the model half-period 1/(2 P(u)) brackets every simple root, and
each bracket is shrunk below ``xtol`` by a bracketing refinement (ITP: a
bisection with interpolation steps, never slower than plain bisection).
"""

from dataclasses import dataclass, field
import csv
import logging
import math

import numpy as np

from . import geometry
from .errors import DomainError, ResolutionError
from .transform import RayFunction, best_evaluator

log = logging.getLogger(__name__)

ROOT_XTOL = 1e-10
ETA_RANGE = (0.5, 2.0)


def refine_brackets(f, a, b, fa, fb, xtol=ROOT_XTOL, max_iter=200):
    """Shrink sign-change brackets [a, b] until b - a <= xtol.

    ``f`` maps an array of abscissae (one per bracket, in bracket order) to
    function values. All arrays are refined together; returns the final
    ``(a, b, fa, fb)``. Uses the ITP rule (interpolate, truncate, project),
    whose worst case matches bisection.
    """
    a, b = np.array(a, dtype=float), np.array(b, dtype=float)
    fa, fb = np.array(fa, dtype=float), np.array(fb, dtype=float)
    if np.any(fa * fb > 0):
        raise DomainError("refine_brackets needs a sign change in every bracket")
    eps = 0.5 * xtol
    width0 = np.maximum(b - a, eps)
    n_max = np.ceil(np.log2(width0 / (2 * eps))).clip(min=0) + 1
    k1 = 0.2 / width0
    done = (b - a <= xtol) | (fa == 0) | (fb == 0)
    # collapse brackets that already hit an exact zero
    a = np.where(fb == 0, b, a)
    b = np.where(fa == 0, a, b)
    for j in range(max_iter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        aa, bb, ga, gb = a[act], b[act], fa[act], fb[act]
        xh = 0.5 * (aa + bb)
        r = eps * 2.0 ** (n_max[act] - j) - 0.5 * (bb - aa)
        delta = k1[act] * (bb - aa) ** 2
        xf = (bb * ga - aa * gb) / (ga - gb)
        sigma = np.sign(xh - xf)
        xt = np.where(delta <= np.abs(xh - xf), xf + sigma * delta, xh)
        x = np.where(np.abs(xt - xh) <= r, xt, xh - sigma * r)
        x = np.clip(x, np.minimum(aa, bb), np.maximum(aa, bb))
        y = np.asarray(f(x, act), dtype=float)
        left = y * ga > 0
        right = y * gb > 0
        zero = ~(left | right)
        a[act] = np.where(left | zero, x, aa)
        fa[act] = np.where(left, y, np.where(zero, 0.0, ga))
        b[act] = np.where(right | zero, x, bb)
        fb[act] = np.where(right, y, np.where(zero, 0.0, gb))
        done[act] = (np.abs(b[act] - a[act]) <= xtol) | zero
    return a, b, fa, fb


@dataclass(frozen=True)
class ZeroSample:
    """One point of the zero set found as a radial root."""

    direction: tuple
    radius: float
    residual: float
    shell: int

    @property
    def point(self):
        return self.radius * np.asarray(self.direction)


@dataclass
class ZeroSet:
    """Column store of zero samples, with their certified brackets."""

    directions: np.ndarray
    radii: np.ndarray
    residuals: np.ndarray
    shells: np.ndarray
    rays: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    f_lo: np.ndarray
    f_hi: np.ndarray
    grazing: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, dim):
        z = np.zeros(0)
        return cls(np.zeros((0, dim)), z, z, z.astype(int), z.astype(int), z, z, z, z)

    @classmethod
    def concat(cls, parts, dim):
        if not parts:
            return cls.empty(dim)
        cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
        return cls(
            cat("directions"), cat("radii"), cat("residuals"), cat("shells"), cat("rays"),
            cat("lo"), cat("hi"), cat("f_lo"), cat("f_hi"), sum(p.grazing for p in parts),
        )

    def __len__(self):
        return len(self.radii)

    def __getitem__(self, i):
        return ZeroSample(tuple(self.directions[i]), float(self.radii[i]), float(self.residuals[i]), int(self.shells[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def points(self):
        return self.radii[:, None] * self.directions

    def subset(self, mask):
        out = ZeroSet(*(getattr(self, k)[mask] for k in
                        ("directions", "radii", "residuals", "shells", "rays", "lo", "hi", "f_lo", "f_hi")),
                      grazing=self.grazing, meta=dict(self.meta))
        return out

    def to_csv(self, path):
        d = self.directions.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"u{k + 1}" for k in range(d)] + ["r", "residual", "shell", "ray"])
            for u, r, res, k, ray in zip(self.directions, self.radii, self.residuals, self.shells, self.rays):
                w.writerow([f"{x:.17g}" for x in u] + [f"{r:.17g}", f"{res:.6e}", int(k), int(ray)])


def scan_step(body, u):
    """Largest admissible scan step along u: a quarter of the half-period."""
    return 1.0 / (8.0 * float(geometry.support(body, u)))


def _ray_roots(body, u, r_min, r_max, evaluator, step=None, xtol=ROOT_XTOL):
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    limit = scan_step(body, u)
    if step is None:
        step = limit
    elif step > limit * (1 + 1e-12):
        raise ResolutionError(f"scan step {step:.4g} exceeds 1/(8 P(u)) = {limit:.4g}")
    n = int(math.ceil((r_max - r_min) / step)) + 1
    t = np.linspace(r_min, r_max, max(n, 2))
    ray = evaluator.ray(u, r_max) if hasattr(evaluator, "ray") else RayFunction(evaluator, u)
    f = np.asarray(ray.grid(t), dtype=float)
    exact = np.flatnonzero(f == 0)
    brk = np.flatnonzero(f[:-1] * f[1:] < 0)
    # near-zero grid values without a sign change: tangential zeros the scan cannot bracket
    scale = np.max(np.abs(f)) if f.size else 0.0
    tiny = np.abs(f) <= 1e-9 * scale
    interior = np.zeros_like(tiny)
    interior[1:-1] = tiny[1:-1] & (f[:-2] * f[2:] > 0) & (f[1:-1] != 0)
    grazing = int(np.count_nonzero(interior))
    if grazing:
        log.warning("%d possible tangential zeros along ray %s were not bracketed", grazing, np.round(u, 6))
    local = ray.local(brk) if brk.size else None
    g = local if local is not None else (lambda x, idx: ray(x))
    a, b, fa, fb = refine_brackets(g, t[brk], t[brk + 1], f[brk], f[brk + 1], xtol)
    mid = 0.5 * (a + b)
    res = np.abs(g(mid, np.arange(mid.size))) if mid.size else np.zeros(0)
    lo = np.concatenate([a, t[exact]])
    hi = np.concatenate([b, t[exact]])
    f_lo = np.concatenate([fa, f[exact]])
    f_hi = np.concatenate([fb, f[exact]])
    residuals = np.concatenate([res, np.zeros(exact.size)])
    order = np.argsort(lo)
    lo, hi, f_lo, f_hi, residuals = lo[order], hi[order], f_lo[order], f_hi[order], residuals[order]
    radii = 0.5 * (lo + hi)
    return radii, residuals, lo, hi, f_lo, f_hi, grazing


def radial_zeros(body, u, r_min, r_max, evaluator=None, step=None, xtol=ROOT_XTOL):
    """Roots of r -> chi_hat(r u) in [r_min, r_max], sorted by radius."""
    if not 0 < r_min < r_max:
        raise DomainError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    evaluator = evaluator or best_evaluator(body)
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    radii, residuals, *_ = _ray_roots(body, u, r_min, r_max, evaluator, step, xtol)
    return [ZeroSample(tuple(u), float(r), float(res), k) for k, (r, res) in enumerate(zip(radii, residuals))]


def _orthonormal_frame(axis):
    axis = np.asarray(axis, dtype=float)
    d = axis.size
    basis = np.linalg.qr(np.column_stack([axis, np.eye(d)]))[0]
    if basis[:, 0] @ axis < 0:
        basis = -basis
    return basis[:, 1:]


def cap_directions(axis, half_angle, spacing):
    """Quasi-uniform unit vectors within ``half_angle`` of ``axis``.

    d=2: equally spaced angles. d=3: rings of constant polar angle.
    Neighbouring directions are at most ``spacing`` radians apart.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    if axis.size == 2:
        n = max(2, int(math.ceil(2 * half_angle / spacing)) + 1)
        ang = np.linspace(-half_angle, half_angle, n)
        perp = np.array([-axis[1], axis[0]])
        return np.cos(ang)[:, None] * axis + np.sin(ang)[:, None] * perp
    if axis.size != 3:
        raise DomainError("direction caps are implemented for d = 2, 3")
    e1, e2 = _orthonormal_frame(axis).T
    n_rings = int(math.ceil(half_angle / spacing))
    dirs = [axis]
    for i in range(1, n_rings + 1):
        gamma = half_angle * i / n_rings
        m = max(1, int(math.ceil(2 * math.pi * math.sin(gamma) / spacing)))
        phi = 2 * math.pi * (np.arange(m) + 0.5 * (i % 2)) / m
        ring = (math.cos(gamma) * axis
                + math.sin(gamma) * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2))
        dirs.append(ring)
    return np.vstack([np.atleast_2d(d) for d in dirs])


def _cap_spacing(dim, half_angle, n_dirs):
    if dim == 2:
        return 2 * half_angle / max(n_dirs - 1, 1)
    # rings: about pi (half_angle / h)^2 directions
    return half_angle * math.sqrt(math.pi / max(n_dirs, 1))


def _ray_interval(u, center, radius):
    uc = u @ center
    disc = uc * uc - center @ center + radius * radius
    if disc < 0:
        return None
    root = math.sqrt(disc)
    return max(uc - root, 1e-9), uc + root


def shell_index(body, cone, B, n_dirs=None, evaluator=None, c=0.5, xtol=ROOT_XTOL):
    """Zero samples of chi_hat inside the ball B, on a direction grid over B.

    The directions cover the cap of rays meeting B with angular spacing at
    most ``c / R``; ``n_dirs`` overrides the count and is validated.
    """
    evaluator = evaluator or best_evaluator(body)
    center = np.asarray(B.center, dtype=float)
    dist = np.linalg.norm(center)
    if dist <= B.radius:
        raise DomainError("the ball B must not contain the origin")
    axis = center / dist
    beta = math.asin(B.radius / dist)
    if float(cone.angle(center)) + beta > cone.half_angle + 1e-12:
        raise DomainError("the ball B is not contained in the normal cone")
    limit = c / B.radius
    if n_dirs is None:
        spacing = limit
    else:
        spacing = _cap_spacing(body.dim, beta, n_dirs)
        if spacing > limit * (1 + 1e-12):
            raise ResolutionError(f"{n_dirs} directions give spacing {spacing:.3g} > c/R = {limit:.3g}")
    dirs = cap_directions(axis, beta, spacing)
    parts = []
    for k, u in enumerate(dirs):
        span = _ray_interval(u, center, B.radius)
        if span is None or span[1] - span[0] <= 0:
            continue
        radii, res, lo, hi, flo, fhi, grazing = _ray_roots(body, u, span[0], span[1], evaluator, xtol=xtol)
        m = radii.size
        parts.append(ZeroSet(np.repeat(u[None, :], m, 0), radii, res, np.arange(m), np.full(m, k),
                             lo, hi, flo, fhi, grazing))
    zs = ZeroSet.concat(parts, body.dim)
    inside = B.contains(zs.points) if len(zs) else np.zeros(0, dtype=bool)
    zs = zs.subset(inside)
    zs.meta = {
        "ball_center": list(B.center), "ball_radius": B.radius, "cone_axis": list(cone.axis),
        "cone_half_angle": cone.half_angle, "n_dirs": len(dirs), "angular_spacing": spacing,
        "c_angle": c, "method": evaluator.method, "resolution": evaluator.resolution,
    }
    return zs


@dataclass(frozen=True)
class ZeroDistance:
    distance: float
    found: bool


def _zero_atol(body):
    return 1e-13 * body.volume


def zero_distances(body, points, evaluator=None, xtol=ROOT_XTOL):
    """Vectorized :func:`zero_distance`; returns (distances, found) arrays."""
    evaluator = evaluator or best_evaluator(body)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    t0 = np.linalg.norm(pts, axis=-1)
    if np.any(t0 == 0):
        raise DomainError("zero_distance needs xi != 0")
    u = pts / t0[:, None]
    P = np.asarray(geometry.support(body, u))
    width = 1.0 / P
    # 9 points over one model period: spacing 1/(8P)
    offs = np.linspace(-0.5, 0.5, 9)
    T = t0[:, None] + offs[None, :] * width[:, None]
    F = np.asarray(evaluator((T[..., None] * u[:, None, :]).reshape(-1, body.dim))).reshape(T.shape)
    center = F[:, 4]
    dist = np.full(len(pts), np.inf)
    dist[np.abs(center) <= _zero_atol(body)] = 0.0
    exact = F == 0
    if np.any(exact):
        dist = np.minimum(dist, np.where(exact, np.abs(T - t0[:, None]), np.inf).min(axis=1))
    rows, cols = np.nonzero(F[:, :-1] * F[:, 1:] < 0)
    if rows.size:
        a, b, *_ = refine_brackets(
            lambda x, idx: evaluator(x[:, None] * u[rows[idx]]),
            T[rows, cols], T[rows, cols + 1], F[rows, cols], F[rows, cols + 1], xtol,
        )
        cand = np.abs(0.5 * (a + b) - t0[rows])
        np.minimum.at(dist, rows, cand)
    found = np.isfinite(dist)
    dist = np.where(found, dist, width)
    return dist, found


def zero_distance(body, xi, evaluator=None):
    """Distance along the ray through xi to the nearest root of chi_hat.

    The search covers one model period 1/P(u) centred at |xi|. Without a
    root in the window the window width is returned with ``found=False``.
    """
    dist, found = zero_distances(body, np.asarray(xi, dtype=float)[None, :], evaluator)
    return ZeroDistance(float(dist[0]), bool(found[0]))


@dataclass(frozen=True)
class XSample:
    base: ZeroSample
    delta_plus: float
    eta: tuple


@dataclass
class XSet:
    """Samples of X(eta, B): zeros xi in B with xi + eta within tol of a zero."""

    zeros: ZeroSet
    delta_plus: np.ndarray
    eta: tuple
    tol: float
    candidates: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.zeros)

    def __getitem__(self, i):
        return XSample(self.zeros[i], float(self.delta_plus[i]), self.eta)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def points(self):
        return self.zeros.points

    def to_csv(self, path):
        z = self.zeros
        d = z.directions.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"u{k + 1}" for k in range(d)] + ["r", "residual", "delta_plus"])
            for u, r, res, dp in zip(z.directions, z.radii, z.residuals, self.delta_plus):
                w.writerow([f"{x:.17g}" for x in u] + [f"{r:.17g}", f"{res:.6e}", f"{dp:.6e}"])


def check_eta(eta):
    eta = np.asarray(eta, dtype=float)
    norm = float(np.linalg.norm(eta))
    lo, hi = ETA_RANGE
    if not lo <= norm <= hi:
        raise DomainError(f"|eta| = {norm:.4g} outside [{lo}, {hi}]")
    return eta


def x_set(body, eta, B, tol=None, n_dirs=None, evaluator=None, c=0.5, c_delta=1.0, cone=None, zeros=None):
    """Sampled X(eta, B) = Z cap B cap (Z - eta) cap (B - eta), thickened by tol.

    ``zeros`` may carry precomputed :func:`shell_index` output for B, which
    is then reused across many eta. ``tol`` defaults to ``c_delta / R``.
    """
    eta = check_eta(eta)
    if eta.size != body.dim:
        raise DomainError(f"eta must have dimension {body.dim}")
    evaluator = evaluator or best_evaluator(body)
    if tol is None:
        tol = c_delta / B.radius
    if not tol > 0:
        raise DomainError("tol must be positive")
    if zeros is None:
        if cone is None:
            raise DomainError("x_set needs either precomputed zeros or a cone")
        zeros = shell_index(body, cone, B, n_dirs, evaluator, c)
    shifted = zeros.points + eta
    cand = np.flatnonzero(B.contains(shifted)) if len(zeros) else np.zeros(0, dtype=int)
    q = shifted[cand]
    keep = np.zeros(len(cand), dtype=bool)
    if len(cand):
        t0 = np.linalg.norm(q, axis=-1)
        u = q / t0[:, None]
        P = np.asarray(geometry.support(body, u))
        if np.all(tol < 0.25 / P):
            # at most one simple root can lie within tol: a sign test decides
            # a zero of odd order inside the window changes the sign across it
            f_lo = np.asarray(evaluator((t0 - tol)[:, None] * u))
            f_hi = np.asarray(evaluator((t0 + tol)[:, None] * u))
            keep = f_lo * f_hi <= 0
        else:
            keep = np.ones(len(cand), dtype=bool)
    idx = cand[keep]
    dplus = np.zeros(0)
    if idx.size:
        dplus, found = zero_distances(body, shifted[idx], evaluator)
        ok = found & (dplus <= tol * (1 + 1e-9))
        idx, dplus = idx[ok], dplus[ok]
    mask = np.zeros(len(zeros), dtype=bool)
    mask[idx] = True
    order = np.argsort(idx)
    sub = zeros.subset(mask)
    xs = XSet(sub, dplus[order], tuple(float(e) for e in eta), float(tol), candidates=len(cand))
    xs.meta = dict(zeros.meta, tol=float(tol), c_delta=float(tol * B.radius), eta=list(xs.eta))
    return xs
