"""Fourier transform of the indicator function of a symmetric convex body.

Convention: chi_hat(xi) = integral over the body of exp(-2 pi i x.xi) dx.
For a body symmetric about the origin this is real. Four independent routes
are provided:

* ``closed``: sinc products (cube) and Bessel functions (ball, ellipsoid);
* ``quadrature``: volume integral, used as a low-frequency oracle;
* ``herz``: boundary integral of the normal component of xi/|xi|;
* ``model``: leading stationary-phase term.

The boundary form used here is

    chi_hat(xi) = (2 pi i |xi|)^{-1} int_{boundary} exp(2 pi i x.xi) (xi/|xi| . n) dsigma,

which is the divergence theorem applied to exp(-2 pi i x.xi) and then the
symmetry x -> -x.
"""

from dataclasses import dataclass, field
import csv
from functools import lru_cache
import math

import numpy as np
from scipy.special import gamma, jv

from . import geometry
from .errors import (
    ConeViolationError,
    DegenerateCurvatureError,
    DomainError,
    MethodUnavailableError,
    ResolutionError,
)

METHODS = ("closed", "quadrature", "herz", "model")
QUADRATURE_MIN_N = 32
HERZ_MIN_N = 16

# Keeps (points x nodes) work arrays around 32 MB.
_CHUNK_ELEMENTS = 2_000_000


def _vectors(body, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != body.dim:
        raise DomainError(f"expected vectors of dimension {body.dim}, got shape {xi.shape}")
    return xi


def _scalar_or_array(out, xi):
    return float(out) if np.ndim(xi) == 1 else out


def sinpi(x):
    """sin(pi x) with exact zeros at the integers."""
    x = np.asarray(x, dtype=float)
    n = np.round(x)
    r = x - n
    sign = 1.0 - 2.0 * np.mod(n, 2.0)
    return sign * np.sin(np.pi * r)


def _sinc_factor(h, x):
    # integral_{-h}^{h} cos(2 pi t x) dt = sin(2 pi h x) / (pi x), equal to 2h at x = 0
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0, 1.0, x)
    return np.where(x == 0, 2.0 * h, sinpi(2.0 * h * x) / (np.pi * safe))


# ---------------------------------------------------------------------------
# closed form


def bessel_j_scaled(nu, z):
    """J_nu(z) / (z/2)^nu, continuous at z = 0 where it equals 1/Gamma(nu + 1)."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    out = jv(nu, zs) / (0.5 * zs) ** nu
    # two series terms; the next one is below 1e-14 relative for |z| < 1e-3
    series = 1.0 / gamma(nu + 1.0) - 0.25 * z * z / gamma(nu + 2.0)
    return np.where(small, series, out)


def _ball_closed(radius, dim, xi):
    rho = np.linalg.norm(xi, axis=-1)
    z = 2.0 * np.pi * radius * rho
    return radius**dim * np.pi ** (dim / 2) * bessel_j_scaled(dim / 2, z)


def chi_hat_closed(body, xi):
    """Exact transform for the bodies with a known formula (not the rounded square)."""
    xi = _vectors(body, xi)
    if body.kind == "cube":
        out = np.prod(_sinc_factor(body.half_side, xi), axis=-1)
    elif body.kind == "ball":
        out = _ball_closed(body.radius, body.dim, xi)
    elif body.kind == "ellipsoid":
        axes = np.asarray(body.axes)
        out = float(np.prod(axes)) * _ball_closed(1.0, body.dim, xi * axes)
    else:
        raise MethodUnavailableError(f"no closed form for {body.label}")
    return _scalar_or_array(out, xi)


# ---------------------------------------------------------------------------
# volume quadrature


def _radial_moment(m, L, k):
    """integral_0^L t^(m-1) cos(k t) dt for m in {2, 3}."""
    L = np.asarray(L, dtype=float)
    k = np.asarray(k, dtype=float)
    kL = k * L
    small = np.abs(kL) < 1.0
    out = np.empty(np.broadcast(L, k).shape)
    # series: sum_j (-1)^j k^(2j) L^(2j+m) / ((2j)! (2j+m))
    Ls, ks = np.broadcast_to(L, out.shape)[small], np.broadcast_to(k, out.shape)[small]
    w = -(ks * Ls) ** 2
    term = np.ones_like(Ls)
    total = np.zeros_like(Ls)
    for j in range(14):
        if j:
            term = term * w / ((2 * j - 1) * (2 * j))
        total = total + term / (2 * j + m)
    out[small] = total * Ls**m
    Lb, kb = np.broadcast_to(L, out.shape)[~small], np.broadcast_to(k, out.shape)[~small]
    s, c = np.sin(kb * Lb), np.cos(kb * Lb)
    if m == 2:
        out[~small] = Lb * s / kb + (c - 1.0) / kb**2
    elif m == 3:
        out[~small] = Lb * Lb * s / kb + 2.0 * Lb * c / kb**2 - 2.0 * s / kb**3
    else:
        raise ValueError(m)
    return out


def _gauss_legendre(n, a, b):
    g, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (g + 1.0), w * half


def _polar_angle_nodes(body, n):
    """Angular quadrature nodes for the planar polar integral."""
    if geometry.has_flat_faces(body):
        # the radial function is smooth between these breakpoints
        s, a = body.half_side, body.half_side - body.rho
        base = [math.atan2(a, s), math.atan2(s, a)]
        breaks = sorted({b + q * math.pi / 2 for q in range(4) for b in base} | {2 * math.pi})
        breaks = [0.0] + [b for b in breaks if b > 0]
        per = max(n // 8, 16)
        th, w = zip(*(_gauss_legendre(per, lo, hi) for lo, hi in zip(breaks[:-1], breaks[1:])))
        return np.concatenate(th), np.concatenate(w)
    th = 2.0 * np.pi * np.arange(n) / n
    return th, np.full(n, 2.0 * np.pi / n)


def chi_hat_quadrature(body, xi, n=256):
    """Volume quadrature of the defining integral (real part).

    Cubes use a tensor Gauss-Legendre rule over the box. The other kinds use
    polar (d=2) or spherical (d=3) coordinates with the radial integral done
    exactly up to the radial function of the body, and an angular rule with
    ``n`` nodes per angular parameter. Intended for |xi| <= 10.
    """
    xi = _vectors(body, xi)
    d = body.dim
    if d > 3:
        raise MethodUnavailableError("volume quadrature is only available for d <= 3")
    if n < QUADRATURE_MIN_N:
        raise ResolutionError(f"quadrature needs n >= {QUADRATURE_MIN_N}, got {n}")
    pts = np.atleast_2d(xi)
    if body.kind == "cube":
        x, w = _gauss_legendre(n, -body.half_side, body.half_side)
        # The tensor sum over the box factorizes coordinate by coordinate.
        sums = np.exp(-2j * np.pi * pts[..., None] * x) @ w
        out = np.real(np.prod(sums, axis=-1))
    elif d == 2:
        th, w = _polar_angle_nodes(body, n)
        u = np.stack([np.cos(th), np.sin(th)], axis=-1)
        L = np.asarray(geometry.radial_function(body, u))
        out = np.empty(len(pts))
        for i, p in enumerate(pts):
            out[i] = _radial_moment(2, L, 2.0 * np.pi * (u @ p)) @ w
    else:
        if body.kind not in ("ball", "ellipsoid"):
            raise MethodUnavailableError(f"no d=3 quadrature for {body.label}")
        z, wz = _gauss_legendre(n, -1.0, 1.0)
        psi = 2.0 * np.pi * np.arange(2 * n) / (2 * n)
        sz = np.sqrt(1.0 - z * z)
        u = np.stack(
            [np.outer(sz, np.cos(psi)), np.outer(sz, np.sin(psi)), np.repeat(z[:, None], 2 * n, 1)],
            axis=-1,
        ).reshape(-1, 3)
        w = np.outer(wz, np.full(2 * n, np.pi / n)).ravel()
        L = np.asarray(geometry.radial_function(body, u))
        out = np.empty(len(pts))
        for i, p in enumerate(pts):
            out[i] = _radial_moment(3, L, 2.0 * np.pi * (u @ p)) @ w
    return float(out[0]) if xi.ndim == 1 else out.reshape(xi.shape[:-1])


# ---------------------------------------------------------------------------
# boundary integrals


def boundary_nodes(body, n):
    """Quadrature nodes on the boundary.

    Returns ``(X, W)`` with X of shape (m, d) and W the outward normal times
    the surface-measure weight, so that sum f(X) (W . v) approximates
    integral f(x) (n(x) . v) dsigma(x).
    """
    d = body.dim
    if body.kind in ("ball", "ellipsoid") or (body.kind == "rounded-square" and not geometry.has_flat_faces(body)):
        if body.kind == "ball":
            axes = np.full(d, body.radius)
        elif body.kind == "ellipsoid":
            axes = np.asarray(body.axes)
        else:
            axes = np.full(2, body.half_side)
        if d == 2:
            th = 2.0 * np.pi * np.arange(n) / n
            c, s = np.cos(th), np.sin(th)
            X = np.stack([axes[0] * c, axes[1] * s], axis=-1)
            W = np.stack([axes[1] * c, axes[0] * s], axis=-1) * (2.0 * np.pi / n)
            return X, W
        if d == 3:
            z, wz = _gauss_legendre(max(n // 2, 8), -1.0, 1.0)
            psi = 2.0 * np.pi * np.arange(n) / n
            sz = np.sqrt(1.0 - z * z)
            u = np.stack(
                [np.outer(sz, np.cos(psi)), np.outer(sz, np.sin(psi)), np.repeat(z[:, None], n, 1)],
                axis=-1,
            ).reshape(-1, 3)
            w = np.outer(wz, np.full(n, 2.0 * np.pi / n)).ravel()
            # a linear image of the sphere: n dsigma = det(A) A^{-T} u dS
            X = u * axes
            W = (u / axes) * float(np.prod(axes)) * w[:, None]
            return X, W
        raise MethodUnavailableError("boundary quadrature is only available for d <= 3")
    if body.kind == "cube":
        s = body.half_side
        if d == 2:
            g, w = _gauss_legendre(max(n // 4, 8), -s, s)
            Xs, Ws = [], []
            for axis in range(2):
                for sign in (1.0, -1.0):
                    X = np.empty((len(g), 2))
                    X[:, axis] = sign * s
                    X[:, 1 - axis] = g
                    W = np.zeros((len(g), 2))
                    W[:, axis] = sign * w
                    Xs.append(X)
                    Ws.append(W)
            return np.concatenate(Xs), np.concatenate(Ws)
        if d == 3:
            g, w = _gauss_legendre(max(n // 4, 8), -s, s)
            G1, G2 = np.meshgrid(g, g, indexing="ij")
            ww = np.outer(w, w).ravel()
            Xs, Ws = [], []
            for axis in range(3):
                others = [k for k in range(3) if k != axis]
                for sign in (1.0, -1.0):
                    X = np.empty((ww.size, 3))
                    X[:, axis] = sign * s
                    X[:, others[0]] = G1.ravel()
                    X[:, others[1]] = G2.ravel()
                    W = np.zeros((ww.size, 3))
                    W[:, axis] = sign * ww
                    Xs.append(X)
                    Ws.append(W)
            return np.concatenate(Xs), np.concatenate(Ws)
        raise MethodUnavailableError("boundary quadrature is only available for d <= 3")
    # rounded square: four flat edges and four quarter-circle arcs
    s, r = body.half_side, body.rho
    a = s - r
    m = max(n // 8, 8)
    g, w = _gauss_legendre(m, -a, a)
    th, wt = _gauss_legendre(m, 0.0, np.pi / 2)
    Xs, Ws = [], []
    for axis in range(2):
        for sign in (1.0, -1.0):
            X = np.empty((m, 2))
            X[:, axis] = sign * s
            X[:, 1 - axis] = g
            W = np.zeros((m, 2))
            W[:, axis] = sign * w
            Xs.append(X)
            Ws.append(W)
    for q, corner in enumerate(((a, a), (-a, a), (-a, -a), (a, -a))):
        ang = th + q * np.pi / 2
        nrm = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        Xs.append(np.asarray(corner) + r * nrm)
        Ws.append(nrm * (r * wt)[:, None])
    return np.concatenate(Xs), np.concatenate(Ws)


def herz_required_nodes(body, xi_norm):
    """Smallest resolution accepted by :func:`herz_boundary` at frequency |xi|."""
    return max(HERZ_MIN_N, int(math.ceil(2.0 * math.pi * body.circumradius * xi_norm)))


def _boundary_sum(X, W, pts, weights=None):
    """sum_j exp(2 pi i X_j . xi) (W_j . xi/|xi|) for each xi in pts."""
    norms = np.linalg.norm(pts, axis=-1)
    out = np.empty(len(pts), dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // max(len(X), 1))
    Wq = W if weights is None else W * weights[:, None]
    for i in range(0, len(pts), chunk):
        p = pts[i : i + chunk]
        phase = np.exp(2j * np.pi * (p @ X.T))
        normal = (p @ Wq.T) / norms[i : i + chunk, None]
        out[i : i + chunk] = np.sum(phase * normal, axis=-1)
    return out


def herz_boundary_complex(body, xi, n):
    """Complex value of the boundary formula (imaginary part is round-off)."""
    xi = _vectors(body, xi)
    pts = np.atleast_2d(xi)
    norms = np.linalg.norm(pts, axis=-1)
    if np.any(norms == 0):
        raise DomainError("the boundary formula is singular at xi = 0")
    need = herz_required_nodes(body, float(np.max(norms)))
    if n < need:
        raise ResolutionError(f"herz resolution n={n} too coarse for |xi|={np.max(norms):.4g}; need n >= {need}")
    X, W = boundary_nodes(body, n)
    out = _boundary_sum(X, W, pts) / (2j * np.pi * norms)
    return complex(out[0]) if xi.ndim == 1 else out.reshape(xi.shape[:-1])


def herz_boundary(body, xi, n=2048):
    """Transform via the boundary integral, by composite boundary quadrature."""
    out = herz_boundary_complex(body, xi, n)
    return float(np.real(out)) if np.ndim(out) == 0 else np.real(out)


def arc_nodes(body, xi_norm):
    """Gauss-Legendre nodes per corner arc that resolve frequency |xi|."""
    return 32 + int(math.ceil(3.0 * body.rho * float(xi_norm)))


def rounded_square_transform(body, xi, nodes=None):
    """Fast boundary-integral evaluation for the rounded square.

    Flat edges are integrated exactly, the two independent corner arcs with
    Gauss-Legendre; symmetry halves the boundary. ``nodes`` is the number of
    nodes per arc; by default it grows with |xi| as 32 + 3 rho |xi|.
    """
    if body.kind != "rounded-square":
        raise MethodUnavailableError("rounded_square_transform needs a rounded-square body")
    xi = _vectors(body, xi)
    pts = np.atleast_2d(xi).reshape(-1, 2)
    norms = np.linalg.norm(pts, axis=-1)
    if np.any(norms == 0):
        raise DomainError("the boundary formula is singular at xi = 0")
    s, r = body.half_side, body.rho
    a = s - r
    out = np.empty(len(pts))
    order = np.argsort(norms)
    # group by |xi| so each group gets an adequate node count
    for idx in np.array_split(order, max(1, int(np.ceil(len(order) / 4096)))):
        if idx.size == 0:
            continue
        p = pts[idx]
        m = nodes if nodes is not None else arc_nodes(body, norms[idx].max())
        x1, x2 = p[:, 0], p[:, 1]
        total = x1 * np.sin(2 * np.pi * s * x1) * _sinc_factor(a, x2)
        total = total + x2 * np.sin(2 * np.pi * s * x2) * _sinc_factor(a, x1)
        th, w = _gauss_legendre(m, 0.0, np.pi / 2)
        for corner, offset in (((a, a), 0.0), ((-a, a), np.pi / 2)):
            ang = th + offset
            nrm = np.stack([np.cos(ang), np.sin(ang)])
            dot = p @ nrm
            ph = 2 * np.pi * ((p @ np.asarray(corner))[:, None] + r * dot)
            total = total + (np.sin(ph) * dot) @ (r * w)
        out[idx] = total / (np.pi * norms[idx] ** 2)
    return float(out[0]) if xi.ndim == 1 else out.reshape(xi.shape[:-1])


# ---------------------------------------------------------------------------
# restriction to a ray


class RayFunction:
    """t -> chi_hat(t u) for a fixed unit vector u, by pointwise evaluation."""

    def __init__(self, evaluator, u):
        self.evaluator = evaluator
        self.u = np.asarray(u, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.evaluator(t[..., None] * self.u), dtype=float)

    def grid(self, t):
        """Values on an increasing, uniformly spaced grid ``t``."""
        return self(t)

    def local(self, rows):
        """Exact local expansions at grid points ``rows`` of the last grid, if available."""
        return None


class RoundedSquareRay(RayFunction):
    """Rounded-square transform along a ray as a sum of exponentials.

    With xi = t u the boundary formula reads

        pi t^2 chi_hat(t u) = Re sum_j g_j exp(i w_j t) + t Re sum_k c_k exp(i v_k t),

    the first sum from the flat edges, the second from the corner arcs. On a
    uniform grid the exponentials follow by recurrence, and about a grid
    point both sums have exact Taylor expansions, so root refinement needs
    no further trigonometric evaluations.
    """

    TAYLOR_TERMS = 24
    BLOCK = 64
    N_EDGE = 4

    def __init__(self, body, u, t_max, nodes=None):
        u = np.asarray(u, dtype=float)
        u = u / np.linalg.norm(u)
        super().__init__(None, u)
        s, r = body.half_side, body.rho
        a = s - r
        u1, u2 = u
        freq, coef = [], []
        for p, q in ((u1, u2), (u2, u1)):
            # p sin(2 pi s p t) sin(2 pi a q t) / (pi q) as a difference of cosines
            c = p / (2 * np.pi * q)
            freq += [2 * np.pi * (s * p - a * q), 2 * np.pi * (s * p + a * q)]
            coef += [c, -c]
        m = nodes if nodes is not None else arc_nodes(body, t_max)
        th, w = _gauss_legendre(m, 0.0, np.pi / 2)
        for corner, offset in (((a, a), 0.0), ((-a, a), np.pi / 2)):
            nu = np.cos(th + offset) * u1 + np.sin(th + offset) * u2
            freq.append(2 * np.pi * (corner[0] * u1 + corner[1] * u2 + r * nu))
            coef.append(-1j * r * w * nu)
        self.freq = np.concatenate([np.atleast_1d(f) for f in freq])
        self.coef = np.concatenate([np.atleast_1d(c) for c in coef]).astype(complex)
        self._grid = None

    @classmethod
    def supports(cls, u):
        return bool(np.min(np.abs(u)) >= 1e-3 * np.linalg.norm(u))

    def _combine(self, E, t):
        k = self.N_EDGE
        H = np.real(E[:, :k] @ self.coef[:k]) + t * np.real(E[:, k:] @ self.coef[k:])
        return H / (np.pi * t * t)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.size)
        step = max(1, _CHUNK_ELEMENTS // self.freq.size)
        for i in range(0, t.size, step):
            tt = t[i:i + step]
            out[i:i + step] = self._combine(np.exp(1j * np.outer(tt, self.freq)), tt)
        return out

    def grid(self, t):
        t = np.asarray(t, dtype=float)
        h = (t[-1] - t[0]) / (t.size - 1)
        K = self.BLOCK
        E = np.empty((t.size, self.freq.size), dtype=complex)
        E[:K] = np.exp(1j * np.outer(t[0] + h * np.arange(min(K, t.size)), self.freq))
        jump = np.exp(1j * self.freq * (h * K))
        for i in range(K, t.size, K):
            n = min(K, t.size - i)
            E[i:i + n] = E[i - K:i - K + n] * jump
        self._grid = (t, h, E)
        return self._combine(E, t)

    def local(self, rows):
        """Polynomial coefficients in s of pi t^2 chi_hat at t_k + h s, s in [0, 1]."""
        t, h, E = self._grid
        rows = np.asarray(rows, dtype=int)
        N = self.TAYLOR_TERMS
        z = 1j * self.freq * h
        powers = np.empty((self.freq.size, N), dtype=complex)
        powers[:, 0] = 1.0
        for n in range(1, N):
            powers[:, n] = powers[:, n - 1] * z / n
        V = E[rows] * self.coef
        k = self.N_EDGE
        edge = np.real(V[:, :k] @ powers[:k])
        arc = np.real(V[:, k:] @ powers[k:])
        C = edge + t[rows, None] * arc
        C[:, 1:] += h * arc[:, :-1]
        return LocalExpansion(t[rows], h, C)


@dataclass(frozen=True)
class LocalExpansion:
    """Values of chi_hat(t u) near grid points from polynomial coefficients."""

    base: np.ndarray
    step: float
    coeffs: np.ndarray

    def __call__(self, x, idx):
        s = (x - self.base[idx]) / self.step
        C = self.coeffs[idx]
        acc = C[:, -1].copy()
        for n in range(C.shape[1] - 2, -1, -1):
            acc = acc * s + C[:, n]
        return acc / (np.pi * x * x)


# ---------------------------------------------------------------------------
# localized boundary integral


def _smoothstep(s, order):
    """Regularized incomplete beta I_s(order, order), a C^(order-1) polynomial step."""
    m = order
    out = np.zeros_like(s)
    for j in range(m, 2 * m):
        out = out + math.comb(2 * m - 1, j) * s**j * (1.0 - s) ** (2 * m - 1 - j)
    return out


@dataclass(frozen=True)
class CutoffWindow:
    """Cutoff equal to 1 near ``center`` and 0 beyond ``radius``.

    The window is 1 for |x - center| <= plateau * radius and falls to 0 at
    ``radius`` through a polynomial step whose derivative is the bump
    (s (1 - s))^(order - 1), so the window is C^(order-1).
    """

    center: tuple
    radius: float
    order: int = 4
    plateau: float = 0.5

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("window radius must be positive")
        if int(self.order) < 2:
            raise DomainError("window smoothness order must be at least 2")
        if not 0 <= self.plateau < 1:
            raise DomainError("plateau fraction must lie in [0, 1)")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        t = np.linalg.norm(x - np.asarray(self.center), axis=-1) / self.radius
        s = np.clip((t - self.plateau) / (1.0 - self.plateau), 0.0, 1.0)
        return 1.0 - _smoothstep(s, int(self.order))


def window_cone(body, window, n=4096):
    """Normal cone over the plateau of the window, where the window is exactly 1."""
    X, W = boundary_nodes(body, n)
    normals = W / np.linalg.norm(W, axis=-1, keepdims=True)
    axis = np.asarray(geometry.outward_normal(body, np.asarray(window.center)))
    dist = np.linalg.norm(X - np.asarray(window.center), axis=-1)
    inner = dist <= window.plateau * window.radius
    if not np.any(inner):
        raise DomainError("window plateau contains no boundary nodes; is the centre on the boundary?")
    angles = np.arccos(np.clip(normals[inner] @ axis, -1.0, 1.0))
    half = float(np.max(angles))
    return geometry.NormalCone(tuple(axis), min(max(half, 1e-6), math.pi / 2 - 1e-9))


@dataclass(frozen=True)
class LocalizedIntegral:
    value: float
    remainder: float
    cone: geometry.NormalCone = field(repr=False, default=None)


def localized_boundary(body, xi, window, n=4096, cone=None):
    """Boundary integral localized by psi(x) + psi(-x) around the window centre.

    ``value`` is the imaginary part of

        int exp(2 pi i x.xi) (xi/|xi| . n) (psi(x) + psi(-x)) dsigma,

    (the real part vanishes by symmetry) and ``remainder`` is its distance to
    the full boundary integral 2 pi i |xi| chi_hat(xi). The remainder decays
    faster than any fixed power allowed by the window smoothness as long as
    xi stays in the cone of normals over the window plateau.
    """
    xi = np.asarray(_vectors(body, xi), dtype=float)
    if xi.ndim != 1:
        raise DomainError("localized_boundary takes a single frequency vector")
    if cone is None:
        cone = window_cone(body, window)
    if not cone.contains(xi):
        raise ConeViolationError(
            f"xi at angle {float(cone.angle(xi)):.3f} rad from the window normal; cone half-angle {cone.half_angle:.3f}"
        )
    need = herz_required_nodes(body, float(np.linalg.norm(xi)))
    if n < need:
        raise ResolutionError(f"resolution n={n} too coarse; need n >= {need}")
    X, W = boundary_nodes(body, n)
    psi = window(X) + window(-X)
    pts = xi[None, :]
    local = _boundary_sum(X, W, pts, weights=psi)[0]
    full = _boundary_sum(X, W, pts)[0]
    return LocalizedIntegral(float(local.imag), float(abs(full - local)), cone)


# ---------------------------------------------------------------------------
# stationary-phase model


@dataclass(frozen=True)
class PhaseModel:
    """Leading stationary-phase term amplitude * cos(phase)."""

    amplitude: np.ndarray
    phase: np.ndarray
    offset: float = 0.0

    @property
    def value(self):
        return self.amplitude * np.cos(self.phase)


def _model_curvature(body, u):
    if body.kind == "cube":
        raise DegenerateCurvatureError("the cube has no curved boundary patch")
    if np.any(geometry.is_flat_direction(body, u)):
        raise DegenerateCurvatureError(f"{body.label}: zero curvature at a flat-face direction")
    K = np.asarray(geometry.curvature(body, u))
    if np.any(K == 0) or np.any(~np.isfinite(K)):
        raise DegenerateCurvatureError(f"{body.label}: curvature {K} admits no phase model")
    return K


def phase_phase(body, xi, offset=0.0):
    """Model phase 2 pi P(xi) - pi (d+1)/4 + offset."""
    xi = _vectors(body, xi)
    return 2.0 * np.pi * np.asarray(geometry.support(body, xi)) - np.pi * (body.dim + 1) / 4.0 + offset


def phase_model_eval(body, xi, offset=0.0):
    """Stationary-phase approximation of chi_hat at |xi| >= 2.

    amplitude = K^{-1/2} |xi|^{-(d+1)/2} / pi, with K the Gaussian curvature
    at the boundary point whose normal is xi/|xi|.
    """
    xi = _vectors(body, xi)
    norms = np.linalg.norm(xi, axis=-1)
    if np.any(norms < 2.0):
        raise DomainError("the phase model is only used for |xi| >= 2")
    K = _model_curvature(body, xi)
    amp = norms ** (-(body.dim + 1) / 2.0) / (np.pi * np.sqrt(K))
    phase = phase_phase(body, xi, offset)
    if xi.ndim == 1:
        return PhaseModel(float(amp), float(phase), offset)
    return PhaseModel(amp, phase, offset)


def cos_residual(body, xi, offset=0.0):
    """|cos(phase)|; small on the zero set far from the origin."""
    xi = _vectors(body, xi)
    if np.any(np.linalg.norm(xi, axis=-1) < 2.0):
        raise DomainError("the phase model is only used for |xi| >= 2")
    _model_curvature(body, xi)
    out = np.abs(np.cos(phase_phase(body, xi, offset)))
    return _scalar_or_array(out, xi)


@lru_cache(maxsize=None)
def calibrate_phase_offset(radii=(20.0, 40.0, 80.0, 160.0, 320.0), samples=64):
    """Global phase offset fitted once against the exact planar unit disc.

    At each radius R the offset phi is fitted by least squares over one
    period of the phase; the sequence phi(R) is then extrapolated to
    R = infinity with a fit phi0 + c/R, which removes the O(1/R) drift of
    the next asymptotic term.
    """
    disc = geometry.make_body("ball", dim=2, radius=1.0)
    fitted = []
    for R in radii:
        t = R + np.linspace(0.0, 1.0, samples, endpoint=False)
        xi = np.stack([t, np.zeros_like(t)], axis=-1)
        exact = chi_hat_closed(disc, xi)
        model = phase_model_eval(disc, xi)
        y = exact / model.amplitude
        # y ~ cos(phase) cos(phi) - sin(phase) sin(phi)
        A = np.stack([np.cos(model.phase), -np.sin(model.phase)], axis=-1)
        (c, s), *_ = np.linalg.lstsq(A, y, rcond=None)
        fitted.append(math.atan2(s, c))
    design = np.stack([np.ones(len(radii)), 1.0 / np.asarray(radii)], axis=-1)
    (phi0, _), *_ = np.linalg.lstsq(design, np.asarray(fitted), rcond=None)
    return float(phi0)


# ---------------------------------------------------------------------------
# evaluator strategy


@dataclass(frozen=True)
class TransformEvaluator:
    """Callable strategy mapping frequency vectors to chi_hat values.

    ``n`` is the quadrature resolution; ``None`` picks 256 for volume
    quadrature and a frequency-adapted value for the boundary formula.
    """

    body: geometry.Body
    method: str = "closed"
    n: int = None
    phase_offset: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "closed" and self.body.kind == "rounded-square":
            raise MethodUnavailableError(f"no closed form for {self.body.label}")
        if self.method == "quadrature" and self.body.dim > 3:
            raise MethodUnavailableError("volume quadrature is only available for d <= 3")

    @property
    def resolution(self):
        if self.method == "quadrature":
            return self.n or 256
        if self.method == "herz":
            return self.n if self.n is not None else "adaptive"
        return None

    def __call__(self, xi):
        body = self.body
        if self.method == "closed":
            return chi_hat_closed(body, xi)
        if self.method == "quadrature":
            return chi_hat_quadrature(body, xi, self.n or 256)
        if self.method == "model":
            return _scalar_or_array(np.asarray(phase_model_eval(body, xi, self.phase_offset).value), np.asarray(xi))
        if body.kind == "rounded-square" and geometry.has_flat_faces(body):
            return rounded_square_transform(body, xi, self.n)
        if self.n is not None:
            return herz_boundary(body, xi, self.n)
        xi = _vectors(body, xi)
        pts = np.atleast_2d(xi).reshape(-1, body.dim)
        out = np.empty(len(pts))
        norms = np.linalg.norm(pts, axis=-1)
        order = np.argsort(norms)
        for idx in np.array_split(order, max(1, len(order) // 1024)):
            if idx.size:
                n = 2 * herz_required_nodes(body, float(norms[idx].max())) + 64
                out[idx] = herz_boundary(body, pts[idx], n)
        return float(out[0]) if xi.ndim == 1 else out.reshape(xi.shape[:-1])

    def ray(self, u, t_max):
        """The restriction t -> chi_hat(t u) for 0 < t <= t_max."""
        body = self.body
        if (self.method == "herz" and body.kind == "rounded-square"
                and geometry.has_flat_faces(body) and RoundedSquareRay.supports(u)):
            return RoundedSquareRay(body, u, t_max, self.n)
        return RayFunction(self, u)


def best_evaluator(body):
    """Closed form where available, otherwise the boundary formula."""
    if body.kind in ("ball", "cube", "ellipsoid"):
        return TransformEvaluator(body, "closed")
    return TransformEvaluator(body, "herz")


# ---------------------------------------------------------------------------
# CSV batch interface


def read_vectors_csv(path, dim=None):
    """Read one vector per line (comma separated); '#' starts a comment."""
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if not line or line[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line if v.strip()])
            except ValueError:
                # header line
                if rows:
                    raise
                continue
    arr = np.asarray(rows, dtype=float)
    if dim is not None and (arr.ndim != 2 or arr.shape[1] != dim):
        raise DomainError(f"{path}: expected {dim} columns")
    return arr


def evaluate_batch(body, xis, methods=("closed",), n=None):
    """Rows (xi components..., method, value, resolution) for each xi and method."""
    rows = []
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    for method in methods:
        ev = TransformEvaluator(body, method, n)
        values = np.atleast_1d(ev(xis))
        for xi, v in zip(xis, values):
            rows.append([*map(float, xi), method, float(v), ev.resolution])
    return rows


def write_batch_csv(path, body, rows):
    header = [f"xi{k + 1}" for k in range(body.dim)] + ["method", "value", "resolution"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
