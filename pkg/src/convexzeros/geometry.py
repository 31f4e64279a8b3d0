"""Symmetric convex bodies described by their support functions.

Four kinds are supported: ``ball``, ``cube``, ``ellipsoid`` and the planar
``rounded-square`` (a square whose corners are replaced by circular arcs).
Every body is centred at the origin and symmetric under ``x -> -x``.

Vector arguments may be a single vector of shape ``(d,)`` or a stack of
shape ``(..., d)``; the result then has shape ``(...)``.
"""

from dataclasses import dataclass
import math
import re

import numpy as np

from .errors import ConfigError, DomainError, NonUniqueMaximizerError

KINDS = ("ball", "cube", "ellipsoid", "rounded-square")
SMOOTH = "smooth"
PIECEWISE = "piecewise-smooth"


@dataclass(frozen=True)
class Body:
    """A symmetric convex body. Build instances with :func:`make_body`."""

    kind: str
    dim: int
    radius: float = None
    half_side: float = None
    axes: tuple = None
    rho: float = None

    @property
    def smoothness(self):
        if self.kind in ("ball", "ellipsoid"):
            return SMOOTH
        if self.kind == "rounded-square" and self.rho == self.half_side:
            return SMOOTH
        return PIECEWISE

    @property
    def is_smooth(self):
        return self.smoothness == SMOOTH

    @property
    def volume(self):
        d = self.dim
        unit = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
        if self.kind == "ball":
            return unit * self.radius**d
        if self.kind == "cube":
            return (2 * self.half_side) ** d
        if self.kind == "ellipsoid":
            return unit * float(np.prod(self.axes))
        s, r = self.half_side, self.rho
        return 4 * s * s - (4 - math.pi) * r * r

    @property
    def circumradius(self):
        """Largest |x| over the body."""
        if self.kind == "ball":
            return self.radius
        if self.kind == "cube":
            return self.half_side * math.sqrt(self.dim)
        if self.kind == "ellipsoid":
            return max(self.axes)
        a = self.half_side - self.rho
        return a * math.sqrt(2) + self.rho

    @property
    def label(self):
        if self.kind == "ball":
            return f"ball(d={self.dim},r={self.radius:g})"
        if self.kind == "cube":
            return f"cube(d={self.dim},s={self.half_side:g})"
        if self.kind == "ellipsoid":
            axes = ",".join(f"{a:g}" for a in self.axes)
            return f"ellipsoid(d={self.dim},a=({axes}))"
        return f"rounded-square(s={self.half_side:g},rho={self.rho:g})"

    def as_dict(self):
        out = {"kind": self.kind, "dim": self.dim}
        for key in ("radius", "half_side", "rho"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.axes is not None:
            out["axes"] = list(self.axes)
        return out


def _positive(name, value):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", key=name) from None
    if not value > 0 or not math.isfinite(value):
        raise ConfigError(f"must be positive, got {value}", key=name)
    return value


def make_body(kind, dim=None, radius=None, half_side=None, axes=None, rho=None):
    """Validate parameters and build a :class:`Body`.

    >>> make_body("rounded-square", half_side=1, rho=0.25).smoothness
    'piecewise-smooth'
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown body kind {kind!r}; expected one of {KINDS}", key="kind")
    if dim is None:
        dim = len(axes) if kind == "ellipsoid" and axes is not None else 2
    dim = int(dim)
    if dim < 2:
        raise ConfigError("dimension must be at least 2", key="dim")
    if kind == "ball":
        return Body("ball", dim, radius=_positive("radius", 1.0 if radius is None else radius))
    if kind == "cube":
        s = _positive("half_side", 0.5 if half_side is None else half_side)
        return Body("cube", dim, half_side=s)
    if kind == "ellipsoid":
        if axes is None:
            raise ConfigError("ellipsoid requires axes", key="axes")
        axes = tuple(_positive("axes", a) for a in axes)
        if len(axes) != dim:
            raise ConfigError(f"expected {dim} semi-axes, got {len(axes)}", key="axes")
        return Body("ellipsoid", dim, axes=axes)
    if dim != 2:
        raise ConfigError("rounded-square is only defined in d=2", key="dim")
    s = _positive("half_side", 1.0 if half_side is None else half_side)
    r = _positive("rho", 0.25 if rho is None else rho)
    if r > s:
        raise ConfigError(f"corner radius {r} exceeds half-side {s}", key="rho")
    return Body("rounded-square", 2, half_side=s, rho=r)


_BODY_KEYS = {"kind", "dim", "radius", "half_side", "axes", "rho"}


def parse_body_spec(text):
    """Parse ``kind=ellipsoid dim=2 axes=2,1`` style text into a Body.

    Tokens are ``key=value`` pairs separated by whitespace or semicolons.
    List values (``axes``) are comma separated. A bare kind name such as
    ``ball`` is accepted as shorthand for ``kind=ball``.
    """
    fields = {}
    for token in re.split(r"[\s;]+", text.strip()):
        if not token:
            continue
        if "=" not in token:
            if token in KINDS and "kind" not in fields:
                fields["kind"] = token
                continue
            raise ConfigError(f"expected key=value, got {token!r}")
        key, value = token.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _BODY_KEYS:
            raise ConfigError(f"unknown body key (allowed: {sorted(_BODY_KEYS)})", key=key)
        fields[key] = value.strip()
    if "kind" not in fields:
        raise ConfigError("missing", key="kind")
    kwargs = {"kind": fields["kind"]}
    if "dim" in fields:
        try:
            kwargs["dim"] = int(fields["dim"])
        except ValueError:
            raise ConfigError(f"not an integer: {fields['dim']!r}", key="dim") from None
    for key in ("radius", "half_side", "rho"):
        if key in fields:
            kwargs[key] = fields[key]
    if "axes" in fields:
        kwargs["axes"] = [a for a in fields["axes"].split(",") if a]
    return make_body(**kwargs)


def _as_vectors(body, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != body.dim:
        raise DomainError(f"expected vectors of dimension {body.dim}, got shape {xi.shape}")
    return xi


def support(body, xi):
    """Support function P(xi) = sup over the body of x . xi."""
    xi = _as_vectors(body, xi)
    norm = np.linalg.norm(xi, axis=-1)
    if np.any(norm == 0):
        raise DomainError("support function evaluated at the zero vector")
    if body.kind == "ball":
        out = body.radius * norm
    elif body.kind == "cube":
        out = body.half_side * np.sum(np.abs(xi), axis=-1)
    elif body.kind == "ellipsoid":
        out = np.sqrt(np.sum((np.asarray(body.axes) * xi) ** 2, axis=-1))
    else:
        # Minkowski sum of a square of half-side s - rho and a disc of radius rho.
        a = body.half_side - body.rho
        out = a * np.sum(np.abs(xi), axis=-1) + body.rho * norm
    return out if out.ndim else float(out)


def _unit(body, u):
    u = _as_vectors(body, u)
    norm = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise DomainError("direction must be non-zero")
    return u / norm


def has_flat_faces(body):
    if body.kind == "cube":
        return True
    return body.kind == "rounded-square" and body.rho < body.half_side


def is_flat_direction(body, u):
    """True where u is the normal of a flat face (non-unique maximizer)."""
    u = _unit(body, u)
    if not has_flat_faces(body):
        out = np.zeros(u.shape[:-1], dtype=bool)
    else:
        out = np.any(u == 0, axis=-1)
    return out if out.ndim else bool(out)


def gauss_point(body, u):
    """Boundary point whose outward normal is u, i.e. the gradient of P at u."""
    u = _unit(body, u)
    if np.any(is_flat_direction(body, u)):
        raise NonUniqueMaximizerError(
            f"{body.label}: direction is normal to a flat face; the maximizer is a whole face"
        )
    if body.kind == "ball":
        return body.radius * u
    if body.kind == "ellipsoid":
        a2 = np.asarray(body.axes) ** 2
        return a2 * u / np.asarray(support(body, u))[..., None]
    if body.kind == "cube":
        return body.half_side * np.sign(u)
    a = body.half_side - body.rho
    return a * np.sign(u) + body.rho * u


def curvature(body, u):
    """Gaussian curvature of the boundary at gauss_point(body, u).

    Flat-face directions of piecewise bodies give 0 (check with
    :func:`is_flat_direction`); cube vertices give ``inf``.
    """
    u = _unit(body, u)
    flat = is_flat_direction(body, u)
    d = body.dim
    if body.kind == "ball":
        out = np.full(u.shape[:-1], body.radius ** (-(d - 1)))
    elif body.kind == "ellipsoid":
        out = support(body, u) ** (d + 1) / float(np.prod(np.asarray(body.axes) ** 2))
    elif body.kind == "cube":
        out = np.where(flat, 0.0, np.inf)
    else:
        out = np.where(flat, 0.0, 1.0 / body.rho)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def outward_normal(body, x):
    """Outward unit normal at a boundary point x, from the local parameterization."""
    x = _as_vectors(body, x)
    if body.kind == "ball":
        return x / np.linalg.norm(x, axis=-1, keepdims=True)
    if body.kind == "ellipsoid":
        g = x / np.asarray(body.axes) ** 2
        return g / np.linalg.norm(g, axis=-1, keepdims=True)
    if body.kind == "cube":
        ax = np.abs(x)
        top = np.max(ax, axis=-1, keepdims=True)
        on_face = np.isclose(ax, top, rtol=0, atol=1e-12)
        if np.any(np.sum(on_face, axis=-1) > 1):
            raise NonUniqueMaximizerError("normal undefined on cube edges and vertices")
        return np.where(on_face, np.sign(x), 0.0)
    a = body.half_side - body.rho
    corner = np.all(np.abs(x) > a, axis=-1, keepdims=True)
    arc = (x - a * np.sign(x)) / body.rho
    ax = np.abs(x)
    face = np.where(ax == np.max(ax, axis=-1, keepdims=True), np.sign(x), 0.0)
    return np.where(corner, arc, face)


def radial_function(body, u):
    """Distance from the origin to the boundary along the direction u."""
    u = _unit(body, u)
    if body.kind == "ball":
        out = np.full(u.shape[:-1], body.radius)
    elif body.kind == "ellipsoid":
        out = 1.0 / np.sqrt(np.sum((u / np.asarray(body.axes)) ** 2, axis=-1))
    elif body.kind == "cube":
        out = body.half_side / np.max(np.abs(u), axis=-1)
    else:
        s, r = body.half_side, body.rho
        a = s - r
        au = np.abs(u)
        # Hit the flat edge of the dominant coordinate unless the other
        # coordinate has already left the edge, in which case hit the arc.
        t_edge = s / np.max(au, axis=-1)
        other = np.min(au, axis=-1) * t_edge
        uc = a * np.sum(au, axis=-1)
        t_arc = uc + np.sqrt(np.maximum(uc * uc - 2 * a * a + r * r, 0.0))
        out = np.where(other <= a, t_edge, t_arc)
    return out if np.ndim(out) else float(out)


def contains(body, x):
    """Membership test x in body (closed), via the radial function."""
    x = _as_vectors(body, x)
    norm = np.linalg.norm(x, axis=-1)
    safe = np.where(norm[..., None] > 0, x, 1.0)
    out = (norm == 0) | (norm <= radial_function(body, safe) * (1 + 1e-14))
    return out if out.ndim else bool(out)


@dataclass(frozen=True)
class NormalCone:
    """Directions within ``half_angle`` radians of the unit axis."""

    axis: tuple
    half_angle: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise DomainError("cone axis must be non-zero")
        if not 0 < self.half_angle < math.pi / 2:
            raise DomainError(f"cone half-angle must lie in (0, pi/2), got {self.half_angle}")
        object.__setattr__(self, "axis", tuple(float(a) for a in axis / norm))

    @property
    def dim(self):
        return len(self.axis)

    def angle(self, xi):
        xi = np.asarray(xi, dtype=float)
        norm = np.linalg.norm(xi, axis=-1)
        cos = np.clip((xi @ np.asarray(self.axis)) / np.where(norm > 0, norm, 1.0), -1, 1)
        return np.arccos(cos)

    def contains(self, xi):
        xi = np.asarray(xi, dtype=float)
        norm = np.linalg.norm(xi, axis=-1)
        out = (norm > 0) & (self.angle(xi) <= self.half_angle + 1e-12)
        return out if out.ndim else bool(out)


@dataclass(frozen=True)
class Ball:
    """A closed ball in frequency space."""

    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))

    @property
    def dim(self):
        return len(self.center)

    def contains(self, points, slack=1e-12):
        points = np.asarray(points, dtype=float)
        dist = np.linalg.norm(points - np.asarray(self.center), axis=-1)
        out = dist <= self.radius * (1 + slack)
        return out if out.ndim else bool(out)


def ball_in_cone(cone, R, distance_factor=3.0):
    """Ball of radius R centred at distance ``distance_factor * R`` on the cone axis.

    Raises DomainError if the ball is not contained in the cone.
    """
    if distance_factor <= 1:
        raise DomainError("the ball must not contain the origin (distance_factor > 1)")
    if math.asin(1.0 / distance_factor) > cone.half_angle:
        raise DomainError(
            f"ball at distance {distance_factor}R subtends half-angle "
            f"{math.asin(1.0 / distance_factor):.3f} > cone half-angle {cone.half_angle:.3f}"
        )
    center = distance_factor * R * np.asarray(cone.axis)
    return Ball(tuple(center), float(R))
