"""Orthogonality certificates, the cube lattice spectrum and the difference-set pipeline.

If the exponentials exp(2 pi i x.lambda), lambda in Lambda, are orthogonal
over a body, every difference of two frequencies is a zero of chi_hat. A
dense spectrum therefore produces translates eta = lambda2 - lambda1 for
which X(eta, B) contains a whole translated piece of Lambda, hence has
entropy comparable to R^d.
"""

from dataclasses import dataclass, field
import csv
import json

import numpy as np
from scipy.spatial import cKDTree

from . import geometry, packing
from .errors import DensityFailureError, DomainError, InsufficientDataError, MethodUnavailableError
from .transform import best_evaluator
from .zeroset import ETA_RANGE, zero_distances

# Membership threshold for |chi_hat| in the pipeline certificate.
MEMBERSHIP_ATOL = 1e-10


@dataclass
class CandidateSpectrum:
    """A finite piece of a putative spectrum of ``body``."""

    body: geometry.Body
    points: np.ndarray
    generator: str = "user-supplied"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        self.points = pts.reshape(-1, self.body.dim)

    def __len__(self):
        return len(self.points)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for p in self.points:
                w.writerow([f"{x:.17g}" for x in p])

    @classmethod
    def from_csv(cls, body, path):
        """One point per line, comma or whitespace separated; '#' starts a comment."""
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                vals = [float(v) for v in line.replace(",", " ").split()]
                if len(vals) != body.dim:
                    raise DomainError(f"expected {body.dim} coordinates per line, got {len(vals)}")
                rows.append(vals)
        return cls(body, np.array(rows).reshape(-1, body.dim), "user-supplied")


def pair_orthogonality(body, lam, mu, evaluator=None):
    """|chi_hat(lam - mu)|: zero exactly when the two exponentials are orthogonal."""
    lam, mu = np.asarray(lam, dtype=float), np.asarray(mu, dtype=float)
    if np.array_equal(lam, mu):
        raise DomainError("pair_orthogonality needs distinct frequencies")
    evaluator = evaluator or best_evaluator(body)
    return float(abs(evaluator(lam - mu)))


def pair_orthogonality_batch(body, lams, mus, evaluator=None):
    """Vectorized :func:`pair_orthogonality` over rows of ``lams`` and ``mus``."""
    diff = np.asarray(lams, dtype=float) - np.asarray(mus, dtype=float)
    if np.any(np.all(diff == 0, axis=-1)):
        raise DomainError("pair_orthogonality needs distinct frequencies")
    evaluator = evaluator or best_evaluator(body)
    return np.abs(np.asarray(evaluator(diff), dtype=float))


def lattice_spectrum(body, B):
    """The lattice (1/(2s)) Z^d restricted to the ball B, for a cube of half-side s."""
    if body.kind != "cube":
        raise MethodUnavailableError(f"lattice spectra are only built for cubes, not {body.label}")
    step = 1.0 / (2.0 * body.half_side)
    center = np.asarray(B.center, dtype=float)
    lo = np.ceil((center - B.radius) / step).astype(int)
    hi = np.floor((center + B.radius) / step).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, body.dim)
    pts = grid * step
    pts = pts[B.contains(pts)]
    return CandidateSpectrum(body, pts, "cube-lattice")


def min_gap(points):
    """Minimum pairwise distance, from nearest-neighbour queries on a k-d tree."""
    pts = np.asarray(points.points if isinstance(points, CandidateSpectrum) else points, dtype=float)
    pts = np.atleast_2d(pts)
    if len(pts) < 2:
        raise InsufficientDataError("min_gap needs at least two points")
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(dist[:, 1].min())


def density_count(points, balls):
    """Number of points inside each ball of ``balls``."""
    pts = np.asarray(points.points if isinstance(points, CandidateSpectrum) else points, dtype=float)
    if pts.size == 0:
        return [0 for _ in balls]
    pts = np.atleast_2d(pts)
    return [int(np.count_nonzero(B.contains(pts))) for B in balls]


@dataclass
class PipelineResult:
    """Output of the difference-set construction at one radius R."""

    R: float
    eta: tuple
    lambda1: tuple
    lambda2: tuple
    points: np.ndarray
    entropy_lower: int
    entropy_upper: int
    max_residual_xi: float
    max_residual_shift: float
    max_zero_distance: float
    balls: dict = field(default_factory=dict)

    def summary(self):
        return {
            "R": self.R, "eta": list(self.eta), "lambda1": list(self.lambda1), "lambda2": list(self.lambda2),
            "points": int(len(self.points)), "entropy_lower": self.entropy_lower,
            "entropy_upper": self.entropy_upper, "max_residual_xi": self.max_residual_xi,
            "max_residual_shift": self.max_residual_shift, "max_zero_distance": self.max_zero_distance,
            "balls": self.balls,
        }


def pipeline_balls(B):
    """Balls B1, B2 of radius R/2 with every difference of their points inside B.

    B1 is centred at the origin and B2 at B's centre, so for x in B2 and
    y in B1 the difference x - y lies within R of B's centre.
    """
    center = np.asarray(B.center, dtype=float)
    half = 0.5 * B.radius
    return geometry.Ball(tuple(np.zeros_like(center)), half), geometry.Ball(tuple(center), half)


def _choose_pair(pts, center):
    lo, hi = ETA_RANGE
    order = np.argsort(np.linalg.norm(pts - center, axis=-1), kind="stable")
    for i in order:
        d = np.linalg.norm(pts - pts[i], axis=-1)
        ok = np.flatnonzero((d >= lo) & (d <= hi))
        if ok.size:
            j = ok[np.lexsort((ok, d[ok]))[0]]
            return pts[i], pts[j]
    return None


def difference_pipeline(body, spectrum, R, B=None, evaluator=None):
    """Build a high-entropy X(eta, B) from the spectrum piece ``spectrum``.

    Picks lambda1, lambda2 in B1 with |lambda2 - lambda1| in [0.5, 2], sets
    eta = lambda2 - lambda1 and returns (B2 cap Lambda) - lambda2 minus the
    two degenerate points where a difference vanishes. Every returned xi is
    certified: |chi_hat(xi)| and |chi_hat(xi + eta)| are below 1e-10 and
    both lie in B.
    """
    evaluator = evaluator or best_evaluator(body)
    if B is None:
        B = geometry.Ball(tuple(np.zeros(body.dim)), float(R))
    B1, B2 = pipeline_balls(B)
    lam = np.asarray(spectrum.points, dtype=float).reshape(-1, body.dim)
    in1 = lam[B1.contains(lam)] if len(lam) else lam
    pair = _choose_pair(in1, np.asarray(B1.center)) if len(in1) >= 2 else None
    if pair is None:
        raise DensityFailureError(
            f"no pair of spectrum points at distance in {list(ETA_RANGE)} inside B1 (radius {B1.radius:g})"
        )
    lam1, lam2 = pair
    eta = lam2 - lam1
    in2 = lam[B2.contains(lam)]
    # lambda in {lambda1, lambda2} makes xi or xi + eta vanish
    distinct = ~(np.all(in2 == lam1, axis=1) | np.all(in2 == lam2, axis=1))
    sel = in2[distinct]
    xi = sel - lam2
    res_xi = pair_orthogonality_batch(body, sel, np.broadcast_to(lam2, sel.shape), evaluator) if len(sel) else np.zeros(0)
    res_sh = pair_orthogonality_batch(body, sel, np.broadcast_to(lam1, sel.shape), evaluator) if len(sel) else np.zeros(0)
    ok = (res_xi <= MEMBERSHIP_ATOL) & (res_sh <= MEMBERSHIP_ATOL) & B.contains(xi) & B.contains(xi + eta)
    xi = xi[ok]
    dist = 0.0
    if len(xi):
        d1, _ = zero_distances(body, xi, evaluator)
        d2, _ = zero_distances(body, xi + eta, evaluator)
        dist = float(max(d1.max(), d2.max()))
    lower, _ = packing.greedy_pack(xi)
    upper = packing.cell_upper_bound(xi)
    return PipelineResult(
        float(R), tuple(float(e) for e in eta), tuple(map(float, lam1)), tuple(map(float, lam2)), xi,
        int(lower), int(upper),
        float(res_xi[ok].max()) if ok.any() else 0.0,
        float(res_sh[ok].max()) if ok.any() else 0.0,
        dist,
        {"B": [list(B.center), B.radius], "B1": [list(B1.center), B1.radius], "B2": [list(B2.center), B2.radius]},
    )


def write_report(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
