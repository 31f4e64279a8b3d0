"""Entropy of sampled point sets: greedy separated subsets and cell-count bounds.

The entropy of a set X is the largest number of points of X with pairwise
distances at least 1. A greedy scan gives a maximal separated subset, which
is a lower bound; the number of occupied cells of a grid whose cells have
diameter below 1 is an upper bound. Exponents are fitted to both.
"""

from dataclasses import dataclass, field, asdict
import csv
import json
import math
from collections import defaultdict
from itertools import product

import numpy as np

from .errors import DomainError, InsufficientDataError

# Distances within this relative slack of the separation count as separated,
# so lattice points at distance exactly 1 survive rounding.
SEPARATION_RTOL = 1e-12

# Packing-type constant per dimension: a unit ball holds at most this many
# points with pairwise distance >= 1 (kissing number plus the centre).
KAPPA = {1: 3, 2: 7, 3: 13}


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 1)
    return np.atleast_2d(pts)


def scan_order(points, order="lex"):
    """Indices of ``points`` in lexicographic (or reversed) order."""
    pts = _as_points(points)
    if len(pts) == 0:
        return np.zeros(0, dtype=int)
    idx = np.lexsort(pts.T[::-1])
    if order == "lex":
        return idx
    if order == "reverse":
        return idx[::-1]
    raise DomainError(f"unknown scan order {order!r}")


@dataclass
class SeparatedSet:
    """Points kept by a greedy scan, with a grid hash of side = separation."""

    separation: float = 1.0
    points: list = field(default_factory=list)
    cells: dict = field(default_factory=lambda: defaultdict(list))

    def _cell(self, p):
        return tuple(int(math.floor(x / self.separation)) for x in p)

    def admits(self, p):
        limit = (self.separation * (1 - SEPARATION_RTOL)) ** 2
        base = self._cell(p)
        for off in product((-1, 0, 1), repeat=len(base)):
            for j in self.cells.get(tuple(b + o for b, o in zip(base, off)), ()):
                q = self.points[j]
                if sum((a - b) ** 2 for a, b in zip(p, q)) < limit:
                    return False
        return True

    def add(self, p):
        self.cells[self._cell(p)].append(len(self.points))
        self.points.append(tuple(p))

    def __len__(self):
        return len(self.points)


def greedy_pack(points, separation=1.0, order="lex", use_hash=True):
    """Greedy maximal separated subset; returns ``(count, retained array)``.

    Points are scanned in the given deterministic order and kept when at
    distance >= ``separation`` from everything kept so far. The grid hash
    limits each test to the 3^d neighbouring cells; ``use_hash=False`` runs
    the plain quadratic scan and returns the same subset.
    """
    if not separation > 0:
        raise DomainError("separation must be positive")
    pts = _as_points(points)
    if len(pts) == 0:
        return 0, pts
    idx = scan_order(pts, order)
    if use_hash:
        sep = SeparatedSet(separation)
        for i in idx:
            p = tuple(pts[i])
            if sep.admits(p):
                sep.add(p)
        kept = np.array(sep.points, dtype=float).reshape(-1, pts.shape[1])
        return len(kept), kept
    limit = (separation * (1 - SEPARATION_RTOL)) ** 2
    kept = np.empty_like(pts)
    k = 0
    for i in idx:
        if k == 0 or np.min(np.sum((kept[:k] - pts[i]) ** 2, axis=1)) >= limit:
            kept[k] = pts[i]
            k += 1
    return k, kept[:k].copy()


def min_pairwise_distance(points):
    """Brute-force minimum pairwise distance (quadratic, for certification)."""
    pts = _as_points(points)
    if len(pts) < 2:
        return math.inf
    best = math.inf
    for start in range(0, len(pts), 1024):
        blk = pts[start:start + 1024]
        d2 = np.sum((blk[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        rows = np.arange(len(blk))
        d2[rows, start + rows] = np.inf
        best = min(best, float(d2.min()))
    return math.sqrt(best)


def is_separated(points, separation=1.0):
    """Exact pairwise check that all distances are >= separation."""
    return min_pairwise_distance(points) >= separation * (1 - SEPARATION_RTOL)


def cell_upper_bound(points, d=None):
    """Occupied cells of a grid with side 0.99/sqrt(d).

    Cells have diameter 0.99 < 1, so a 1-separated subset has at most one
    point per cell and the count bounds the entropy from above.
    """
    pts = _as_points(points)
    if len(pts) == 0:
        return 0
    d = d or pts.shape[1]
    side = 0.99 / math.sqrt(d)
    cells = np.floor(pts / side).astype(np.int64)
    return int(len(np.unique(cells, axis=0)))


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    residual: float


def fit_exponent(rows):
    """Least-squares slope of log(value) against log(R).

    ``rows`` is a sequence of ``(R, value)``. Needs at least three rows,
    positive values and R spanning a factor of 4.
    """
    rows = [(float(r), float(v)) for r, v in rows]
    if len(rows) < 3:
        raise InsufficientDataError(f"need at least 3 rows to fit an exponent, got {len(rows)}")
    R = np.array([r for r, _ in rows])
    v = np.array([x for _, x in rows])
    if np.any(R <= 0) or np.any(v <= 0):
        raise DomainError("exponent fits need positive R and positive values")
    if R.max() / R.min() < 4:
        raise InsufficientDataError("R values must span at least a factor of 4")
    X = np.column_stack([np.log(R), np.ones_like(R)])
    coef, *_ = np.linalg.lstsq(X, np.log(v), rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - np.log(v)) ** 2)))
    return ExponentFit(float(coef[0]), float(coef[1]), resid)


@dataclass
class ScalingRow:
    R: float
    entropy_lower: int
    entropy_upper: int
    samples: int
    tol: float


@dataclass
class ScalingReport:
    """Entropy bounds across R for one body and one eta, with fitted slopes."""

    body: str
    eta: tuple
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def add(self, R, points, tol, order="lex"):
        lower, _ = greedy_pack(points, order=order)
        upper = cell_upper_bound(points)
        if lower > upper:
            raise AssertionError(f"greedy count {lower} exceeds cell bound {upper}")
        row = ScalingRow(float(R), int(lower), int(upper), int(len(points)), float(tol))
        self.rows.append(row)
        return row

    def _fit(self, attr):
        # log-log fits need positive counts; an empty cell is reported, not fitted
        pts = [(r.R, getattr(r, attr)) for r in self.rows]
        try:
            return fit_exponent(pts)
        except (DomainError, InsufficientDataError):
            return None

    @property
    def lower_fit(self):
        return self._fit("entropy_lower")

    @property
    def upper_fit(self):
        return self._fit("entropy_upper")

    def summary(self):
        lo, up = self.lower_fit, self.upper_fit
        return {
            "body": self.body,
            "eta": list(self.eta),
            "rows": [asdict(r) for r in self.rows],
            "exponent_lower": None if lo is None else asdict(lo),
            "exponent_upper": None if up is None else asdict(up),
            "config": self.config,
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["body", "eta", "R", "entropy_lower", "entropy_upper", "samples", "tol"])
            eta = " ".join(f"{e:.12g}" for e in self.eta)
            for r in self.rows:
                w.writerow([self.body, eta, f"{r.R:g}", r.entropy_lower, r.entropy_upper, r.samples, f"{r.tol:.12g}"])

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
