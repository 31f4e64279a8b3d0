"""Experiment drivers: configuration, the six experiments and their reports.

Every report carries the fully resolved configuration, a list of rows
(written as CSV) and a summary with threshold checks (written as JSON).
Outputs depend only on the configuration and the seed.
"""

from dataclasses import dataclass, field, fields, asdict, replace
import csv
import json
import math
import os

import numpy as np

from . import geometry, packing, spectra, zeroset
from .errors import ConfigError, ConvexZerosError, DomainError
from .transform import (
    TransformEvaluator, best_evaluator, calibrate_phase_offset, chi_hat_closed, phase_model_eval, phase_phase,
)

EXPERIMENTS = ("oracle-check", "model-error", "shells", "xset-entropy", "cube-spectrum", "residual-stats")
DEFAULT_R = {2: (16.0, 32.0, 64.0, 128.0), 3: (8.0, 16.0, 32.0)}
MODEL_ERROR_R = (10.0, 20.0, 40.0, 80.0)

# acceptance thresholds
QUADRATURE_ATOL = 1e-4
HERZ_ATOL = 1e-8
SHELL_ATOL = 1e-6
ENVELOPE_RTOL = 0.10
SPECTRUM_MIN_EXPONENT = 1.9
HERZ_ORTHOGONALITY_ATOL = 1e-8
RESIDUAL_MIN_DECAY = 0.7
CONTROL_MIN_P90 = 0.5
TOL_DOUBLING_MAX_SHIFT = 0.15
ORDER_MAX_SHIFT = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment configuration; empty tuples mean "use the default"."""

    experiment: str = "xset-entropy"
    body: str = "ball"
    dim: int = 2
    R: tuple = ()
    eta: tuple = ()
    n_random_eta: int = 4
    cone_axis: tuple = ()
    cone_half_angle: float = 0.5
    distance_factor: float = 3.0
    c_delta: float = 1.0
    c_angle: float = 0.5
    n_quadrature: int = 256
    n_herz: int = 2048
    samples: int = 50
    n_rays: int = 16
    n_shells: int = 20
    pairs: int = 1000
    phase_offset: str = "calibrated"
    tol_doubling: bool = False
    seed: int = 0
    out_dir: str = "results"
    format: str = "json"

    # -- construction -------------------------------------------------

    @classmethod
    def from_mapping(cls, values):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for raw_key, raw in values.items():
            key = raw_key.strip().replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown key (allowed: {sorted(known)})", key=raw_key)
            kwargs[key] = _coerce(key, known[key].default, raw)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(read_config_file(path))

    def merged(self, **overrides):
        """Copy with the non-None overrides applied (coerced like file values)."""
        known = {f.name: f.default for f in fields(self)}
        clean = {k: _coerce(k, known[k], v) for k, v in overrides.items() if v is not None}
        return replace(self, **clean)

    # -- resolution ---------------------------------------------------

    def make_body(self):
        text = self.body
        if "dim=" not in text and not ("ellipsoid" in text and "axes=" in text):
            text = f"{text} dim={self.dim}"
        body = geometry.parse_body_spec(text)
        return body

    def resolve(self):
        """Fill defaults that depend on the body; validate everything."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}", key="experiment")
        if self.format not in ("csv", "json"):
            raise ConfigError("must be csv or json", key="format")
        body = self.make_body()
        d = body.dim
        R = self.R
        if not R:
            R = MODEL_ERROR_R if self.experiment == "model-error" else DEFAULT_R.get(d, DEFAULT_R[3])
        if any(r <= 0 for r in R):
            raise ConfigError("radii must be positive", key="R")
        axis = self.cone_axis or default_cone_axis(body)
        if len(axis) != d:
            raise ConfigError(f"needs {d} components", key="cone_axis")
        axis = tuple(float(a) for a in np.asarray(axis) / np.linalg.norm(axis))
        if not 0 < self.cone_half_angle < math.pi / 2:
            raise ConfigError("must lie in (0, pi/2)", key="cone_half_angle")
        for key in ("c_delta", "c_angle", "distance_factor"):
            if getattr(self, key) <= 0:
                raise ConfigError("must be positive", key=key)
        eta = self.eta or tuple(map(tuple, declared_eta_grid(d, axis, self.seed, self.n_random_eta)))
        for e in eta:
            if len(e) != d:
                raise ConfigError(f"eta vectors need {d} components", key="eta")
            n = float(np.linalg.norm(e))
            if not zeroset.ETA_RANGE[0] <= n <= zeroset.ETA_RANGE[1]:
                raise ConfigError(f"|eta| = {n:.4g} outside {list(zeroset.ETA_RANGE)}", key="eta")
        offset = self.phase_offset
        if offset == "calibrated":
            offset_value = calibrate_phase_offset()
        else:
            try:
                offset_value = float(offset)
            except ValueError:
                raise ConfigError("must be 'calibrated' or a number", key="phase_offset") from None
        resolved = replace(self, R=tuple(float(r) for r in R), cone_axis=axis,
                           eta=tuple(tuple(float(x) for x in e) for e in eta))
        return resolved, body, offset_value

    def as_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = [list(x) if isinstance(x, tuple) else x for x in v]
        return out


def _coerce(key, default, raw):
    if not isinstance(raw, str):
        return tuple(tuple(x) if isinstance(x, (list, tuple)) else x for x in raw) if isinstance(raw, (list, tuple)) else raw
    text = raw.strip()
    try:
        if key == "eta":
            return tuple(tuple(float(x) for x in vec.replace(",", " ").split()) for vec in text.split(";") if vec.strip())
        if key in ("R", "cone_axis"):
            return tuple(float(x) for x in text.replace(",", " ").split())
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r}", key=key) from None
    return text


def read_config_file(path):
    """Flat ``key = value`` lines; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value", key=path)
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def default_cone_axis(body):
    """Cone axis over a curved boundary patch: e1, or the diagonal for the rounded square."""
    if body.kind == "rounded-square":
        return tuple(np.full(2, 1 / math.sqrt(2)))
    return tuple(np.eye(body.dim)[0])


def declared_eta_grid(dim, axis, seed=0, n_random=4):
    """Declared translation grid: unit directions kept off the cone axis, plus seeded random eta.

    d=2: eight unit vectors at angle(axis) + pi/8 + k pi/4. d=3: the 26
    normalized vectors of {-1,0,1}^3 in a frame around the axis, tilted by
    pi/8. Directions parallel to the axis are avoided because there u.eta
    is stationary on the cap. Then ``n_random`` vectors with |eta| uniform
    in [0.5, 2] and uniformly random direction.
    """
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    if dim == 2:
        base = math.atan2(axis[1], axis[0])
        ang = base + math.pi / 8 + np.arange(8) * math.pi / 4
        grid = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    elif dim == 3:
        cube = np.array([v for v in np.ndindex(3, 3, 3) if v != (1, 1, 1)], dtype=float) - 1
        cube /= np.linalg.norm(cube, axis=1, keepdims=True)
        c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
        tilt = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
        frame = np.column_stack([zeroset._orthonormal_frame(axis), axis])
        grid = cube @ tilt.T @ frame.T
    else:
        raise DomainError("eta grids are declared for d = 2, 3")
    rng = np.random.default_rng(seed)
    extra = []
    for _ in range(n_random):
        v = rng.standard_normal(dim)
        extra.append(v / np.linalg.norm(v) * rng.uniform(*zeroset.ETA_RANGE))
    return np.vstack([grid] + extra) if extra else grid


# ---------------------------------------------------------------------------
# reports


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    relation: str
    passed: bool


def check(name, value, relation, threshold):
    ops = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b}
    ok = bool(value is not None and np.isfinite(value) and ops[relation](value, threshold))
    return Check(name, None if value is None else float(value), float(threshold), relation, ok)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def payload(self):
        return {
            "experiment": self.experiment, "config": self.config, "summary": _jsonable(self.summary),
            "checks": [asdict(c) for c in self.checks], "passed": self.passed,
        }

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        stem = os.path.join(out_dir, self.experiment)
        with open(stem + ".csv", "w", newline="") as fh:
            keys = list(self.rows[0]) if self.rows else []
            w = csv.writer(fh)
            w.writerow(keys)
            for row in self.rows:
                w.writerow([format_cell(row[k]) for k in keys])
        with open(stem + ".json", "w") as fh:
            json.dump(self.payload(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return stem + ".csv", stem + ".json"


def format_cell(v):
    """Deterministic text for one CSV cell."""
    if isinstance(v, dict):
        return json.dumps(_jsonable(v), sort_keys=True)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(format_cell(x) for x in v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _new_report(cfg, body, offset, **extra):
    conf = cfg.as_dict()
    conf.update(body_resolved=body.as_dict(), phase_offset_value=offset, **extra)
    return ExperimentReport(cfg.experiment, conf)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _cone_directions(axis, half_angle, n):
    """n directions spread over the cone (the axis first)."""
    axis = _unit(axis)
    if n == 1:
        return axis[None, :]
    return zeroset.cap_directions(axis, 0.5 * half_angle, half_angle / n)[:n]


# ---------------------------------------------------------------------------
# drivers


def run_oracle_check(cfg):
    """Agreement of the transform evaluation routes at random frequencies."""
    cfg, body, offset = cfg.resolve()
    rep = _new_report(cfg, body, offset)
    rng = np.random.default_rng(cfg.seed)
    dirs = rng.standard_normal((cfg.samples, body.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    xis = dirs * rng.uniform(0.5, 8.0, size=(cfg.samples, 1))
    values = {}
    if body.kind != "rounded-square":
        values["closed"] = np.asarray(chi_hat_closed(body, xis))
    values["quadrature"] = np.asarray(TransformEvaluator(body, "quadrature", cfg.n_quadrature)(xis))
    values["herz"] = np.asarray(TransformEvaluator(body, "herz", cfg.n_herz)(xis))
    ref = values.get("closed", values["herz"])
    for i, xi in enumerate(xis):
        row = {f"xi{k + 1}": xi[k] for k in range(body.dim)}
        row.update({m: v[i] for m, v in values.items()})
        rep.rows.append(row)
    dq = float(np.max(np.abs(values["quadrature"] - ref)))
    rep.summary = {"max_quadrature_disagreement": dq}
    rep.checks.append(check("quadrature agreement", dq, "<=", QUADRATURE_ATOL))
    if "closed" in values:
        dh = float(np.max(np.abs(values["herz"] - values["closed"])))
        rep.summary["max_herz_disagreement"] = dh
        rep.checks.append(check("boundary formula agreement", dh, "<=", HERZ_ATOL))
    return rep


def model_error_at(body, u, R, offset, evaluator=None, samples=64):
    """Max |chi_hat - model| and the envelope ratio over one phase period from R along u."""
    evaluator = evaluator or best_evaluator(body)
    u = _unit(u)
    period = 1.0 / float(geometry.support(body, u))
    t = R + period * np.arange(samples) / samples
    xi = t[:, None] * u
    exact = np.asarray(evaluator(xi))
    model = phase_model_eval(body, xi, offset)
    err = float(np.max(np.abs(exact - model.value)))
    envelope = float(np.max(np.abs(exact)) / np.max(model.amplitude))
    return err, envelope


def run_model_error(cfg):
    """Decay of the stationary-phase model error with R, and the amplitude envelope."""
    cfg, body, offset = cfg.resolve()
    rep = _new_report(cfg, body, offset)
    evaluator = best_evaluator(body)
    dirs = _cone_directions(cfg.cone_axis, cfg.cone_half_angle, 3)
    errs = []
    for R in cfg.R:
        worst, env = 0.0, []
        for k, u in enumerate(dirs):
            e, ratio = model_error_at(body, u, R, offset, evaluator)
            worst = max(worst, e)
            env.append(ratio)
            rep.rows.append({"R": R, "direction": k, "u": u, "max_error": e, "envelope_ratio": ratio})
        errs.append((R, worst))
    fit = packing.fit_exponent(errs)
    theory = (body.dim + 3) / 2
    rep.summary = {"decay_exponent": -fit.slope, "theory": theory, "fit_residual": fit.residual,
                   "max_error": dict((f"{r:g}", e) for r, e in errs)}
    rep.checks.append(check("model error decay exponent", -fit.slope, ">=", theory - 0.2))
    R_env = 40.0 if 40.0 in cfg.R else cfg.R[-1]
    ratios = [r["envelope_ratio"] for r in rep.rows if r["R"] == R_env]
    dev = float(max(abs(x - 1.0) for x in ratios))
    rep.summary["envelope_R"] = R_env
    rep.summary["envelope_max_deviation"] = dev
    rep.checks.append(check(f"amplitude envelope at R={R_env:g}", dev, "<=", ENVELOPE_RTOL))
    return rep


def bessel_zero_radii(order, count, radius=1.0):
    """First ``count`` positive zeros of J_order, scaled to radii j/(2 pi radius)."""
    import mpmath

    return np.array([float(mpmath.besseljzero(order, k)) for k in range(1, count + 1)]) / (2 * math.pi * radius)


def run_shells(cfg):
    """Zero shells along rays and in the balls B; Bessel-root comparison for the ball."""
    cfg, body, offset = cfg.resolve()
    cone = geometry.NormalCone(cfg.cone_axis, cfg.cone_half_angle)
    rep = _new_report(cfg, body, offset, ball_placement=f"center at {cfg.distance_factor:g} R along the cone axis")
    evaluator = best_evaluator(body)
    is_ball = body.kind == "ball"
    rng = np.random.default_rng(cfg.seed)
    if is_ball:
        order = body.dim / 2
        first = bessel_zero_radii(order, cfg.n_shells, body.radius)
        worst = 0.0
        for k in range(cfg.n_rays):
            u = _unit(rng.standard_normal(body.dim))
            got = zeroset.radial_zeros(body, u, 0.5 * first[0], first[-1] + 0.25 / body.radius, evaluator)
            radii = np.array([z.radius for z in got])[: cfg.n_shells]
            e = float(np.max(np.abs(radii - first))) if radii.size == first.size else math.inf
            worst = max(worst, e)
        rep.summary["ray_max_deviation"] = worst
        rep.checks.append(check("first shells match Bessel roots", worst, "<=", SHELL_ATOL))
    for R in cfg.R:
        B = geometry.ball_in_cone(cone, R, cfg.distance_factor)
        zs = zeroset.shell_index(body, cone, B, evaluator=evaluator, c=cfg.c_angle)
        row = {"R": R, "samples": len(zs), "max_residual": float(zs.residuals.max()) if len(zs) else 0.0,
               "rays": zs.meta["n_dirs"], "angular_spacing": zs.meta["angular_spacing"]}
        spacing = np.diff(zs.radii)[np.diff(zs.rays) == 0]
        P = np.asarray(geometry.support(body, zs.directions))
        row["median_spacing_ratio"] = float(np.median(spacing * 2 * P[1:][np.diff(zs.rays) == 0])) if spacing.size else math.nan
        if is_ball:
            top = float(np.linalg.norm(B.center) + B.radius)
            roots = bessel_zero_radii(body.dim / 2, int(2 * top * body.radius + 8), body.radius)
            nearest = np.abs(zs.radii[:, None] - roots[None, :]).min(axis=1)
            row["max_bessel_deviation"] = float(nearest.max())
            row["shells"] = int(np.count_nonzero((roots >= top - 2 * B.radius) & (roots <= top)))
            rep.checks.append(check(f"shell radii at R={R:g}", row["max_bessel_deviation"], "<=", SHELL_ATOL))
        rep.rows.append(row)
    return rep


def _entropy_rows(body, cfg, c_delta, zeros_by_R, cone, evaluator, eta):
    rows = []
    for R in cfg.R:
        B = geometry.ball_in_cone(cone, R, cfg.distance_factor)
        xs = zeroset.x_set(body, eta, B, zeros=zeros_by_R[R], evaluator=evaluator, c=cfg.c_angle, c_delta=c_delta)
        lower, _ = packing.greedy_pack(xs.points)
        lower_rev, _ = packing.greedy_pack(xs.points, order="reverse")
        upper = packing.cell_upper_bound(xs.points, body.dim)
        rows.append({"R": R, "entropy_lower": lower, "entropy_lower_reverse": lower_rev,
                     "entropy_upper": upper, "samples": len(xs), "candidates": xs.candidates, "tol": xs.tol})
    return rows


def clamped_exponent(rows, key):
    """Fitted slope of log(max(value, 1)); an empty sample counts as entropy 1."""
    return packing.fit_exponent([(r["R"], max(r[key], 1)) for r in rows])


def entropy_threshold(body):
    eps = 1.0 if body.is_smooth else 0.5
    margin = 0.3 if body.is_smooth else 0.2
    return body.dim - eps + margin


def run_xset_entropy(cfg):
    """Entropy bounds of X(eta, B) across R, with the maximum exponent over eta."""
    if cfg.make_body().kind == "cube":
        return run_cube_spectrum(replace(cfg, experiment="cube-spectrum"))
    cfg, body, offset = cfg.resolve()
    cone = geometry.NormalCone(cfg.cone_axis, cfg.cone_half_angle)
    rep = _new_report(cfg, body, offset, ball_placement=f"center at {cfg.distance_factor:g} R along the cone axis")
    evaluator = best_evaluator(body)
    zeros_by_R = {}
    for R in cfg.R:
        B = geometry.ball_in_cone(cone, R, cfg.distance_factor)
        zeros_by_R[R] = zeroset.shell_index(body, cone, B, evaluator=evaluator, c=cfg.c_angle)
    scales = [cfg.c_delta] + ([2 * cfg.c_delta] if cfg.tol_doubling else [])
    per_scale = {}
    for cd in scales:
        fits = []
        for i, eta in enumerate(cfg.eta):
            rows = _entropy_rows(body, cfg, cd, zeros_by_R, cone, evaluator, eta)
            lo = clamped_exponent(rows, "entropy_lower")
            up = clamped_exponent(rows, "entropy_upper")
            rev = clamped_exponent(rows, "entropy_lower_reverse")
            fits.append({"eta_index": i, "eta": list(eta), "exponent_lower": lo.slope, "exponent_upper": up.slope,
                         "exponent_lower_reverse": rev.slope, "empty_rows": sum(r["samples"] == 0 for r in rows)})
            for r in rows:
                rep.rows.append(dict({"c_delta": cd, "eta_index": i, "eta": eta}, **r))
        per_scale[cd] = fits
    fits = per_scale[cfg.c_delta]
    limit = entropy_threshold(body)
    max_up = max(f["exponent_upper"] for f in fits)
    max_lo = max(f["exponent_lower"] for f in fits)
    order_shift = max(abs(f["exponent_lower"] - f["exponent_lower_reverse"]) for f in fits)
    rep.summary = {"per_eta": fits, "max_exponent_lower": max_lo, "max_exponent_upper": max_up,
                   "threshold": limit, "order_shift": order_shift,
                   "sandwich_ok": all(r["entropy_lower"] <= r["entropy_upper"] for r in rep.rows)}
    rep.checks.append(check("max entropy exponent over eta", max_up, "<=", limit))
    rep.checks.append(check("greedy <= cell bound", float(rep.summary["sandwich_ok"]), ">=", 1.0))
    rep.checks.append(check("order robustness", order_shift, "<=", ORDER_MAX_SHIFT))
    if cfg.tol_doubling:
        doubled = per_scale[2 * cfg.c_delta]
        shift = max(abs(a["exponent_upper"] - b["exponent_upper"]) for a, b in zip(fits, doubled))
        max_shift = abs(max(f["exponent_upper"] for f in doubled) - max_up)
        rep.summary.update(doubled=doubled, tol_doubling_shift_max_exponent=max_shift, tol_doubling_shift_per_eta=shift)
        rep.checks.append(check("tolerance doubling shift", max_shift, "<=", TOL_DOUBLING_MAX_SHIFT))
    return rep


def run_cube_spectrum(cfg):
    """Lattice spectrum of the cube: orthogonality certificates and the difference-set pipeline."""
    if cfg.body == "ball":
        cfg = replace(cfg, body="cube")
    cfg, body, offset = cfg.resolve()
    if body.kind != "cube":
        raise ConfigError(f"cube-spectrum needs a cube body, got {body.label}", key="body")
    rep = _new_report(cfg, body, offset, ball_placement="B centered at the origin; B1 at the origin, B2 at B's center")
    rng = np.random.default_rng(cfg.seed)
    herz = TransformEvaluator(body, "herz")
    entropy, worst_closed, worst_herz = [], 0.0, 0.0
    for R in cfg.R:
        B = geometry.Ball(tuple(np.zeros(body.dim)), R)
        lam = spectra.lattice_spectrum(body, B)
        res = spectra.difference_pipeline(body, lam, R, B)
        i = rng.integers(0, len(lam), cfg.pairs)
        j = rng.integers(0, len(lam) - 1, cfg.pairs)
        j = j + (j >= i)
        closed = spectra.pair_orthogonality_batch(body, lam.points[i], lam.points[j])
        viaherz = spectra.pair_orthogonality_batch(body, lam.points[i], lam.points[j], herz)
        worst_closed = max(worst_closed, float(closed.max()))
        worst_herz = max(worst_herz, float(viaherz.max()))
        entropy.append((R, res.entropy_lower))
        rep.rows.append(dict(res.summary(), spectrum_points=len(lam), min_gap=spectra.min_gap(lam),
                             pairs_max_closed=float(closed.max()), pairs_max_herz=float(viaherz.max())))
    fit = packing.fit_exponent(entropy)
    rep.summary = {"exponent_lower": fit.slope, "fit_residual": fit.residual,
                   "pairs_max_closed": worst_closed, "pairs_max_herz": worst_herz,
                   "max_membership_residual": max(max(r["max_residual_xi"], r["max_residual_shift"]) for r in rep.rows),
                   "max_zero_distance": max(r["max_zero_distance"] for r in rep.rows)}
    rep.checks.append(check("entropy exponent", fit.slope, ">=", SPECTRUM_MIN_EXPONENT))
    rep.checks.append(check("closed-form orthogonality", worst_closed, "<=", 0.0))
    rep.checks.append(check("boundary-formula orthogonality", worst_herz, "<=", HERZ_ORTHOGONALITY_ATOL))
    rep.checks.append(check("membership residual", rep.summary["max_membership_residual"], "<=", spectra.MEMBERSHIP_ATOL))
    return rep


def _dist_pi_z(x):
    """dist(x, pi Z) / pi."""
    y = np.asarray(x) / math.pi
    return np.abs(y - np.round(y))


def residual_statistics(body, xi, eta, offset):
    """s1 = |cos phase(xi)|, s2 and s3 the near-integrality of the phase increment."""
    xi = np.atleast_2d(xi)
    eta = np.asarray(eta, dtype=float)
    s1 = np.abs(np.cos(phase_phase(body, xi, offset)))
    dP = np.asarray(geometry.support(body, xi + eta)) - np.asarray(geometry.support(body, xi))
    s2 = _dist_pi_z(2 * math.pi * dP)
    grad = geometry.gauss_point(body, xi)
    s3 = _dist_pi_z(2 * math.pi * (grad @ eta))
    return s1, s2, s3


def run_residual_stats(cfg):
    """Percentiles of the phase residuals on X samples, and a midway negative control."""
    cfg, body, offset = cfg.resolve()
    if not body.is_smooth:
        raise ConfigError(f"residual statistics need a smooth body, got {body.label}", key="body")
    cone = geometry.NormalCone(cfg.cone_axis, cfg.cone_half_angle)
    rep = _new_report(cfg, body, offset, ball_placement=f"center at {cfg.distance_factor:g} R along the cone axis")
    evaluator = best_evaluator(body)
    p90 = {k: [] for k in ("s1", "s2", "s3", "s2_minus_s3", "control_s1")}
    for R in cfg.R:
        B = geometry.ball_in_cone(cone, R, cfg.distance_factor)
        zs = zeroset.shell_index(body, cone, B, evaluator=evaluator, c=cfg.c_angle)
        stats = {k: [] for k in p90}
        for eta in cfg.eta:
            xs = zeroset.x_set(body, eta, B, zeros=zs, evaluator=evaluator, c=cfg.c_angle, c_delta=cfg.c_delta)
            if not len(xs):
                continue
            s1, s2, s3 = residual_statistics(body, xs.points, eta, offset)
            u = xs.zeros.directions
            mid = xs.points + (0.25 / np.asarray(geometry.support(body, u)))[:, None] * u
            stats["s1"].append(s1)
            stats["s2"].append(s2)
            stats["s3"].append(s3)
            stats["s2_minus_s3"].append(np.abs(s2 - s3))
            stats["control_s1"].append(residual_statistics(body, mid, eta, offset)[0])
        row = {"R": R}
        for k, parts in stats.items():
            vals = np.concatenate(parts) if parts else np.zeros(0)
            row[f"{k}_p90"] = float(np.percentile(vals, 90)) if vals.size else math.nan
            p90[k].append((R, row[f"{k}_p90"]))
        row["samples"] = int(sum(len(p) for p in stats["s1"]))
        rep.rows.append(row)
    summary = {}
    for k, rows in p90.items():
        try:
            summary[f"{k}_decay_exponent"] = -packing.fit_exponent(rows).slope
        except ConvexZerosError:
            summary[f"{k}_decay_exponent"] = math.nan
    rep.summary = summary
    for k in ("s1", "s2", "s3", "s2_minus_s3"):
        rep.checks.append(check(f"{k} p90 decay", summary[f"{k}_decay_exponent"], ">=", RESIDUAL_MIN_DECAY))
    control_min = min(v for _, v in p90["control_s1"])
    summary["control_min_p90"] = control_min
    rep.checks.append(check("control p90 stays large", control_min, ">=", CONTROL_MIN_P90))
    rep.checks.append(check("control does not decay", summary["control_s1_decay_exponent"], "<=", 0.1))
    return rep


DRIVERS = {
    "oracle-check": run_oracle_check,
    "model-error": run_model_error,
    "shells": run_shells,
    "xset-entropy": run_xset_entropy,
    "cube-spectrum": run_cube_spectrum,
    "residual-stats": run_residual_stats,
}


def run_experiment(cfg):
    return DRIVERS[cfg.experiment](cfg)
