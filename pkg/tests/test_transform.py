import math

import mpmath
import numpy as np
import pytest

from convexzeros import geometry as g
from convexzeros import transform as tr
from convexzeros.errors import (
    ConeViolationError, DegenerateCurvatureError, DomainError, MethodUnavailableError, ResolutionError,
)

from conftest import ball_transform_oracle, bessel_zeros_bisection, cube_transform_oracle, rounded_square_oracle

DISC = g.make_body("ball", 2)
SQUARE = g.make_body("cube", 2)
ELLIPSE = g.make_body("ellipsoid", axes=(2.0, 1.0))
ROUNDED = g.make_body("rounded-square", 2)


@pytest.mark.parametrize("nu", [1, 1.5, 2])
def test_scaled_bessel_against_mpmath(nu):
    for z in (0.0, 1e-8, 9.9e-4, 1e-3, 0.5, 7.0, 150.0, 2500.0):
        ref = mpmath.besselj(nu, z) / (mpmath.mpf(z) / 2) ** nu if z else 1 / mpmath.gamma(nu + 1)
        assert tr.bessel_j_scaled(nu, z) == pytest.approx(float(ref), rel=1e-12, abs=1e-300)


def test_closed_form_examples():
    assert tr.chi_hat_closed(SQUARE, (0, 0)) == 1.0
    assert tr.chi_hat_closed(SQUARE, (1, 0)) == 0.0
    j11 = bessel_zeros_bisection(1, 1)[0]
    assert j11 == pytest.approx(3.8317, abs=1e-4)
    assert abs(tr.chi_hat_closed(DISC, (j11 / (2 * math.pi), 0))) <= 1e-6
    assert tr.chi_hat_closed(DISC, (0, 0)) == pytest.approx(math.pi)
    with pytest.raises(MethodUnavailableError):
        tr.chi_hat_closed(ROUNDED, (1, 0))


@pytest.mark.parametrize("body", [DISC, g.make_body("ball", 3, radius=0.8), SQUARE, g.make_body("cube", 3, half_side=0.7),
                                  ELLIPSE, g.make_body("ellipsoid", axes=(1.5, 1.0, 0.7))], ids=lambda b: b.label)
def test_closed_form_against_mpmath(body):
    rng = np.random.default_rng(7)
    xis = rng.normal(size=(25, body.dim)) * 6
    got = tr.chi_hat_closed(body, xis)
    if body.kind == "ball":
        ref = [ball_transform_oracle(x, body.radius) for x in xis]
    elif body.kind == "cube":
        ref = [cube_transform_oracle(x, body.half_side) for x in xis]
    else:
        # a linear image of the unit ball: chi_hat(xi) = prod(a) chi_ball(a * xi)
        a = np.asarray(body.axes)
        ref = [np.prod(a) * ball_transform_oracle(a * x) for x in xis]
    assert np.max(np.abs(got - ref)) < 1e-12


def test_quadrature_examples():
    assert tr.chi_hat_quadrature(DISC, (0, 0), 256) == pytest.approx(math.pi, abs=1e-3)
    assert tr.chi_hat_quadrature(SQUARE, (0.5, 0), 256) == pytest.approx(2 / math.pi, abs=1e-4)
    ball3 = g.make_body("ball", 3)
    assert tr.chi_hat_quadrature(ball3, (1, 0, 0), 128) == pytest.approx(tr.chi_hat_closed(ball3, (1, 0, 0)), abs=1e-3)
    with pytest.raises(ResolutionError):
        tr.chi_hat_quadrature(DISC, (1, 0), 16)
    with pytest.raises(MethodUnavailableError):
        tr.chi_hat_quadrature(g.make_body("ball", 4), (1, 0, 0, 0), 64)


def test_quadrature_converges_with_n():
    xi = (3.3, -1.2)
    ref = ball_transform_oracle(xi)
    errs = [abs(tr.chi_hat_quadrature(DISC, xi, n) - ref) for n in (32, 64, 128)]
    assert errs[-1] <= errs[0] and errs[-1] < 1e-10


def test_herz_examples():
    assert tr.herz_boundary(DISC, (2, 0), 2048) == pytest.approx(tr.chi_hat_closed(DISC, (2, 0)), abs=1e-8)
    assert tr.herz_boundary(SQUARE, (1.5, 0.5), 2048) == pytest.approx(cube_transform_oracle((1.5, 0.5)), abs=1e-8)
    assert tr.herz_boundary(DISC, (1e-3, 0), 4096) == pytest.approx(math.pi, abs=1e-2)
    with pytest.raises(DomainError):
        tr.herz_boundary(DISC, (0, 0), 2048)


@pytest.mark.parametrize("body", [DISC, SQUARE, ELLIPSE, ROUNDED, g.make_body("ball", 3), g.make_body("cube", 3)],
                         ids=lambda b: b.label)
def test_herz_is_real_for_symmetric_bodies(body):
    rng = np.random.default_rng(8)
    xis = rng.normal(size=(20, body.dim)) * 4
    z = tr.herz_boundary_complex(body, xis, 1024)
    assert np.max(np.abs(z.imag)) <= 1e-9 * max(1.0, np.max(np.abs(z.real)))


def test_rounded_square_routes_against_mpmath():
    xis = [(0.7, 0.2), (3.1, -2.4), (-6.5, 1.1), (12.0, 9.0)]
    ref = np.array([rounded_square_oracle(x) for x in xis])
    for ev in (tr.TransformEvaluator(ROUNDED, "herz"), tr.TransformEvaluator(ROUNDED, "herz", 2048)):
        assert np.max(np.abs(ev(np.array(xis)) - ref)) < 1e-9
    # volume quadrature is meant for |xi| <= 10
    quad = tr.TransformEvaluator(ROUNDED, "quadrature", 256)
    assert np.max(np.abs(quad(np.array(xis[:3])) - ref[:3])) < 1e-9
    # at the origin the transform is the area (2s)^2 - (4 - pi) rho^2
    assert tr.chi_hat_quadrature(ROUNDED, (0, 0)) == pytest.approx(4 - (4 - math.pi) / 16, abs=1e-12)


def test_rounded_square_at_high_frequency_against_mpmath():
    xi = (250.0, 230.0)
    assert tr.rounded_square_transform(ROUNDED, xi) == pytest.approx(rounded_square_oracle(xi), abs=1e-12)


def test_rounded_square_ray_expansions():
    ev = tr.best_evaluator(ROUNDED)
    u = np.array([math.cos(0.6), math.sin(0.6)])
    ray = ev.ray(u, 420.0)
    t = np.linspace(300.0, 420.0, 1201)
    direct = tr.rounded_square_transform(ROUNDED, t[:, None] * u)
    assert np.max(np.abs(ray.grid(t) - direct)) < 1e-15
    rows = np.arange(t.size - 1)
    x = t[:-1] + 0.61 * (t[1] - t[0])
    local = ray.local(rows)
    assert np.max(np.abs(local(x, rows) - tr.rounded_square_transform(ROUNDED, x[:, None] * u))) < 1e-15
    # axis directions fall back to pointwise evaluation
    assert type(ev.ray(np.array([1.0, 0.0]), 10.0)) is tr.RayFunction


def test_cutoff_window():
    w = tr.CutoffWindow((1.0, 0.0), 0.5, order=4)
    assert w((1.0, 0.0)) == 1.0
    assert w((1.0, 0.6)) == 0.0
    # C^(order-1): the third difference quotient stays bounded across the edge of the support
    t = np.linspace(0.2, 0.6, 4001)
    vals = w(np.stack([np.ones_like(t), t], -1))
    d3 = np.diff(vals, 3) / (t[1] - t[0]) ** 3
    assert np.all(np.isfinite(d3)) and np.max(np.abs(d3)) < 1e4
    with pytest.raises(DomainError):
        tr.CutoffWindow((1, 0), 0.5, order=1)


def test_localized_boundary_examples():
    w = tr.CutoffWindow((1.0, 0.0), 0.5, order=4)
    r20 = tr.localized_boundary(DISC, (20.0, 0.0), w)
    assert r20.remainder <= 1e-3
    # decay: compare envelopes (max over one oscillation period) at R = 20 and 40
    env = lambda R: max(tr.localized_boundary(DISC, (R + k / 16, 0.0), w).remainder for k in range(16))
    assert env(20.0) >= 4 * env(40.0)
    with pytest.raises(ConeViolationError):
        tr.localized_boundary(DISC, (0.0, 20.0), w)


def test_localized_value_matches_full_integral_imaginary_part():
    w = tr.CutoffWindow((1.0, 0.0), 0.5, order=4)
    xi = (30.0, 1.0)
    loc = tr.localized_boundary(DISC, xi, w)
    full = 2 * math.pi * np.linalg.norm(xi) * ball_transform_oracle(xi)
    assert loc.value == pytest.approx(full, abs=2 * loc.remainder + 1e-9)


def test_phase_model_examples():
    for R in (10.0, 20.0, 40.0):
        m = tr.phase_model_eval(DISC, (R, 0.0))
        expect = R ** -1.5 / math.pi * math.cos(2 * math.pi * R - 3 * math.pi / 4)
        assert m.value == pytest.approx(expect, abs=1e-14)
        assert abs(m.value - ball_transform_oracle((R, 0.0))) <= 2 * R ** -2.5
    ball3 = g.make_body("ball", 3)
    for R in (10.0, 20.0, 40.0):
        assert abs(tr.phase_model_eval(ball3, (R, 0, 0)).value - ball_transform_oracle((R, 0, 0))) <= 3 * R ** -3
    m = tr.phase_model_eval(ELLIPSE, (40.0, 0.0))
    assert m.amplitude == pytest.approx(math.sqrt(0.5) / math.pi * 40 ** -1.5, rel=1e-12)
    with pytest.raises(DegenerateCurvatureError):
        tr.phase_model_eval(SQUARE, (10.0, 3.0))
    with pytest.raises(DegenerateCurvatureError):
        tr.phase_model_eval(ROUNDED, (10.0, 0.0))
    with pytest.raises(DomainError):
        tr.phase_model_eval(DISC, (1.0, 0.0))


def test_calibrated_offset_is_small_and_shared():
    phi0 = tr.calibrate_phase_offset()
    assert abs(phi0) < 1e-3
    # the same offset serves the d=3 ball and the ellipse
    for body, R in ((g.make_body("ball", 3), 40.0), (ELLIPSE, 40.0)):
        t = R + np.linspace(0, 1, 64, endpoint=False) / g.support(body, np.eye(body.dim)[0])
        xi = t[:, None] * np.eye(body.dim)[0]
        exact = tr.chi_hat_closed(body, xi)
        model = tr.phase_model_eval(body, xi, phi0)
        assert np.max(np.abs(exact - model.value)) < 0.05 * np.max(model.amplitude)


def test_cos_residual_examples():
    zeros = bessel_zeros_bisection(1, 130) / (2 * math.pi)
    r0 = zeros[np.argmin(np.abs(zeros - 20))]
    phi0 = tr.calibrate_phase_offset()
    assert tr.cos_residual(DISC, (r0, 0.0), phi0) <= 0.05
    nxt = zeros[np.argmin(np.abs(zeros - 20)) + 1]
    assert tr.cos_residual(DISC, (0.5 * (r0 + nxt), 0.0), phi0) >= 0.9
    # a point where the phase is exactly pi/2
    R = (0.5 + 3 / 4) / 2 + 10
    assert tr.cos_residual(DISC, (R, 0.0)) == pytest.approx(0.0, abs=1e-12)


def test_evaluator_strategy_and_batch_csv(tmp_path):
    with pytest.raises(DomainError):
        tr.TransformEvaluator(DISC, "magic")
    with pytest.raises(MethodUnavailableError):
        tr.TransformEvaluator(ROUNDED, "closed")
    assert tr.best_evaluator(DISC).method == "closed"
    assert tr.best_evaluator(ROUNDED).method == "herz"
    src = tmp_path / "xi.csv"
    src.write_text("xi1,xi2\n1.0,0.5\n2.0,-1.0\n")
    xis = tr.read_vectors_csv(src, 2)
    rows = tr.evaluate_batch(DISC, xis, methods=("closed", "quadrature"), n=128)
    out = tmp_path / "out.csv"
    tr.write_batch_csv(out, DISC, rows)
    lines = out.read_text().splitlines()
    assert lines[0] == "xi1,xi2,method,value,resolution"
    assert len(lines) == 5
    vals = {(r[0], r[2]): r[3] for r in rows}
    assert vals[(1.0, "closed")] == pytest.approx(vals[(1.0, "quadrature")], abs=1e-10)
