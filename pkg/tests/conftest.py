"""Shared independent oracles for the test suite.

Everything here is computed with mpmath at extended precision and without
touching the package's own numerics.
"""


import mpmath
import numpy as np
import pytest

mpmath.mp.dps = 30

ACCEPTANCE_LINES = []


def bessel_zeros_bisection(order, count):
    """First ``count`` positive zeros of J_order by scanning and bisection in mpmath."""
    f = lambda x: mpmath.besselj(order, x)
    zeros = []
    step = mpmath.mpf("0.25")
    x = mpmath.mpf("0.5")
    fx = f(x)
    while len(zeros) < count:
        y = x + step
        fy = f(y)
        if fx * fy < 0:
            a, b, fa = x, y, fx
            for _ in range(80):
                m = (a + b) / 2
                fm = f(m)
                if fa * fm <= 0:
                    b = m
                else:
                    a, fa = m, fm
            zeros.append(float((a + b) / 2))
        x, fx = y, fy
    return np.array(zeros)


def ball_transform_oracle(xi, radius=1.0):
    """chi_hat of a ball in d = len(xi), from mpmath's Bessel function."""
    xi = [mpmath.mpf(float(v)) for v in xi]
    d = len(xi)
    k = mpmath.sqrt(sum(v * v for v in xi))
    r = mpmath.mpf(radius)
    if k == 0:
        return float(mpmath.pi ** (mpmath.mpf(d) / 2) / mpmath.gamma(mpmath.mpf(d) / 2 + 1) * r ** d)
    return float(r ** d * (r * k) ** (-mpmath.mpf(d) / 2) * mpmath.besselj(mpmath.mpf(d) / 2, 2 * mpmath.pi * r * k))


def cube_transform_oracle(xi, half_side=0.5):
    out = mpmath.mpf(1)
    for v in xi:
        v = mpmath.mpf(float(v))
        out *= 2 * half_side if v == 0 else mpmath.sin(2 * mpmath.pi * half_side * v) / (mpmath.pi * v)
    return float(out)


def rounded_square_oracle(xi, half_side=1.0, rho=0.25):
    """Volume integral with the x2 integral done exactly and mpmath quadrature in x1."""
    x1i, x2i = (mpmath.mpf(float(v)) for v in xi)
    s, r = mpmath.mpf(half_side), mpmath.mpf(rho)
    a = s - r

    def height(x):
        ax = abs(x)
        return s if ax <= a else a + mpmath.sqrt(max(r * r - (ax - a) ** 2, 0))

    def inner(x):
        h = height(x)
        fac = 2 * h if x2i == 0 else mpmath.sin(2 * mpmath.pi * h * x2i) / (mpmath.pi * x2i)
        return mpmath.cos(2 * mpmath.pi * x * x1i) * fac

    # the integrand is even in x; split [0, s] so each piece holds about half an oscillation
    n = int(2 * abs(float(x1i)) * float(s)) + 4
    pts = sorted({float(v) for v in np.linspace(0, float(a), n)} | {float(v) for v in np.linspace(float(a), float(s), n)})
    return float(2 * mpmath.quad(inner, [mpmath.mpf(v) for v in pts]))


def ray_root_near(f_of_t, t0, halfwidth, n=64):
    """Roots of a scalar mpmath-callable in [t0 - halfwidth, t0 + halfwidth], by scan + findroot."""
    ts = np.linspace(t0 - halfwidth, t0 + halfwidth, n + 1)
    vals = [f_of_t(t) for t in ts]
    roots = []
    for a, b, fa, fb in zip(ts[:-1], ts[1:], vals[:-1], vals[1:]):
        if fa == 0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(float(mpmath.findroot(f_of_t, (mpmath.mpf(a), mpmath.mpf(b)), solver="anderson")))
    return roots


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
