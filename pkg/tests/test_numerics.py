import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitpulse.errors import DomainError, IntegrationError
from sitpulse.numerics import (
    Grid,
    cumtrapz,
    fd_derivative,
    fd_second_derivative,
    rk4_integrate,
    rk4_step,
    rk45_integrate,
    stage_lookup,
)


def decay(t, x):
    return -x


def exp_error(h):
    grid = Grid(0.0, 1.0, int(round(1.0 / h)) + 1)
    y, _ = rk4_integrate(decay, np.array(1.0), grid)
    return abs(y[-1] - math.exp(-1.0))


def test_grid_basics():
    g = Grid(0.0, 5.0, 11)
    assert g.h == pytest.approx(0.5)
    assert g.tau[-1] == 5.0
    assert len(g) == 11
    assert Grid.with_max_step(0.0, 1.0, 0.3).h <= 0.3


@pytest.mark.parametrize("args", [(0.0, 1.0, 1), (1.0, 0.0, 5), (0.0, math.inf, 5)])
def test_grid_rejects_bad_definitions(args):
    with pytest.raises(DomainError):
        Grid(*args)


def test_grid_digest_is_stable():
    assert Grid(0.0, 1.0, 11).digest() == Grid(0.0, 1.0, 11).digest()
    assert Grid(0.0, 1.0, 11).digest() != Grid(0.0, 1.0, 12).digest()


def test_rk4_zero_rhs_leaves_state():
    y = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(rk4_step(lambda t, x: np.zeros_like(x), y, 0.0, 0.1), y)


def test_rk4_exponential():
    assert exp_error(1e-3) < 1e-10


def test_rk4_richardson_ratio():
    ratio = exp_error(0.1) / exp_error(0.05)
    assert ratio == pytest.approx(16.0, rel=0.05)


def test_rk4_complex_state():
    grid = Grid(0.0, math.pi, 2001)
    y, report = rk4_integrate(lambda t, z: 1j * z, np.array(1.0 + 0j), grid)
    assert abs(y[-1] - (-1.0)) < 1e-12
    assert report.steps == 2000
    assert report.max_rhs_norm == pytest.approx(1.0)


def test_rk4_non_finite_reports_location():
    grid = Grid(0.0, 1.0, 11)

    def blowup(t, x):
        return np.array(np.inf) if t > 0.45 else x

    with pytest.raises(IntegrationError) as info:
        rk4_integrate(blowup, np.array(1.0), grid)
    assert 0.4 <= info.value.tau <= 0.6


def test_rk45_agrees_with_rk4():
    grid = Grid(0.0, 2.0, 21)
    y45, rep = rk45_integrate(decay, np.array([1.0]), grid)
    assert np.allclose(y45[:, 0], np.exp(-grid.tau), atol=1e-9)
    assert rep.method == "rk45" and rep.rejected_steps >= 0


def test_cumtrapz_examples():
    g = Grid(0.0, 5.0, 6)
    assert cumtrapz(np.ones(6), g)[-1] == pytest.approx(5.0)
    g = Grid(0.0, 2.0, 9)
    assert cumtrapz(g.tau, g)[-1] == pytest.approx(2.0)
    g = Grid(0.0, math.pi, 10_000)
    out = cumtrapz(np.sin(g.tau), g)
    assert out[0] == 0.0
    assert abs(out[-1] - 2.0) < 1e-7


def test_cumtrapz_length_mismatch():
    with pytest.raises(DomainError):
        cumtrapz(np.ones(4), Grid(0.0, 1.0, 5))


def test_cumtrapz_order_two():
    errs = []
    for n in (101, 201):
        g = Grid(0.0, 1.0, n)
        errs.append(abs(cumtrapz(np.exp(g.tau), g)[-1] - (math.e - 1)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.2)


def test_fd_derivative_examples():
    g = Grid(0.0, 1.0, 11)
    assert np.allclose(fd_derivative(3.0 * g.tau + 1.0, g), 3.0)
    assert np.allclose(fd_derivative(np.full(11, 7.0), g), 0.0)
    g = Grid(0.0, 2 * math.pi, 2001)
    assert np.max(np.abs(fd_derivative(np.sin(g.tau), g) - np.cos(g.tau))) < 2 * g.h**2
    with pytest.raises(DomainError):
        fd_derivative([1.0, 2.0], Grid(0.0, 1.0, 2))


def test_fd_second_derivative_polynomial_exact():
    g = Grid(-1.0, 1.0, 21)
    assert np.allclose(fd_second_derivative(g.tau**2, g), 2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(-1.0, 1.0))
def test_fd_of_cumtrapz_recovers_integrand(freq, shift):
    g = Grid(0.0, 3.0, 3001)
    f = np.cos(freq * g.tau + shift)
    back = fd_derivative(cumtrapz(f, g), g)
    assert np.max(np.abs(back[1:-1] - f[1:-1])) < 10 * (freq * g.h) ** 2


def test_stage_lookup_serves_nodes_midpoints_and_other_times():
    g = Grid(0.0, 1.0, 11)
    calls = []

    def f(t):
        calls.append(np.size(t))
        return np.sin(t), np.cos(t)

    look = stage_lookup(f, g)
    assert calls == [21]
    assert look(0.35)[0] == pytest.approx(math.sin(0.35))
    assert look(1.0)[1] == pytest.approx(math.cos(1.0))
    assert calls == [21]
    assert look(0.33)[0] == pytest.approx(math.sin(0.33))
    assert calls == [21, 1]
