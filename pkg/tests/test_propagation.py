import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sitpulse.bath import DecoherenceProfile
from sitpulse.errors import DomainError, ResolutionError
from sitpulse.lindblad import ResponseFactor
from sitpulse.numerics import Grid, cumtrapz
from sitpulse.propagation import (
    PRINTED_PREFACTOR,
    PropagationParams,
    PulseState,
    area_closed_form,
    delay_time,
    envelope_closed_form,
    envelope_phase_rhs,
    envelope_vs_oracle,
    pendulum_area_integrate,
    pendulum_frequency,
    pendulum_residual,
    peak_amplitude,
    phase_closed_form,
    phase_rate_closed_form,
    propagate_envelope_phase,
    ramification_surface,
    retarded_velocity,
    ridge_trace,
)

TWO_PI = 2 * math.pi


def test_params_validation_and_delay():
    p = PropagationParams(M=2.0, area0=math.pi)
    assert p.tau_d == pytest.approx(math.log(math.tan(math.pi / 4)) / 2.0)
    with pytest.raises(TypeError):
        PropagationParams(1.0, 1.0, 0.0, 0.5, 1.0, 0.0, 2.0, 5.0)
    for bad in ({"M": 0.0}, {"v_over_c": 1.0}, {"c0": -1e-3}, {"mu": 0.0}, {"area0": math.nan}):
        with pytest.raises(DomainError):
            PropagationParams(**{"M": 1.0, "area0": 1.0, **bad})
    assert math.isnan(delay_time(TWO_PI, 1.0))


def test_pendulum_frequency_helper():
    assert pendulum_frequency(1.0, 2.0, 1.0, 0.5, 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        pendulum_frequency(1.0, 1.0, 1.0, 1.5, 1.0)


def test_pulse_state_area_is_cumulative_trapezoid():
    g = Grid(0.0, 2.0, 201)
    ps = PulseState.from_envelope(g, np.ones(g.n), mu=0.5, area0=1.0)
    assert ps.area[-1] == pytest.approx(2.0)
    with pytest.raises(DomainError):
        PulseState.from_envelope(g, -np.ones(g.n))


def test_rhs_transparent_fixed_point():
    p = PropagationParams(M=1.3, area0=1.0)
    dE, dphi = envelope_phase_rhs(0.4, ResponseFactor.from_closed_form(0.0, TWO_PI), p)
    assert dE == pytest.approx(0.0, abs=1e-15) and dphi == 0.0


def test_rhs_maximal_absorption_and_dephasing():
    p = PropagationParams(M=1.3, area0=1.0, mu=0.7)
    dE, dphi = envelope_phase_rhs(0.4, ResponseFactor.from_closed_form(0.0, math.pi / 2), p)
    assert dE == pytest.approx(1.3**2 / 0.7) and dphi == 0.0
    _, dphi = envelope_phase_rhs(0.4, ResponseFactor.from_closed_form(2.0, math.pi / 2), p)
    assert dphi == pytest.approx(1.3**2 / (0.7 * 0.4) * (1 - math.exp(-2)))


def test_rhs_sign_consistency():
    p = PropagationParams(M=1.0, area0=1.0)
    assert envelope_phase_rhs(1.0, ResponseFactor(0.0, -0.3, 0.0, 0.0), p)[0] > 0
    assert envelope_phase_rhs(1.0, ResponseFactor(0.0, 0.3, 0.0, 0.0), p)[0] < 0


def test_rhs_phase_held_below_floor():
    p = PropagationParams(M=1.0, area0=1.0)
    F = ResponseFactor.from_closed_form(1.0, 1.0)
    assert envelope_phase_rhs(1e-12, F, p, held_phase_rate=0.42)[1] == 0.42


@pytest.mark.parametrize("k", [0, 1, 2, -1])
@pytest.mark.parametrize("gamma", [None, lambda t: 0.3 * t])
def test_fixed_points_are_stationary(k, gamma):
    g = Grid(0.0, 50.0, 501)
    area = pendulum_area_integrate(PropagationParams(M=1.0, area0=k * TWO_PI), gamma, g)
    assert np.max(np.abs(area - k * TWO_PI)) <= 1e-9


def test_area_from_pi_relaxes_to_two_pi():
    g = Grid(0.0, 30.0, 30001)
    area = pendulum_area_integrate(PropagationParams(M=1.0, area0=math.pi), None, g)
    assert np.all(np.diff(area) >= 0)
    assert area[-1] == pytest.approx(TWO_PI, abs=1e-9)
    # fine-step RK4 against the closed form of the lossless flow
    assert np.max(np.abs(area - area_closed_form(PropagationParams(M=1.0, area0=math.pi), g.tau))) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, TWO_PI - 0.01), st.floats(0.0, 0.05), st.floats(0.3, 3.0))
def test_principal_branch_area_monotone_and_bounded(a0, c0, M):
    g = Grid(0.0, 20.0 / M, 801)
    p = PropagationParams(M=M, area0=a0, c0=c0)
    area = pendulum_area_integrate(p, DecoherenceProfile.constant_rate(c0, g), g)
    assert np.all(np.diff(area) >= -1e-12)
    assert np.all(area <= TWO_PI + 1e-12)


@settings(max_examples=30)
@given(st.floats(0.05, 4 * math.pi - 0.05).filter(lambda a: abs(a - TWO_PI) > 0.05))
def test_closed_form_area_satisfies_lossless_flow(a0):
    g = Grid(0.0, 6.0, 601)
    p = PropagationParams(M=1.0, area0=a0)
    area = area_closed_form(p, g.tau)
    assert area[0] == pytest.approx(a0, abs=1e-12)
    rk4 = pendulum_area_integrate(p, None, g)
    assert np.max(np.abs(area - rk4)) < 1e-8


def test_pendulum_residual_of_closed_form():
    M = 1.0
    g = Grid(0.0, 20.0, 20001)
    area = area_closed_form(PropagationParams(M=M, area0=0.5), g.tau)
    assert np.max(np.abs(pendulum_residual(area, g, M))) < 1e-6 * M**2


def test_closed_form_envelope_area_and_prefactor():
    # calibrated prefactor: mu * int E over (-inf, inf) of the full soliton is 2 pi
    M, mu = 1.7, 0.8
    p = PropagationParams(M=M, area0=math.pi, mu=mu)
    shift = p.tau_d
    total = quad(lambda t: mu * envelope_closed_form(p, t - shift), -40.0, 40.0, limit=200)[0]
    assert total == pytest.approx(TWO_PI, abs=1e-9)
    printed = p.with_(prefactor=PRINTED_PREFACTOR)
    assert envelope_closed_form(printed, 0.3) == pytest.approx(2 * envelope_closed_form(p, 0.3))


def test_asymptotic_area_gain_matches_oracle():
    M = 1.0
    p = PropagationParams(M=M, area0=math.pi)
    g = Grid(0.0, 40.0, 40001)
    gain = p.mu * cumtrapz(envelope_closed_form(p, g.tau), g)[-1]
    oracle = pendulum_area_integrate(p, None, g)[-1] - p.area0
    assert abs(gain - oracle) < 1e-3


def test_envelope_closed_form_branches():
    assert np.all(envelope_closed_form(PropagationParams(M=1.0, area0=TWO_PI), [0.0, 1.0]) == 0)
    with pytest.raises(DomainError):
        envelope_closed_form(PropagationParams(M=1.0, area0=3 * math.pi), 0.0)


@pytest.mark.parametrize("c0", [1.25e-3, 1.25e-2, 0.1])
def test_peak_decay_is_log_affine(c0):
    p = PropagationParams(M=1.0, area0=math.pi, c0=c0)
    tau = np.linspace(0.0, 40.0, 41)
    slope = np.diff(np.log(peak_amplitude(p, tau))) / np.diff(tau)
    assert np.max(np.abs(slope + c0)) <= 1e-10


def test_retarded_velocity():
    assert retarded_velocity(0.5, 0.0, 7.0) == 0.5
    assert retarded_velocity(0.5, 0.1, 10 * math.log(2)) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        retarded_velocity(0.5, -0.1, 1.0)


def test_phase_without_environment_is_constant():
    g = Grid(0.0, 5.0, 51)
    assert np.all(phase_closed_form(PropagationParams(M=1.0, area0=1.0), g, phi0=0.7) == 0.7)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(0.2, 5.0), st.floats(0.05, TWO_PI - 0.05))
def test_phase_monotone(c0, M, a0):
    g = Grid(0.0, 10.0, 201)
    phase = phase_closed_form(PropagationParams(M=M, area0=a0, c0=c0), g)
    assert np.all(np.diff(phase) >= 0)
    assert np.all(phase_rate_closed_form(PropagationParams(M=M, area0=a0, c0=c0), g.tau) >= 0)


def test_phase_rate_agrees_with_phase_equation():
    # dphi/dtau = M^2 (1 - exp(-Gamma)) / (mu E) along the closed-form pulse
    p = PropagationParams(M=1.2, area0=2.0, c0=0.02, mu=0.9)
    tau = np.linspace(0.0, 8.0, 9)
    expected = p.M**2 * -np.expm1(-4 * p.c0 * tau) / (p.mu * envelope_closed_form(p, tau))
    assert np.allclose(phase_rate_closed_form(p, tau), expected, rtol=1e-12, atol=1e-15)


def test_phase_ordering_with_gamma():
    g = Grid(0.0, 4.0, 401)
    phases = [phase_closed_form(PropagationParams(M=1.0, area0=math.pi, c0=gm * 1e-3 / 4), g)
              for gm in (5, 50, 100, 150)]
    for lo, hi in zip(phases, phases[1:]):
        assert np.all(hi >= lo) and hi[-1] > lo[-1]


def test_transparent_envelope_preserved():
    M = 1.0
    g = Grid(0.0, 100.0 / M, 2001)
    p = PropagationParams(M=M, area0=TWO_PI)
    state = propagate_envelope_phase(0.8, 0.1, lambda t: TWO_PI, None, p, g)
    assert np.max(np.abs(state.envelope - 0.8)) < 1e-8
    assert np.all(state.phase == 0.1)


def test_absorbing_pulse_grows_at_sub_pi_area():
    g = Grid(0.0, 1.0, 101)
    p = PropagationParams(M=1.0, area0=1.0)
    state = propagate_envelope_phase(0.1, 0.0, lambda t: math.pi / 2, None, p, g)
    assert state.envelope[-1] == pytest.approx(1.1)


def test_envelope_vs_oracle_lossless_and_weak_decay():
    g = Grid(0.0, 30.0, 6001)
    assert envelope_vs_oracle(PropagationParams(M=1.0, area0=0.01), g).max_rel_dev <= 1e-4
    assert envelope_vs_oracle(PropagationParams(M=1.0, area0=0.01, c0=0.01), g).max_rel_dev <= 1e-3


def test_envelope_vs_oracle_strong_decay_is_only_reported():
    g = Grid(0.0, 20.0, 2001)
    dev = envelope_vs_oracle(PropagationParams(M=1.0, area0=0.5, c0=1.0), g).max_rel_dev
    assert math.isfinite(dev)


def lab_surface(c0=1.25e-3, area0=3 * math.pi, step=0.02):
    M = 1.0
    t = np.arange(0.0, 20.0 + step / 2, step)
    x = np.arange(-6.0, 26.0 + step / 2, step)
    return ramification_surface(PropagationParams(M=M, area0=area0, c0=c0), x, t)


def test_ramification_two_ridges_separate():
    tr = ridge_trace(lab_surface(c0=0.02))
    assert np.all(np.diff(tr.separation) > 0)
    assert np.max(np.abs(tr.height_transparent / tr.height_transparent[0] - 1)) < 1e-6
    assert np.max(np.abs(tr.velocity_remainder - np.exp(-0.02 * tr.t))) < 1e-3


def test_ramification_transparent_diagonal_invariant():
    s = lab_surface()
    M = s.params.M
    # each constant (t - x/v) diagonal of the transparent part is the local-time profile
    ret = s.t[:, None] - s.x_over_v[None, :]
    amp = s.params.prefactor * M / s.params.mu
    assert np.allclose(s.transparent, amp / np.cosh(M * ret), rtol=1e-12, atol=0)


def test_ramification_rejects_bad_inputs():
    with pytest.raises(DomainError):
        lab_surface(area0=TWO_PI)
    with pytest.raises(ResolutionError):
        lab_surface(step=0.5)


def test_single_component_below_two_pi():
    s = lab_surface(area0=math.pi)
    assert s.n_transparent == 0 and np.all(s.transparent == 0)
    tr = ridge_trace(s)
    assert np.all(np.isnan(tr.x_peak_transparent))
