"""Pulse envelope, phase and area in the co-moving frame ``tau = t - x/v``.

The area obeys the damped first-order pendulum law
``dA/dtau = 2 M exp(-Gamma/4) sin(A/2)`` whose exact solution is
``tan(A/4) = exp(u)`` with ``u = M (int exp(-Gamma/4) ds + tau_D)``. The
envelope is ``(1/mu) dA/dtau``. In the constant-rate regime
``Gamma = 4 C0 (tau - tau0)`` everything is available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .bath import DecoherenceProfile
from .errors import DomainError, ResolutionError
from .lindblad import ResponseFactor
from .numerics import (
    Grid,
    cumtrapz,
    fd_derivative,
    fd_second_derivative,
    rk4_integrate,
    stage_lookup,
)

TWO_PI = 2.0 * math.pi
# Envelope prefactor in units of M/mu. CALIBRATED solves the first-order area
# equation exactly; PRINTED is the alternative 4 M/mu convention, kept
# selectable for comparison.
CALIBRATED_PREFACTOR = 2.0
PRINTED_PREFACTOR = 4.0
FIXED_POINT_TOL = 1e-6
ENVELOPE_FLOOR = 1e-9  # in units of M/mu


def pendulum_frequency(mu: float, k: float, c: float, v: float, eps0: float) -> float:
    """``M = sqrt(mu^2 k c v / (2 eps0 (c - v)))`` from raw electromagnetic constants."""
    if not 0 < v < c:
        raise DomainError("need 0 < v < c")
    return math.sqrt(mu**2 * k * c * v / (2.0 * eps0 * (c - v)))


def _fixed_point(area: float) -> bool:
    return abs(area - TWO_PI * round(area / TWO_PI)) <= FIXED_POINT_TOL


def _principal_area(area0: float) -> tuple[float, float, float]:
    """Map ``area0`` onto the principal branch.

    Returns ``(offset, sign, a)`` with ``a`` in (0, 2 pi) such that the
    trajectory is ``offset + sign * A_principal(a)``.
    """
    k = math.floor(area0 / (2 * TWO_PI))
    r = area0 - 2 * TWO_PI * k
    if r < TWO_PI:
        return 2 * TWO_PI * k, 1.0, r
    # sin(A/2) flips sign on (2 pi, 4 pi); A -> 4 pi - A maps the flow onto itself
    return 2 * TWO_PI * (k + 1), -1.0, 2 * TWO_PI - r


def delay_time(area0: float, M: float) -> float:
    """``(1/M) ln tan(a/4)`` for the principal-branch image ``a`` of ``area0``.

    Not defined at the fixed points ``area0 = 2 n pi``; returns nan there.
    """
    if _fixed_point(area0):
        return math.nan
    _, _, a = _principal_area(area0)
    return math.log(math.tan(a / 4.0)) / M


@dataclass(frozen=True)
class PropagationParams:
    """Pendulum scale ``M`` (rad/ns), initial area (rad) and constant rate ``c0`` (1/ns)."""

    M: float
    area0: float
    c0: float = 0.0
    v_over_c: float = 0.5
    mu: float = 1.0
    tau0: float = 0.0
    prefactor: float = CALIBRATED_PREFACTOR
    tau_d: float = field(init=False)

    def __post_init__(self):
        if not (self.M > 0 and math.isfinite(self.M)):
            raise DomainError(f"M must be positive, got {self.M}")
        if not 0 < self.v_over_c < 1:
            raise DomainError(f"v_over_c must lie in (0, 1), got {self.v_over_c}")
        if not self.c0 >= 0:
            raise DomainError(f"C0 must be non-negative, got {self.c0}")
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        if not math.isfinite(self.area0):
            raise DomainError("area0 must be finite")
        object.__setattr__(self, "tau_d", delay_time(self.area0, self.M))

    def with_(self, **changes) -> "PropagationParams":
        return replace(self, **changes)

    @property
    def at_fixed_point(self) -> bool:
        return _fixed_point(self.area0)


@dataclass
class PulseState:
    """Envelope, phase and cumulative area sampled on a grid.

    ``area`` starts at the initial area and accumulates ``mu * envelope``.
    """

    grid: Grid
    envelope: np.ndarray
    phase: np.ndarray
    area: np.ndarray

    @classmethod
    def from_envelope(cls, grid: Grid, envelope, phase=0.0, mu: float = 1.0,
                      area0: float = 0.0) -> "PulseState":
        env = np.asarray(envelope, dtype=float)
        if env.shape != (grid.n,):
            raise DomainError("envelope must be sampled on the grid")
        if np.any(env < 0):
            raise DomainError("envelope must be non-negative")
        ph = np.broadcast_to(np.asarray(phase, dtype=float), (grid.n,)).copy()
        return cls(grid, env, ph, area0 + mu * cumtrapz(env, grid))


# ---------------------------------------------------------------------------
# Right-hand sides and numerical integration


def envelope_phase_rhs(envelope: float, factor: ResponseFactor, params: PropagationParams,
                       held_phase_rate: float = 0.0) -> tuple[float, float]:
    """``(dE/dtau, dphi/dtau)`` driven by the response factor.

    ``dE/dtau = -(M^2/mu) Im F`` and ``dphi/dtau = (M^2/(mu E)) Re F``.
    Below the envelope floor the phase rate is reported as ``held_phase_rate``.
    """
    scale = params.M**2 / params.mu
    dE = -scale * factor.im
    if envelope <= ENVELOPE_FLOOR * params.M / params.mu:
        return dE, held_phase_rate
    return dE, scale * factor.re / envelope


def _gamma_callable(gamma, grid: Grid | None = None) -> Callable[[float], float]:
    if gamma is None:
        return lambda tau: 0.0
    if isinstance(gamma, DecoherenceProfile):
        if gamma.c0 is not None:
            c0, t0 = gamma.c0, gamma.grid.tau0
            return lambda tau: 4.0 * c0 * (tau - t0)
        spline = CubicSpline(gamma.grid.tau, gamma.gamma_cumulative)
        if grid is not None and grid.tau0 >= gamma.grid.tau0 and grid.tau1 <= gamma.grid.tau1:
            return stage_lookup(spline, grid)
        return spline
    if callable(gamma):
        return gamma
    raise DomainError("gamma must be None, a DecoherenceProfile or a callable")


def area_rhs(tau: float, area, M: float, gamma_at: Callable[[float], float]):
    return 2.0 * M * math.exp(-gamma_at(tau) / 4.0) * np.sin(area / 2.0)


def pendulum_area_integrate(params: PropagationParams, gamma, grid: Grid) -> np.ndarray:
    """RK4 solution of the first-order damped pendulum for the area.

    ``gamma`` is a :class:`DecoherenceProfile`, a callable ``Gamma(tau)`` or
    None for a lossless medium. Initial areas within ``FIXED_POINT_TOL`` of
    ``2 n pi`` return the constant trajectory.
    """
    if params.at_fixed_point:
        return np.full(grid.n, TWO_PI * round(params.area0 / TWO_PI))
    g = _gamma_callable(gamma, grid)
    M = params.M
    area, _ = rk4_integrate(lambda t, a: area_rhs(t, a, M, g), np.array(params.area0), grid)
    return area


def pendulum_residual(area, grid: Grid, M: float, gamma=None) -> np.ndarray:
    """Second-order residual ``A'' - M^2 exp(-Gamma/2) sin A`` by finite differences."""
    g = _gamma_callable(gamma)
    gam = np.array([g(t) for t in grid.tau])
    acc = fd_second_derivative(area, grid)
    return acc - M**2 * np.exp(-gam / 2.0) * np.sin(area)


def propagate_envelope_phase(envelope0: float, phase0: float, area_of_tau, gamma,
                             params: PropagationParams, grid: Grid) -> PulseState:
    """Integrate the envelope/phase pair at fixed accumulated area profile.

    ``area_of_tau`` gives the resonant Rabi integral that enters Im F; it may be
    an array on ``grid`` or a callable. The phase rate is held at its last
    finite value once the envelope drops below the floor.
    """
    if callable(area_of_tau):
        area_at = area_of_tau
        area_nodes = np.array([area_of_tau(t) for t in grid.tau])
    else:
        area_nodes = np.asarray(area_of_tau, dtype=float)
        if area_nodes.shape != (grid.n,):
            raise DomainError("area profile must be sampled on the grid")
        area_at = stage_lookup(CubicSpline(grid.tau, area_nodes), grid)
    g = _gamma_callable(gamma, grid)
    held = [0.0]

    def rhs(tau, y):
        F = ResponseFactor.from_closed_form(g(tau), area_at(tau))
        dE, dphi = envelope_phase_rhs(y[0], F, params, held[0])
        return np.array([dE, dphi])

    def remember(i, tau, y):
        F = ResponseFactor.from_closed_form(g(tau), area_at(tau))
        held[0] = envelope_phase_rhs(y[0], F, params, held[0])[1]

    y, _ = rk4_integrate(rhs, np.array([envelope0, phase0], dtype=float), grid, callback=remember)
    return PulseState(grid, y[:, 0], y[:, 1], area_nodes)


# ---------------------------------------------------------------------------
# Closed forms in the constant-rate regime


def _decay_integral(c0: float, dt):
    """``int_0^dt exp(-c0 s) ds``, exact also as ``c0 -> 0``."""
    dt = np.asarray(dt, dtype=float)
    if c0 == 0:
        return dt
    return -np.expm1(-c0 * dt) / c0


def sech_argument(params: PropagationParams, tau):
    """``u(tau) = M (int_{tau0}^{tau} exp(-C0 (s - tau0)) ds + tau_D)``."""
    return params.M * (_decay_integral(params.c0, np.asarray(tau) - params.tau0) + params.tau_d)


def _check_regime(params: PropagationParams) -> None:
    if params.c0 < 0:
        raise DomainError("closed forms need C0 >= 0")


def area_closed_form(params: PropagationParams, tau):
    """``4 arctan(exp(u))`` mapped back from the principal branch."""
    _check_regime(params)
    tau = np.asarray(tau, dtype=float)
    if params.at_fixed_point:
        return np.full(tau.shape, TWO_PI * round(params.area0 / TWO_PI))
    offset, sign, a = _principal_area(params.area0)
    p = params.with_(area0=a)
    return offset + sign * 4.0 * np.arctan(np.exp(sech_argument(p, tau)))


def envelope_closed_form(params: PropagationParams, tau):
    """Hypersecant envelope ``(P M/mu) exp(-C0 (tau - tau0)) sech(u)``.

    Only the principal branch ``0 < area0 < 2 pi`` has a non-negative
    envelope; other branches raise. Fixed-point areas give a zero envelope.
    """
    _check_regime(params)
    tau = np.asarray(tau, dtype=float)
    if params.at_fixed_point:
        return np.zeros(tau.shape)
    if not 0 < params.area0 < TWO_PI:
        raise DomainError(f"closed-form envelope needs 0 < area0 < 2 pi, got {params.area0}")
    u = sech_argument(params, tau)
    amp = params.prefactor * params.M / params.mu
    return amp * np.exp(-params.c0 * (tau - params.tau0)) / np.cosh(u)


def peak_amplitude(params: PropagationParams, tau):
    """Envelope value where the hypersecant is at its crest, ``(P M/mu) exp(-C0 (tau-tau0))``."""
    tau = np.asarray(tau, dtype=float)
    return params.prefactor * params.M / params.mu * np.exp(-params.c0 * (tau - params.tau0))


def retarded_velocity(v: float, c0: float, dt):
    """Remainder-ridge velocity ``v exp(-C0 (t - t0))``."""
    if c0 < 0:
        raise DomainError("C0 must be non-negative")
    return v * np.exp(-c0 * np.asarray(dt, dtype=float))


def phase_rate_closed_form(params: PropagationParams, tau):
    """``(M/P) [exp(C0 s) - exp(-3 C0 s)] cosh(u)`` with ``s = tau - tau0``.

    Follows from ``dphi/dtau = M^2 (1 - exp(-Gamma)) / (mu E)`` with the
    hypersecant envelope of the same prefactor ``P``.
    """
    _check_regime(params)
    s = np.asarray(tau, dtype=float) - params.tau0
    if params.c0 == 0:
        return np.zeros(s.shape)
    u = sech_argument(params, tau)
    # e^{C0 s} - e^{-3 C0 s} = e^{C0 s} (1 - e^{-4 C0 s})
    growth = np.exp(params.c0 * s) * -np.expm1(-4.0 * params.c0 * s)
    return params.M / params.prefactor * growth * np.cosh(u)


def phase_closed_form(params: PropagationParams, grid: Grid, phi0: float = 0.0) -> np.ndarray:
    """Accumulated carrier phase by cumulative trapezoid of the phase rate."""
    if params.c0 == 0:
        return np.full(grid.n, float(phi0))
    if params.at_fixed_point or not 0 < params.area0 < TWO_PI:
        raise DomainError("phase closed form needs a principal-branch initial area")
    return phi0 + cumtrapz(phase_rate_closed_form(params, grid.tau), grid)


def closed_form_pulse(params: PropagationParams, grid: Grid, phi0: float = 0.0) -> PulseState:
    env = envelope_closed_form(params, grid.tau)
    return PulseState(grid, env, phase_closed_form(params, grid, phi0),
                      params.area0 + params.mu * cumtrapz(env, grid))


@dataclass(frozen=True)
class OracleComparison:
    max_rel_dev: float
    closed: np.ndarray
    oracle: np.ndarray
    area: np.ndarray

    @property
    def rel_dev(self) -> np.ndarray:
        return np.abs(self.oracle - self.closed) / np.max(np.abs(self.closed))


def envelope_vs_oracle(params: PropagationParams, grid: Grid) -> OracleComparison:
    """Compare the closed-form envelope with the differentiated RK4 area.

    The deviation is the sup-norm difference normalised by the closed-form
    peak, so vanishing tails do not dominate.
    """
    c0, t0 = params.c0, params.tau0
    area = pendulum_area_integrate(params, lambda t: 4.0 * c0 * (t - t0), grid)
    oracle = fd_derivative(area, grid) / params.mu
    closed = envelope_closed_form(params, grid.tau)
    scale = float(np.max(np.abs(closed)))
    dev = float(np.max(np.abs(oracle - closed)) / scale) if scale > 0 else float(np.max(np.abs(oracle)))
    return OracleComparison(dev, closed, oracle, area)


# ---------------------------------------------------------------------------
# Ramification in the laboratory frame


@dataclass(frozen=True)
class RamificationSurface:
    """Envelope on a lab raster: rows are ``t`` (ns), columns ``x/v`` (ns)."""

    x_over_v: np.ndarray
    t: np.ndarray
    transparent: np.ndarray
    remainder: np.ndarray
    n_transparent: int
    params: PropagationParams

    @property
    def envelope(self) -> np.ndarray:
        return self.transparent + self.remainder


def ramification_surface(params: PropagationParams, x_over_v, t,
                         max_step_fraction: float = 0.1) -> RamificationSurface:
    """Split the pulse into ``2 pi n`` transparent and remainder parts and rasterise.

    The transparent part is a lossless hypersecant crest riding ``x/v = t``.
    The remainder keeps its closed-form shape but its sech argument runs on
    the retarded clock ``int_0^t exp(-C0 s) ds``, so its crest moves at
    ``v exp(-C0 t)`` and its height decays as ``exp(-C0 t)``.
    """
    if params.at_fixed_point:
        raise DomainError("initial area is a multiple of 2 pi; nothing ramifies")
    if params.area0 < 0:
        raise DomainError("ramification needs a positive initial area")
    x = np.asarray(x_over_v, dtype=float)
    t = np.asarray(t, dtype=float)
    for name, axis in (("x_over_v", x), ("t", t)):
        if axis.ndim != 1 or axis.size < 3:
            raise ResolutionError(f"{name} axis needs at least 3 samples")
        step = float(np.max(np.diff(axis)))
        if step > max_step_fraction / params.M:
            raise ResolutionError(
                f"{name} step {step:.3g} ns does not resolve the pulse width 1/M = {1 / params.M:.3g} ns"
            )
    n = int(math.floor(params.area0 / TWO_PI))
    remainder_area = params.area0 - n * TWO_PI
    amp = params.prefactor * params.M / params.mu
    dt = t - params.tau0
    xx = x[None, :]
    transparent = n * amp / np.cosh(params.M * (dt[:, None] - xx))
    rem = params.with_(area0=remainder_area)
    clock = _decay_integral(rem.c0, dt)[:, None]
    remainder = amp * np.exp(-rem.c0 * dt)[:, None] / np.cosh(rem.M * (clock - xx + rem.tau_d))
    return RamificationSurface(x, t, transparent, remainder, n, params)


def _refine_peak(x: np.ndarray, row: np.ndarray) -> tuple[float, float]:
    """Crest position and height from a 3-point parabola through log values."""
    i = int(np.argmax(row))
    if i == 0 or i == row.size - 1 or row[i] <= 0:
        return math.nan, math.nan
    ym, y0, yp = np.log(row[i - 1 : i + 2])
    denom = ym - 2.0 * y0 + yp
    if denom >= 0:
        return float(x[i]), float(row[i])
    h = x[i + 1] - x[i]
    off = 0.5 * (ym - yp) / denom
    peak = y0 - 0.25 * (ym - yp) * off
    return float(x[i] + off * h), float(math.exp(peak))


@dataclass(frozen=True)
class RidgeTrace:
    t: np.ndarray
    x_peak_transparent: np.ndarray
    x_peak_remainder: np.ndarray
    height_transparent: np.ndarray
    height_remainder: np.ndarray
    velocity_remainder: np.ndarray  # in units of v

    @property
    def separation(self) -> np.ndarray:
        return self.x_peak_transparent - self.x_peak_remainder


def ridge_trace(surface: RamificationSurface) -> RidgeTrace:
    """Follow both crests row by row; remainder velocity by finite differences."""
    x, t = surface.x_over_v, surface.t
    nt = t.size
    xt, ht, xr, hr = (np.full(nt, math.nan) for _ in range(4))
    for i in range(nt):
        if surface.n_transparent:
            xt[i], ht[i] = _refine_peak(x, surface.transparent[i])
        xr[i], hr[i] = _refine_peak(x, surface.remainder[i])
    if np.any(np.isnan(xr)):
        raise ResolutionError("remainder crest leaves the x/v window; widen the raster")
    if np.allclose(np.diff(t), t[1] - t[0]):
        vel = fd_derivative(xr, Grid(float(t[0]), float(t[-1]), nt))
    else:
        vel = np.gradient(xr, t, edge_order=2)
    return RidgeTrace(t, xt, xr, ht, hr, vel)
