"""Qubit density-matrix evolution under the dressed-basis Lindblad equation.

The dissipator has a single jump operator, the dressed lowering operator
``|nu-><nu+|``, with instantaneous rate ``gamma(Omega) * sin(phi)**2``.
Trajectories are integrated with fixed-step RK4 in the bare rotating frame.
Physical invariants are asserted after every step, never repaired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import dressed
from .bath import DecoherenceProfile, SpectralDensity, spectral_density_eval
from .errors import DomainError, IntegrationError
from .numerics import Grid, cumtrapz, rk4_integrate, stage_lookup

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
# threshold above which a running trajectory is declared unstable
INSTABILITY_TOL = 1e-6

SIGMA_MINUS_DRESSED = np.array([[0, 0], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class DensityMatrix2:
    entries: np.ndarray
    basis: str = "bare"

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        if rho.shape != (2, 2):
            raise DomainError(f"density matrix must be 2x2, got {rho.shape}")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)
        if self.basis not in ("bare", "dressed"):
            raise DomainError(f"basis must be 'bare' or 'dressed', got {self.basis!r}")
        herm, trace, min_eig = invariant_defects(rho)
        if herm > HERMITIAN_TOL or trace > TRACE_TOL or min_eig < -POSITIVITY_TOL:
            raise DomainError(
                f"not a density matrix: hermiticity {herm:.2e}, trace {trace:.2e}, "
                f"min eigenvalue {min_eig:.2e}"
            )

    @classmethod
    def pure(cls, psi, basis: str = "bare") -> "DensityMatrix2":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), basis)

    @classmethod
    def excited(cls) -> "DensityMatrix2":
        return cls(np.diag([1.0, 0.0]))

    @classmethod
    def ground(cls) -> "DensityMatrix2":
        return cls(np.diag([0.0, 1.0]))

    @property
    def purity(self) -> float:
        return purity(self.entries)


def invariant_defects(rho: np.ndarray) -> tuple[float, float, float]:
    """Return (hermiticity defect, |trace - 1|, minimum eigenvalue)."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = abs(complex(np.trace(rho)) - 1.0)
    a, d = rho[0, 0].real, rho[1, 1].real
    b = 0.5 * (rho[0, 1] + np.conj(rho[1, 0]))
    min_eig = float(0.5 * (a + d) - math.hypot(0.5 * (a - d), abs(b)))  # 2x2 Hermitian part
    return herm, trace, min_eig


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def _rhs(rho, H, gamma_eff, L):
    out = -1j * (H @ rho - rho @ H)
    if gamma_eff:
        Ld = L.conj().T
        LdL = Ld @ L
        out = out + gamma_eff * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def lindblad_rhs(rho, H_s, gamma_eff: float, jump_minus=SIGMA_MINUS_DRESSED) -> np.ndarray:
    """``-i[H, rho] + gamma_eff (L rho L^+ - 1/2 {L^+ L, rho})``."""
    rho = rho.entries if isinstance(rho, DensityMatrix2) else np.asarray(rho, dtype=complex)
    H = np.asarray(H_s, dtype=complex)
    if np.max(np.abs(H - H.conj().T)) > 1e-10 * max(1.0, float(np.max(np.abs(H)))):
        raise DomainError("H_s is not Hermitian")
    if not gamma_eff >= 0:
        raise DomainError(f"gamma_eff must be >= 0, got {gamma_eff}")
    return _rhs(rho, H, float(gamma_eff), np.asarray(jump_minus, dtype=complex))


Generator = Callable[[float], tuple[np.ndarray, float, np.ndarray]]


@dataclass
class Trajectory:
    grid: Grid
    rho: np.ndarray  # (n, 2, 2)
    basis: str = "bare"

    @property
    def purity(self) -> np.ndarray:
        return np.real(np.einsum("nij,nji->n", self.rho, self.rho))

    def state(self, i: int) -> DensityMatrix2:
        return DensityMatrix2(self.rho[i], self.basis)


def propagate(rho0, generator: Generator, grid: Grid, basis: str = "bare") -> Trajectory:
    """Integrate the master equation for a time-dependent generator.

    ``generator(tau)`` returns ``(H, gamma_eff, jump)`` at local time ``tau``.
    Raises :class:`IntegrationError` when any accepted state violates the
    density-matrix invariants by more than ``INSTABILITY_TOL``.
    """
    rho0 = rho0.entries if isinstance(rho0, DensityMatrix2) else DensityMatrix2(rho0).entries

    def rhs(tau, rho):
        H, g, L = generator(tau)
        return _rhs(rho, H, g, L)

    def check(i, tau, rho):
        herm, trace, min_eig = invariant_defects(rho)
        if herm > INSTABILITY_TOL or trace > INSTABILITY_TOL or min_eig < -INSTABILITY_TOL:
            raise IntegrationError(
                f"density matrix left the physical set (hermiticity {herm:.2e}, "
                f"trace {trace:.2e}, min eigenvalue {min_eig:.2e}); reduce the step", tau
            )

    rho, _ = rk4_integrate(rhs, np.array(rho0, dtype=complex), grid, callback=check)
    return Trajectory(grid, rho, basis)


def constant_generator(H, gamma_eff: float, jump=SIGMA_MINUS_DRESSED) -> Generator:
    H = np.asarray(H, dtype=complex)
    jump = np.asarray(jump, dtype=complex)
    return lambda tau: (H, gamma_eff, jump)


def drive_generator(drive, params: dressed.QubitParams, bath: SpectralDensity) -> Generator:
    """Generator for a sampled pulse: rotating-frame H and dressed jump at each tau.

    ``drive`` needs ``grid``, ``envelope`` and ``phase`` arrays; values between
    nodes come from cubic splines so RK4 keeps its order. Nodes and midpoints,
    the only times RK4 asks for, are tabulated up front.
    """
    grid = drive.grid
    taus = grid.tau
    env = CubicSpline(taus, np.asarray(drive.envelope, dtype=float))
    ph = CubicSpline(taus, np.asarray(drive.phase, dtype=float))
    mu, delta = params.mu, params.delta

    def build(tau):
        mu_E = mu * env(tau)
        phi = ph(tau)
        theta = 0.5 * np.arctan2(mu_E, delta)
        c, s, e = np.cos(theta), np.sin(theta), np.exp(-1j * phi)
        nu_p = np.stack([e * c, -s + 0j], axis=-1)
        nu_m = np.stack([e * s, c + 0j], axis=-1)
        H = (np.hypot(delta, mu_E)[..., None, None]
             * (nu_p[..., :, None] * nu_p.conj()[..., None, :]
                - nu_m[..., :, None] * nu_m.conj()[..., None, :]))
        L = nu_m[..., :, None] * nu_p.conj()[..., None, :]
        rate = spectral_density_eval(bath, np.hypot(delta, mu_E)) * np.sin(phi) ** 2
        return H, rate, L

    return stage_lookup(build, grid)


def evolve(rho0, drive, params: dressed.QubitParams, bath: SpectralDensity) -> Trajectory:
    """Evolve the qubit through a sampled pulse (bare rotating-frame basis)."""
    return propagate(rho0, drive_generator(drive, params, bath), drive.grid)


def to_dressed(rho: np.ndarray, theta: float, phi: float) -> np.ndarray:
    U = dressed.dressed_basis(theta, phi)
    return U.conj().T @ rho @ U


@dataclass(frozen=True)
class ResponseFactor:
    """Complex response factor: dephasing (real) and absorption (imaginary)."""

    re: float
    im: float
    gamma_at_tau: float
    omega_integral: float

    @classmethod
    def from_closed_form(cls, gamma: float, omega_integral: float) -> "ResponseFactor":
        return cls(
            re=1.0 - math.exp(-gamma),
            im=-math.exp(-gamma / 2.0) * math.sin(omega_integral),
            gamma_at_tau=gamma,
            omega_integral=omega_integral,
        )

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)


def response_factor(gamma_profile: DecoherenceProfile, omega_of_tau, grid: Grid, tau: float) -> ResponseFactor:
    """Closed-form factor at ``tau``; node values are interpolated linearly."""
    if not (grid.tau0 - 1e-12 <= tau <= grid.tau1 + 1e-12):
        raise DomainError(f"tau={tau} outside [{grid.tau0}, {grid.tau1}]")
    area = cumtrapz(np.asarray(omega_of_tau, dtype=float), grid)
    w_int = float(np.interp(tau, grid.tau, area))
    return ResponseFactor.from_closed_form(gamma_profile.at(tau), w_int)


def polarization(mu: float, factor: ResponseFactor | complex, phi: float, omega_tau: float) -> float:
    """Real polarization ``mu Re{F exp(i(phi + omega tau))}``."""
    F = factor.value if isinstance(factor, ResponseFactor) else complex(factor)
    arg = phi + omega_tau
    return mu * (F.real * math.cos(arg) - F.imag * math.sin(arg))
