"""Dressed-state algebra of the driven qubit.

Bare-basis vectors are ordered ``(|e>, |g>)`` and dressed-basis matrices are
ordered ``(|nu+>, |nu->)``. All frequencies are angular, in rad/ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .numerics import Grid, cumtrapz

# Sign multiplying -i<nu|d nu> in the accumulated phase. +1 keeps the
# adiabatic state |nu+(tau)> exp(-i phi+) continuous as the drive vanishes.
GEOMETRIC_PHASE_SIGN = +1


def _finite(*values: float) -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite input: {v!r}")


@dataclass(frozen=True)
class QubitParams:
    """Transition frequency ``omega0``, carrier ``omega``, dipole coupling ``mu``.

    ``delta = omega0 - omega`` is derived and cannot be passed in.
    """

    omega0: float
    omega: float
    mu: float = 1.0
    delta: float = field(init=False)

    def __post_init__(self):
        _finite(self.omega0, self.omega, self.mu)
        if self.omega0 <= 0 or self.omega <= 0:
            raise DomainError("omega0 and omega must be positive")
        if self.mu < 0:
            raise DomainError("mu must be non-negative")
        object.__setattr__(self, "delta", self.omega0 - self.omega)

    @classmethod
    def resonant(cls, omega: float, mu: float = 1.0) -> "QubitParams":
        return cls(omega0=omega, omega=omega, mu=mu)


@dataclass(frozen=True)
class DressedFrame:
    theta: float
    phi: float
    omega_plus: float
    omega_minus: float

    @classmethod
    def at(cls, mu_E: float, delta: float, phi: float) -> "DressedFrame":
        wp, wm = dressed_eigenvalues(mu_E, delta)
        return cls(mixing_angle(mu_E, delta), phi, wp, wm)


@dataclass(frozen=True)
class AdiabaticPhase:
    """Cumulative dynamic and geometric phases on a grid (rad)."""

    dynamic: np.ndarray
    geometric: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.dynamic + self.geometric


def mixing_angle(mu_E, delta):
    """Half of ``atan2(mu_E, delta)``; regular at resonance."""
    _finite(mu_E, delta)
    return 0.5 * np.arctan2(mu_E, delta)


def dressed_eigenvalues(mu_E, delta):
    _finite(mu_E, delta)
    r = np.hypot(delta, mu_E)
    return r, -r


def dressed_states(theta: float, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(|nu+>, |nu->)`` as bare-basis column vectors."""
    c, s = math.cos(theta), math.sin(theta)
    ph = np.exp(-1j * phi)
    nu_p = np.array([ph * c, -s], dtype=complex)
    nu_m = np.array([ph * s, c], dtype=complex)
    return nu_p, nu_m


def dressed_basis(theta: float, phi: float) -> np.ndarray:
    """Unitary whose columns are ``|nu+>`` and ``|nu->``."""
    nu_p, nu_m = dressed_states(theta, phi)
    return np.column_stack([nu_p, nu_m])


def rotating_frame_hamiltonian(mu_E: float, delta: float, phi: float) -> np.ndarray:
    """Bare-basis Hamiltonian diagonalised by the dressed states.

    Equals ``Omega (|nu+><nu+| - |nu-><nu-|)`` with
    ``Omega = sqrt(delta**2 + mu_E**2)``.
    """
    off = -mu_E * np.exp(-1j * phi)
    return np.array([[delta, off], [np.conj(off), -delta]], dtype=complex)


def lowering_operator(theta: float, phi: float) -> np.ndarray:
    """Dressed lowering operator ``|nu-><nu+|`` in the bare basis."""
    nu_p, nu_m = dressed_states(theta, phi)
    return np.outer(nu_m, nu_p.conj())


def sigma_x_dressed(phi: float, theta: float = math.pi / 4) -> np.ndarray:
    """Static ``sigma_x`` expressed in the dressed basis.

    At resonance (``theta = pi/4``) this is
    ``[[-cos phi, i sin phi], [-i sin phi, cos phi]]``.
    """
    U = dressed_basis(theta, phi)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    return U.conj().T @ sx @ U


def adiabatic_phase(omega_branch, theta, phi, grid: Grid, branch: str = "+") -> AdiabaticPhase:
    """Accumulated dynamic and geometric phase of one dressed branch.

    Parameters
    ----------
    omega_branch : array
        Eigenvalue ``Omega+`` or ``Omega-`` sampled on ``grid``.
    theta, phi : array or float
        Mixing angle and pulse phase on ``grid``.
    branch : {"+", "-"}
        Which dressed state the phase belongs to.

    Notes
    -----
    From the dressed states, ``<nu+|d nu+> = -i cos^2(theta) dphi`` and
    ``<nu-|d nu-> = -i sin^2(theta) dphi``, so the geometric term is
    ``-int cos^2(theta) dphi`` (resp. ``sin^2``). It is integrated as a
    trapezoid Stieltjes sum over the phase increments, which is exact for
    piecewise-constant mixing angle and needs no numerical derivative of phi.
    """
    if grid.n < 2:
        raise DomainError("adiabatic_phase needs at least two grid points")
    if branch not in ("+", "-"):
        raise DomainError(f"branch must be '+' or '-', got {branch!r}")
    omega_branch = np.broadcast_to(np.asarray(omega_branch, dtype=float), (grid.n,))
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (grid.n,))
    phi = np.broadcast_to(np.asarray(phi, dtype=float), (grid.n,))
    dynamic = cumtrapz(omega_branch, grid)
    weight = np.cos(theta) ** 2 if branch == "+" else np.sin(theta) ** 2
    inc = 0.5 * (weight[:-1] + weight[1:]) * np.diff(phi)
    geometric = np.zeros(grid.n)
    geometric[1:] = -GEOMETRIC_PHASE_SIGN * np.cumsum(inc)
    return AdiabaticPhase(dynamic=dynamic, geometric=geometric)
