"""Bath spectral densities and the decoherence factor they induce.

Rates are in 1/ns and frequencies in rad/ns. The decoherence factor is the
cumulative integral of ``gamma(Omega(s)) * sin(phi(s))**2`` along the pulse.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ExtrapolationError
from .numerics import Grid, cumtrapz

GHZ_TO_RAD_PER_NS = 2.0 * math.pi
MHZ_TO_PER_NS = 1e-3


@dataclass(frozen=True)
class SpectralDensity:
    """Spectral density gamma(Omega) of the bath.

    Use the ``constant``, ``ohmic``, ``tabulated`` or ``from_modes``
    constructors rather than building one by hand.
    """

    kind: str
    gamma0: float = 0.0
    eta: float = 0.0
    omega_c: float = math.inf
    omegas: tuple[float, ...] = ()
    gammas: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "constant":
            if not (math.isfinite(self.gamma0) and self.gamma0 >= 0):
                raise DomainError(f"constant rate must be finite and >= 0, got {self.gamma0}")
        elif self.kind == "ohmic":
            if not (self.eta >= 0 and self.omega_c > 0):
                raise DomainError("ohmic model needs eta >= 0 and omega_c > 0")
        elif self.kind == "tabulated":
            w = np.asarray(self.omegas, dtype=float)
            g = np.asarray(self.gammas, dtype=float)
            if w.size < 2 or w.size != g.size:
                raise DomainError("tabulated density needs >= 2 (omega, gamma) pairs")
            if np.any(np.diff(w) <= 0):
                raise DomainError("tabulated omega grid must be strictly increasing")
            if np.any(g < 0) or not np.all(np.isfinite(g)):
                raise DomainError("tabulated gamma values must be finite and non-negative")
        else:
            raise DomainError(f"unknown spectral density kind {self.kind!r}")

    @classmethod
    def constant(cls, gamma0: float) -> "SpectralDensity":
        return cls("constant", gamma0=float(gamma0))

    @classmethod
    def ohmic(cls, eta: float, omega_c: float = math.inf) -> "SpectralDensity":
        return cls("ohmic", eta=float(eta), omega_c=float(omega_c))

    @classmethod
    def tabulated(cls, omegas, gammas) -> "SpectralDensity":
        return cls("tabulated", omegas=tuple(map(float, omegas)), gammas=tuple(map(float, gammas)))

    @classmethod
    def from_modes(cls, couplings, frequencies, bin_edges) -> "SpectralDensity":
        """Bin a discrete mode list into a tabulated density.

        Each mode contributes ``2 pi g_j**2`` spread over the width of the bin
        containing ``omega_j``; the table is sampled at bin centres.
        """
        g = np.asarray(couplings, dtype=float)
        w = np.asarray(frequencies, dtype=float)
        edges = np.asarray(bin_edges, dtype=float)
        if edges.size < 3 or np.any(np.diff(edges) <= 0):
            raise DomainError("need at least two strictly increasing bins")
        weight, _ = np.histogram(w, bins=edges, weights=2.0 * math.pi * g**2)
        centres = 0.5 * (edges[:-1] + edges[1:])
        return cls.tabulated(centres, weight / np.diff(edges))

    @classmethod
    def from_csv(cls, path) -> "SpectralDensity":
        """Load a two-column CSV of (Omega in GHz, gamma in MHz) with a header row."""
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DomainError(f"{path}: empty spectral density file")
        header, body = rows[0], rows[1:]
        try:
            float(header[0])
        except (ValueError, IndexError):
            pass
        else:
            raise DomainError(f"{path}: header row required")
        data = []
        for lineno, row in enumerate(body, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DomainError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                data.append((float(row[0]), float(row[1])))
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from None
        arr = np.array(data, dtype=float).reshape(-1, 2)
        return cls.tabulated(arr[:, 0] * GHZ_TO_RAD_PER_NS, arr[:, 1] * MHZ_TO_PER_NS)

    def __call__(self, omega_eff):
        return spectral_density_eval(self, omega_eff)

    def describe(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "gamma0_per_ns": self.gamma0}
        if self.kind == "ohmic":
            return {"kind": "ohmic", "eta": self.eta, "omega_c_rad_per_ns": self.omega_c}
        return {"kind": "tabulated", "points": len(self.omegas)}


def spectral_density_eval(model: SpectralDensity, omega_eff):
    """Evaluate gamma(Omega) (1/ns). Scalars in, scalar out."""
    w = np.asarray(omega_eff, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DomainError("spectral density is defined for finite Omega >= 0")
    if model.kind == "constant":
        out = np.full(w.shape, model.gamma0)
    elif model.kind == "ohmic":
        out = model.eta * w * np.exp(-w / model.omega_c)
    else:
        lo, hi = model.omegas[0], model.omegas[-1]
        if np.any(w < lo) or np.any(w > hi):
            raise ExtrapolationError(
                f"Omega outside tabulated range [{lo:.6g}, {hi:.6g}] rad/ns"
            )
        out = np.interp(w, model.omegas, model.gammas)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DecoherenceProfile:
    grid: Grid
    gamma_cumulative: np.ndarray
    c0: float | None = None

    def __post_init__(self):
        if len(self.gamma_cumulative) != self.grid.n:
            raise DomainError("decoherence profile length does not match its grid")

    @classmethod
    def constant_rate(cls, c0: float, grid: Grid) -> "DecoherenceProfile":
        """Gamma(tau) = 4 C0 (tau - tau0)."""
        if c0 < 0:
            raise DomainError(f"C0 must be non-negative, got {c0}")
        return cls(grid, 4.0 * c0 * (grid.tau - grid.tau0), c0=c0)

    def at(self, tau):
        """Linear interpolation between nodes; raises outside the grid."""
        t = np.asarray(tau, dtype=float)
        if np.any(t < self.grid.tau0 - 1e-12) or np.any(t > self.grid.tau1 + 1e-12):
            raise DomainError(f"tau={tau} outside [{self.grid.tau0}, {self.grid.tau1}]")
        out = np.interp(t, self.grid.tau, self.gamma_cumulative)
        return float(out) if out.ndim == 0 else out


def decoherence_factor(model: SpectralDensity, omega_of_tau, phi_of_tau, grid: Grid) -> DecoherenceProfile:
    """Cumulative trapezoid of ``gamma(Omega) sin^2(phi)`` on ``grid``."""
    omega = np.asarray(omega_of_tau, dtype=float)
    phi = np.asarray(phi_of_tau, dtype=float)
    if omega.shape != (grid.n,) or phi.shape != (grid.n,):
        raise DomainError(
            f"samplers must match grid length {grid.n}: got {omega.shape} and {phi.shape}"
        )
    rate = np.asarray(spectral_density_eval(model, np.abs(omega))) * np.sin(phi) ** 2
    return DecoherenceProfile(grid, cumtrapz(rate, grid))


def bath_correlation(couplings, frequencies, lag):
    """Zero-temperature correlation ``sum_j g_j^2 exp(-i omega_j lag)``.

    An empty mode list is the vacuum limit and gives 0.
    """
    g = np.asarray(couplings, dtype=float)
    w = np.asarray(frequencies, dtype=float)
    if g.shape != w.shape:
        raise DomainError("couplings and frequencies must have the same length")
    lag = np.asarray(lag, dtype=float)
    if g.size == 0:
        return np.zeros(lag.shape, dtype=complex) if lag.ndim else 0j
    out = np.sum(g**2 * np.exp(-1j * np.multiply.outer(lag, w)), axis=-1)
    return complex(out) if out.ndim == 0 else out


def fit_constant_rate(profile: DecoherenceProfile) -> float:
    """Least-squares C0 with Gamma ~ 4 C0 (tau - tau0), line through the origin."""
    tau = profile.grid.tau - profile.grid.tau0
    if tau.size < 2:
        raise DomainError("need at least two samples to fit a rate")
    gam = np.asarray(profile.gamma_cumulative, dtype=float)
    slope = float(np.dot(tau, gam) / np.dot(tau, tau))
    return slope / 4.0
