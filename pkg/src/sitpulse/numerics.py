"""Shared numerical kernels: fixed-step RK4, cumulative trapezoid, finite differences.

Everything downstream integrates on a uniform local-time :class:`Grid` so that
quadratures and ODE solutions are available at exactly the same nodes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, IntegrationError

RHS = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``tau0, tau0 + h, ..., tau1`` with ``n`` samples (ns)."""

    tau0: float
    tau1: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"grid needs at least 2 samples, got n={self.n}")
        if not (math.isfinite(self.tau0) and math.isfinite(self.tau1)):
            raise DomainError("grid bounds must be finite")
        if not self.tau1 > self.tau0:
            raise DomainError(f"grid requires tau1 > tau0, got [{self.tau0}, {self.tau1}]")

    @classmethod
    def with_max_step(cls, tau0: float, tau1: float, h_max: float) -> "Grid":
        """Smallest uniform grid on ``[tau0, tau1]`` whose step does not exceed ``h_max``."""
        if not h_max > 0:
            raise DomainError(f"h_max must be positive, got {h_max}")
        n = int(math.ceil((tau1 - tau0) / h_max - 1e-12)) + 1
        return cls(tau0, tau1, max(n, 2))

    @property
    def h(self) -> float:
        return (self.tau1 - self.tau0) / (self.n - 1)

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(self.tau0, self.tau1, self.n)

    def __len__(self) -> int:
        return self.n

    def digest(self) -> str:
        """Short stable hash of the grid definition, used in run manifests."""
        key = f"{self.tau0!r}:{self.tau1!r}:{self.n}".encode()
        return hashlib.sha256(key).hexdigest()[:16]


@dataclass
class IntegratorReport:
    steps: int = 0
    max_rhs_norm: float = 0.0
    rejected_steps: int = 0
    method: str = "rk4"
    extra: dict = field(default_factory=dict)


def stage_lookup(fn: Callable, grid: Grid) -> Callable:
    """Tabulate a vectorised ``fn`` at the RK4 stage times of ``grid``.

    Nodes and midpoints are served from the table; any other time falls back
    to ``fn`` itself. ``fn`` may return an array or a tuple of arrays.
    """
    half = 0.5 * grid.h
    size = 2 * grid.n - 1
    table = fn(np.linspace(grid.tau0, grid.tau1, size))
    if isinstance(table, tuple):
        columns = [np.broadcast_to(t, (size,) + np.shape(t)[1:]) for t in table]
        pick = lambda i: tuple(c[i] for c in columns)  # noqa: E731
    else:
        pick = table.__getitem__

    def lookup(tau):
        k = (tau - grid.tau0) / half
        i = int(round(k))
        if abs(k - i) < 1e-6 and 0 <= i < size:
            return pick(i)
        return fn(tau)

    return lookup


def _check_finite(k: np.ndarray, tau: float, stage: int) -> None:
    if not np.isfinite(k).all():
        raise IntegrationError(f"non-finite right-hand side in RK4 stage {stage}", tau)


def rk4_step(rhs: RHS, y: np.ndarray, tau: float, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step from ``tau`` to ``tau + h``."""
    return _rk4(rhs, y, tau, h)[0]


def _rk4(rhs: RHS, y: np.ndarray, tau: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    k1 = rhs(tau, y)
    _check_finite(k1, tau, 1)
    k2 = rhs(tau + 0.5 * h, y + 0.5 * h * k1)
    _check_finite(k2, tau + 0.5 * h, 2)
    k3 = rhs(tau + 0.5 * h, y + 0.5 * h * k2)
    _check_finite(k3, tau + 0.5 * h, 3)
    k4 = rhs(tau + h, y + h * k3)
    _check_finite(k4, tau + h, 4)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


def rk4_integrate(
    rhs: RHS,
    y0,
    grid: Grid,
    callback: Callable[[int, float, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, IntegratorReport]:
    """Integrate ``y' = rhs(tau, y)`` over every node of ``grid``.

    Returns the trajectory with shape ``(grid.n, *y0.shape)`` and a report.
    ``callback(i, tau_i, y_i)`` is invoked after each accepted node and may
    raise to abort the run.
    """
    y = np.asarray(y0)
    if not np.iscomplexobj(y):
        y = y.astype(float)
    taus = grid.tau
    h = grid.h
    out = np.empty((grid.n,) + y.shape, dtype=y.dtype)
    out[0] = y
    report = IntegratorReport()
    if callback is not None:
        callback(0, taus[0], y)
    for i in range(grid.n - 1):
        y, k1 = _rk4(rhs, y, taus[i], h)
        report.max_rhs_norm = max(report.max_rhs_norm, float(np.max(np.abs(k1))))
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state after RK4 step", taus[i + 1])
        out[i + 1] = y
        report.steps += 1
        if callback is not None:
            callback(i + 1, taus[i + 1], y)
    return out, report


def rk45_integrate(
    rhs: RHS, y0, grid: Grid, rtol: float = 1e-10, atol: float = 1e-12
) -> tuple[np.ndarray, IntegratorReport]:
    """Adaptive Dormand-Prince integration sampled on ``grid`` nodes.

    Only meant for stiffness diagnosis; the fixed-step path is the default.
    """
    y0 = np.asarray(y0)
    shape = y0.shape
    flat = y0.ravel()

    def f(t, yf):
        return np.asarray(rhs(t, yf.reshape(shape))).ravel()

    sol = solve_ivp(f, (grid.tau0, grid.tau1), flat.astype(complex) if np.iscomplexobj(flat) else flat,
                    method="RK45", dense_output=True, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"RK45 failed: {sol.message}", float(sol.t[-1]))
    out = sol.sol(grid.tau).T.reshape((grid.n,) + shape)
    accepted = sol.t.size - 1
    # 2 evaluations pick the initial step, then 6 per attempted step (FSAL)
    attempted = (int(sol.nfev) - 2) // 6
    report = IntegratorReport(steps=accepted, rejected_steps=max(0, attempted - accepted),
                              method="rk45", extra={"nfev": int(sol.nfev)})
    return out, report


def _as_samples(samples, grid: Grid | None, name: str = "samples") -> np.ndarray:
    f = np.asarray(samples)
    if f.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if grid is not None and f.size != grid.n:
        raise DomainError(f"{name} has {f.size} values but grid has {grid.n} nodes")
    return f


def cumtrapz(samples, grid: Grid) -> np.ndarray:
    """Cumulative trapezoid integral on ``grid`` with ``out[0] == 0``."""
    f = _as_samples(samples, grid)
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    out[1:] = np.cumsum(0.5 * grid.h * (f[:-1] + f[1:]))
    return out


def fd_derivative(samples, grid: Grid) -> np.ndarray:
    """Second-order finite-difference derivative.

    Central differences in the interior, second-order one-sided at the ends.
    """
    f = _as_samples(samples, grid)
    if f.size < 3:
        raise DomainError("fd_derivative needs at least 3 samples")
    return np.gradient(f, grid.h, edge_order=2)


def fd_second_derivative(samples, grid: Grid) -> np.ndarray:
    """Second derivative by the 3-point stencil, second-order one-sided at the ends."""
    f = _as_samples(samples, grid)
    if f.size < 4:
        raise DomainError("fd_second_derivative needs at least 4 samples")
    h2 = grid.h**2
    out = np.empty_like(f, dtype=np.result_type(f, float))
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    return out
