"""Command-line entry point: ``sitpulse COMMAND [options]``.

Each command writes CSV files plus one ``manifest.json`` into ``--out``.
Exit status is 0 on success, 2 for usage or configuration errors and 3 when
a numerical invariant is violated.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dressed, lindblad, propagation
from .bath import GHZ_TO_RAD_PER_NS, SpectralDensity, decoherence_factor
from .config import COMMANDS, RunConfig, schema_help
from .errors import ConfigError, DomainError, IntegrationError
from .numerics import Grid, cumtrapz, rk45_integrate
from .output import write_csv, write_manifest

log = logging.getLogger("sitpulse")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

DRESSED_HEADER = ["tau", "theta", "omega_plus", "phi_dyn", "phi_geo"]
TRAJECTORY_HEADER = ["tau", "rho11", "re_rho12", "im_rho12", "rho22", "purity"]
ENVELOPE_HEADER = ["tau", "envelope_closed", "envelope_oracle", "phase", "area", "rel_dev"]
PHASE_HEADER = ["tau", "envelope", "phase", "carrier", "carrier_reference"]
SURFACE_HEADER = ["x_over_v", "t", "envelope"]
RIDGE_HEADER = ["t", "x_peak_transparent", "x_peak_remainder", "separation",
                "height_transparent", "height_remainder", "velocity_ratio_remainder"]
SWEEP_HEADER = ["tau", "area", "phase"]
SUMMARY_HEADER = ["gamma_mhz", "c0_per_ns", "area_final", "phase_final", "phase_monotone"]


@dataclass
class RunResult:
    outputs: list = field(default_factory=list)
    grid: Grid | None = None
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


def _grid(cfg: RunConfig, extra_rates=()) -> Grid:
    return Grid(cfg["tau0"], cfg.tau1, cfg.grid_n(extra_rates))


def _params(cfg: RunConfig, c0: float | None = None, area0: float | None = None):
    return propagation.PropagationParams(
        M=cfg["M"], area0=cfg["area0"] if area0 is None else area0,
        c0=cfg.c0 if c0 is None else c0, v_over_c=cfg["v_over_c"], mu=cfg["mu"],
        tau0=cfg["tau0"], prefactor=cfg.prefactor,
    )


def _sech_drive(cfg: RunConfig, grid: Grid) -> propagation.PulseState:
    """Hypersecant drive of area ``area0`` centred at ``pulse_center``."""
    M, mu = cfg["M"], cfg["mu"]
    amp = cfg["area0"] / math.pi * M / mu
    env = amp / np.cosh(M * (grid.tau - cfg["pulse_center"]))
    phase = cfg["phi0"] + cfg["phi_rate"] * (grid.tau - grid.tau0)
    return propagation.PulseState.from_envelope(grid, env, phase, mu)


def _bath(cfg: RunConfig) -> SpectralDensity:
    if cfg["bath"] == "constant":
        return SpectralDensity.constant(cfg.gamma_rate)
    if cfg["bath"] == "ohmic":
        return SpectralDensity.ohmic(cfg["ohmic_eta"], cfg["ohmic_cutoff_ghz"] * GHZ_TO_RAD_PER_NS)
    return SpectralDensity.from_csv(cfg["bath_csv"])


def cmd_dressed(cfg: RunConfig) -> RunResult:
    grid = _grid(cfg)
    drive = _sech_drive(cfg, grid)
    delta = cfg.omega0 - cfg.omega
    mu_E = cfg["mu"] * drive.envelope
    theta = dressed.mixing_angle(mu_E, delta)
    w_plus, _ = dressed.dressed_eigenvalues(mu_E, delta)
    ph = dressed.adiabatic_phase(w_plus, theta, drive.phase, grid, "+")
    out = write_csv(cfg.out_dir / "dressed.csv", DRESSED_HEADER,
                    [grid.tau, theta, w_plus, ph.dynamic, ph.geometric])
    return RunResult([out], grid)


def cmd_evolve(cfg: RunConfig) -> RunResult:
    grid = _grid(cfg)
    drive = _sech_drive(cfg, grid)
    params = dressed.QubitParams(cfg.omega0, cfg.omega, cfg["mu"])
    bath = _bath(cfg)
    rho0 = {
        "excited": lindblad.DensityMatrix2.excited(),
        "ground": lindblad.DensityMatrix2.ground(),
        "plus": lindblad.DensityMatrix2.pure([1.0, 1.0]),
    }[cfg["rho0"]]
    if cfg["integrator"] == "rk45":
        gen = lindblad.drive_generator(drive, params, bath)
        rho, report = rk45_integrate(lambda t, r: lindblad._rhs(r, *gen(t)), rho0.entries, grid)
        traj = lindblad.Trajectory(grid, rho)
        for i, t in enumerate(grid.tau):
            herm, tr, me = lindblad.invariant_defects(rho[i])
            if max(herm, tr, -me) > lindblad.INSTABILITY_TOL:
                raise IntegrationError("density matrix left the physical set", t)
        extra = {"integrator": {"method": "rk45", "steps": report.steps,
                                "rejected_steps": report.rejected_steps}}
    else:
        traj = lindblad.evolve(rho0, drive, params, bath)
        extra = {"integrator": {"method": "rk4", "steps": grid.n - 1}}
    r = traj.rho
    out = write_csv(cfg.out_dir / "trajectory.csv", TRAJECTORY_HEADER,
                    [grid.tau, r[:, 0, 0].real, r[:, 0, 1].real, r[:, 0, 1].imag,
                     r[:, 1, 1].real, traj.purity])
    gamma = decoherence_factor(bath, np.hypot(params.delta, params.mu * drive.envelope),
                               drive.phase, grid)
    extra["gamma_final"] = float(gamma.gamma_cumulative[-1])
    return RunResult([out], grid, extra=extra)


def _regime_warnings(params) -> list[str]:
    if params.c0 >= params.M:
        return [f"C0={params.c0:.6g}/ns >= M={params.M:.6g} rad/ns: outside the slowly "
                "decaying regime; closed form and oracle may disagree"]
    return []


def cmd_envelope(cfg: RunConfig) -> RunResult:
    params = _params(cfg)
    grid = Grid(cfg["tau0"], cfg.tau1, cfg.grid_n([params.c0 * 4.0]))
    cmp = propagation.envelope_vs_oracle(params, grid)
    phase = propagation.phase_closed_form(params, grid, cfg["phi0"])
    area = params.area0 + params.mu * cumtrapz(cmp.closed, grid)
    out = write_csv(cfg.out_dir / "envelope.csv", ENVELOPE_HEADER,
                    [grid.tau, cmp.closed, cmp.oracle, phase, area, cmp.rel_dev])
    return RunResult([out], grid, _regime_warnings(params),
                     {"max_rel_dev": cmp.max_rel_dev, "tau_d_ns": params.tau_d})


def cmd_phase(cfg: RunConfig) -> RunResult:
    params = _params(cfg)
    grid = _grid(cfg, [cfg.omega])
    env = propagation.envelope_closed_form(params, grid.tau)
    phase = propagation.phase_closed_form(params, grid, cfg["phi0"])
    wt = cfg.omega * grid.tau
    out = write_csv(cfg.out_dir / "phase.csv", PHASE_HEADER,
                    [grid.tau, env, phase, env * np.cos(phase + wt),
                     env * np.cos(cfg["phi0"] + wt)])
    return RunResult([out], grid, _regime_warnings(params))


def ramify_axes(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    M = cfg["M"]
    step = cfg["raster_step"] or 0.02 / M
    t0, t1 = cfg["tau0"], cfg.tau1
    x0 = cfg["x_min"] if cfg["x_min"] is not None else t0 - 5.0 / M
    x1 = cfg["x_max"] if cfg["x_max"] is not None else t1 + 5.0 / M
    nx = int(round((x1 - x0) / step)) + 1
    nt = int(round((t1 - t0) / step)) + 1
    return np.linspace(x0, x1, nx), np.linspace(t0, t1, nt)


def cmd_ramify(cfg: RunConfig) -> RunResult:
    params = _params(cfg)
    if params.at_fixed_point:
        raise ConfigError("initial area is a multiple of 2 pi and does not ramify; "
                          "use the 'envelope' command for a single soliton", "area0")
    x, t = ramify_axes(cfg)
    surface = propagation.ramification_surface(params, x, t)
    trace = propagation.ridge_trace(surface)
    env = surface.envelope
    X, T = np.meshgrid(x, t)
    surf = write_csv(cfg.out_dir / "surface.csv", SURFACE_HEADER,
                     [X.ravel(), T.ravel(), env.ravel()])
    ridges = write_csv(cfg.out_dir / "ridges.csv", RIDGE_HEADER,
                       [trace.t, trace.x_peak_transparent, trace.x_peak_remainder,
                        trace.separation, trace.height_transparent, trace.height_remainder,
                        trace.velocity_remainder])
    grid = Grid(float(t[0]), float(t[-1]), t.size)
    return RunResult([surf, ridges], grid, _regime_warnings(params),
                     {"transparent_ridges_2pi": surface.n_transparent,
                      "remainder_area_rad": params.area0 - 2 * math.pi * surface.n_transparent})


def sweep_member_path(out_dir: Path, gamma_mhz: float) -> Path:
    return Path(out_dir) / f"sweep_gamma_{gamma_mhz:g}MHz.csv"


def _sweep_member(args):
    cfg_text, gamma_mhz, out_dir, grid = args
    cfg = RunConfig.from_text("sweep", cfg_text, out_dir)
    c0 = gamma_mhz * 1e-3 / 4.0
    params = _params(cfg, c0=c0)
    env = propagation.envelope_closed_form(params, grid.tau)
    area = params.area0 + params.mu * cumtrapz(env, grid)
    phase = propagation.phase_closed_form(params, grid, cfg["phi0"])
    path = write_csv(sweep_member_path(out_dir, gamma_mhz), SWEEP_HEADER, [grid.tau, area, phase])
    monotone = bool(np.all(np.diff(phase) >= 0))
    return str(path), [gamma_mhz, c0, area[-1], phase[-1], float(monotone)], phase


def cmd_sweep(cfg: RunConfig) -> RunResult:
    gammas = list(cfg["gammas_mhz"])
    grid = _grid(cfg, [max(gammas) * 1e-3])
    tasks = [(cfg.to_text(), g, cfg.out_dir, grid) for g in gammas]
    if cfg["workers"] > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg["workers"], len(tasks))) as pool:
            results = list(pool.map(_sweep_member, tasks))
    else:
        results = [_sweep_member(t) for t in tasks]
    outputs = [Path(r[0]) for r in results]
    rows = np.array([r[1] for r in results])
    summary = write_csv(cfg.out_dir / "sweep_summary.csv", SUMMARY_HEADER, rows.T)
    warnings = []
    order = np.argsort(gammas, kind="stable")
    phases = np.array([results[i][2] for i in order])
    if np.any(np.diff(phases, axis=0) < 0):
        warnings.append("phase curves are not pointwise ordered by gamma on this grid")
    if np.any(rows[:, 4] < 1):
        warnings.append("a phase curve is not monotone non-decreasing")
    return RunResult(outputs + [summary], grid, warnings)


COMMAND_FUNCS = {
    "dressed": cmd_dressed,
    "evolve": cmd_evolve,
    "envelope": cmd_envelope,
    "phase": cmd_phase,
    "ramify": cmd_ramify,
    "sweep": cmd_sweep,
}


def run(cfg: RunConfig) -> RunResult:
    """Execute one command and write its manifest."""
    start = time.perf_counter()
    result = COMMAND_FUNCS[cfg.command](cfg)
    duration = time.perf_counter() - start
    for w in result.warnings:
        log.warning(w)
    write_manifest(cfg.out_dir, cfg.command, cfg,
                   result.grid.digest() if result.grid is not None else None,
                   result.outputs, duration, result.warnings, result.extra)
    return result


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", "--set")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a subcommand's copy of a flag from clobbering the top-level one
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="flat key = value configuration file")
    common.add_argument("--out", type=Path, help="output directory (default ./out)")
    common.add_argument("--grid-n", type=int, help="number of local-time grid nodes")
    common.add_argument("--workers", type=int, help="concurrent sweep members")
    common.add_argument("--prefactor", choices=["calibrated", "printed"],
                        help="envelope prefactor convention")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="sitpulse",
        description="Solitary pulse propagation through a dissipative qubit; CSV output.",
        epilog="configuration keys:\n" + schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "dressed": "dressed-state angle, eigenvalue and adiabatic phases along a sech drive",
        "evolve": "Lindblad trajectory of the qubit density matrix",
        "envelope": "closed-form hypersecant envelope against the pendulum oracle",
        "phase": "accumulated carrier phase and carrier waveform",
        "ramify": "lab-frame ramification surface and ridge trace",
        "sweep": "area and phase curves for a list of spectral densities",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    opt = vars(args)
    logging.basicConfig(level=logging.INFO if opt.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _parse_set(opt.get("set"))
        for key in ("grid_n", "workers", "prefactor"):
            if opt.get(key) is not None:
                overrides[key] = opt[key]
        cfg = RunConfig.load(args.command, opt.get("config"), overrides, opt.get("out"))
        result = run(cfg)
    except (ConfigError, DomainError) as exc:
        print(f"sitpulse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"sitpulse: numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in result.outputs:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
