"""Run configuration: flat ``key = value`` files with command-line overrides.

Precedence is CLI override > config file > built-in defaults. Physical
inputs are given in laboratory units at this boundary (GHz for frequencies,
MHz for rates) and converted to rad/ns and 1/ns by :meth:`RunConfig.resolved`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .bath import GHZ_TO_RAD_PER_NS, MHZ_TO_PER_NS
from .errors import ConfigError

COMMANDS = ("dressed", "evolve", "envelope", "phase", "ramify", "sweep")
PREFACTORS = {"calibrated": 2.0, "printed": 4.0}
_SECTION = "run"


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(tok) for tok in str(text).replace(";", ",").split(",") if tok.strip()]


def _fmt_list(values) -> str:
    return ",".join(repr(float(v)) for v in values)


# key -> (parser, formatter, default, help)
_SCHEMA = {
    "omega_ghz": (float, repr, 5.0, "carrier frequency (GHz)"),
    "omega0_ghz": (float, repr, 5.0, "qubit transition frequency (GHz)"),
    "q_factor": (float, repr, 1e3, "quality factor; default gamma is omega/Q"),
    "gamma_mhz": (float, repr, None, "constant spectral density gamma = 4 C0 (MHz)"),
    "c0_per_ns": (float, repr, None, "constant decoherence rate C0 (1/ns); overrides gamma/4"),
    "gammas_mhz": (_float_list, _fmt_list, [5.0, 50.0, 100.0, 150.0], "sweep list (MHz)"),
    "M": (float, repr, 1.0, "pendulum frequency scale (rad/ns)"),
    "mu": (float, repr, 1.0, "dipole coupling (rad/ns per field unit)"),
    "v_over_c": (float, repr, 0.5, "wavefront to phase velocity ratio"),
    "area0": (float, repr, None, "initial enveloped area (rad)"),
    "prefactor": (str, str, "calibrated", "envelope prefactor: calibrated (2M/mu) or printed (4M/mu)"),
    "tau0": (float, repr, 0.0, "initial local time (ns)"),
    "tau1": (float, repr, None, "final local time (ns)"),
    "grid_n": (int, str, None, "number of grid nodes; default from the step rule"),
    "phi0": (float, repr, None, "initial carrier phase (rad)"),
    "phi_rate": (float, repr, 0.0, "linear phase drift of the drive (rad/ns)"),
    "pulse_center": (float, repr, None, "centre of the sech drive (ns)"),
    "rho0": (str, str, "excited", "initial qubit state: excited, ground or plus"),
    "bath": (str, str, "constant", "spectral density: constant, ohmic or tabulated"),
    "ohmic_eta": (float, repr, 1e-3, "ohmic prefactor (dimensionless)"),
    "ohmic_cutoff_ghz": (float, repr, math.inf, "ohmic cutoff (GHz)"),
    "bath_csv": (str, str, "", "tabulated spectral density CSV (GHz, MHz)"),
    "integrator": (str, str, "rk4", "rk4 (default) or rk45 for stiffness diagnosis"),
    "x_min": (float, repr, None, "raster start in x/v (ns)"),
    "x_max": (float, repr, None, "raster end in x/v (ns)"),
    "raster_step": (float, repr, None, "raster spacing in both x/v and t (ns)"),
    "workers": (int, str, 1, "concurrent sweep members"),
    "seed": (int, str, 0, "reserved; the core is deterministic"),
}

# Defaults that differ per command.
_COMMAND_DEFAULTS = {
    "dressed": {"area0": 2 * math.pi, "tau1": 40.0, "pulse_center": 20.0, "phi0": 0.0},
    "evolve": {"area0": 2 * math.pi, "tau1": 20.0, "pulse_center": 10.0, "phi0": math.pi / 2},
    "envelope": {"area0": 0.1, "tau1": 20.0, "phi0": 0.0},
    "phase": {"area0": math.pi, "tau1": None, "phi0": 0.0},
    "ramify": {"area0": 3 * math.pi, "tau1": None, "phi0": 0.0},
    "sweep": {"area0": math.pi, "tau1": None, "phi0": 0.0},
}


def schema_help() -> str:
    return "\n".join(f"  {k:18s} {v[3]}" for k, v in _SCHEMA.items())


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    out_dir: Path = Path("out")

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}", "command")
        merged = {k: spec[2] for k, spec in _SCHEMA.items()}
        merged.update(_COMMAND_DEFAULTS[self.command])
        for key, raw in self.values.items():
            merged[key] = self._parse(key, raw)
        self.values = merged
        self.validate()

    @staticmethod
    def _parse(key: str, raw):
        if key not in _SCHEMA:
            raise ConfigError("unknown configuration key", key)
        if raw is None:
            return None
        parser = _SCHEMA[key][0]
        try:
            return parser(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse {raw!r}: {exc}", key) from None

    def __getitem__(self, key: str):
        return self.values[key]

    # -- loading ------------------------------------------------------------

    @classmethod
    def parse_text(cls, text: str) -> dict:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        cp.optionxform = str
        try:
            cp.read_string(f"[{_SECTION}]\n{text}")
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        return dict(cp[_SECTION])

    @classmethod
    def load(cls, command: str, path=None, overrides: dict | None = None,
             out_dir=None) -> "RunConfig":
        values: dict = {}
        if path is not None:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}", "--config") from None
            values.update(cls.parse_text(text))
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls(command, values, Path(out_dir) if out_dir is not None else Path("out"))

    def to_text(self) -> str:
        lines = []
        for key, spec in _SCHEMA.items():
            val = self.values[key]
            if val is None:
                continue
            lines.append(f"{key} = {spec[1](val)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, command: str, text: str, out_dir=None) -> "RunConfig":
        return cls.load(command, None, cls.parse_text(text), out_dir)

    # -- validation and unit conversion ---------------------------------------

    def validate(self) -> None:
        v = self.values
        for key in ("omega_ghz", "omega0_ghz", "q_factor", "M", "mu"):
            if not (v[key] is not None and v[key] > 0 and math.isfinite(v[key])):
                raise ConfigError(f"must be positive and finite, got {v[key]!r}", key)
        if not 0 < v["v_over_c"] < 1:
            raise ConfigError(f"must lie in (0, 1), got {v['v_over_c']!r}", "v_over_c")
        for key in ("gamma_mhz", "c0_per_ns"):
            if v[key] is not None and not (v[key] >= 0 and math.isfinite(v[key])):
                raise ConfigError(f"must be non-negative, got {v[key]!r}", key)
        if self.command == "sweep":
            if not v["gammas_mhz"]:
                raise ConfigError("sweep needs a non-empty list", "gammas_mhz")
            if any(not (g >= 0) for g in v["gammas_mhz"]):
                raise ConfigError("spectral densities must be non-negative", "gammas_mhz")
        if v["prefactor"] not in PREFACTORS:
            raise ConfigError(f"must be one of {sorted(PREFACTORS)}", "prefactor")
        if v["rho0"] not in ("excited", "ground", "plus"):
            raise ConfigError("must be excited, ground or plus", "rho0")
        if v["bath"] not in ("constant", "ohmic", "tabulated"):
            raise ConfigError("must be constant, ohmic or tabulated", "bath")
        if v["bath"] == "tabulated" and not v["bath_csv"]:
            raise ConfigError("tabulated bath needs bath_csv", "bath_csv")
        if v["integrator"] not in ("rk4", "rk45"):
            raise ConfigError("must be rk4 or rk45", "integrator")
        if v["grid_n"] is not None and v["grid_n"] < 3:
            raise ConfigError("need at least 3 nodes", "grid_n")
        if v["workers"] < 1:
            raise ConfigError("need at least one worker", "workers")
        if v["area0"] is None or not math.isfinite(v["area0"]) or v["area0"] < 0:
            raise ConfigError("must be a finite non-negative area", "area0")
        if v["raster_step"] is not None and not v["raster_step"] > 0:
            raise ConfigError("must be positive", "raster_step")
        tau1 = self.tau1
        if not tau1 > v["tau0"]:
            raise ConfigError(f"must exceed tau0={v['tau0']}", "tau1")

    @property
    def omega(self) -> float:
        return self.values["omega_ghz"] * GHZ_TO_RAD_PER_NS

    @property
    def omega0(self) -> float:
        return self.values["omega0_ghz"] * GHZ_TO_RAD_PER_NS

    @property
    def carrier_period(self) -> float:
        return 1.0 / self.values["omega_ghz"]

    @property
    def tau1(self) -> float:
        t = self.values["tau1"]
        if t is None:
            # twenty carrier periods after tau0
            return self.values["tau0"] + 20.0 * self.carrier_period
        return t

    @property
    def gamma_mhz(self) -> float:
        g = self.values["gamma_mhz"]
        if g is None:
            # gamma = omega / Q, quoted in MHz
            return self.values["omega_ghz"] * 1e3 / self.values["q_factor"]
        return g

    @property
    def gamma_rate(self) -> float:
        return self.gamma_mhz * MHZ_TO_PER_NS

    @property
    def c0(self) -> float:
        c = self.values["c0_per_ns"]
        return self.gamma_rate / 4.0 if c is None else c

    @property
    def prefactor(self) -> float:
        return PREFACTORS[self.values["prefactor"]]

    def grid_n(self, extra_rates=()) -> int:
        """Honour ``grid_n`` or pick n so that h <= min(0.01/M, 0.01/max rate)."""
        if self.values["grid_n"] is not None:
            return self.values["grid_n"]
        rates = [self.gamma_rate, *extra_rates]
        h_max = 0.01 / self.values["M"]
        top = max(rates)
        if top > 0:
            h_max = min(h_max, 0.01 / top)
        span = self.tau1 - self.values["tau0"]
        return max(3, int(math.ceil(span / h_max - 1e-9)) + 1)

    def resolved(self) -> dict:
        """Parameters after unit conversion, for the manifest."""
        v = self.values
        return {
            "user_units": {k: (list(val) if isinstance(val, list) else val)
                           for k, val in v.items() if val is not None},
            "internal": {
                "omega_rad_per_ns": self.omega,
                "omega0_rad_per_ns": self.omega0,
                "delta_rad_per_ns": self.omega0 - self.omega,
                "gamma_per_ns": self.gamma_rate,
                "c0_per_ns": self.c0,
                "M_rad_per_ns": v["M"],
                "mu": v["mu"],
                "tau0_ns": v["tau0"],
                "tau1_ns": self.tau1,
                "area0_rad": v["area0"],
                "prefactor_M_over_mu": self.prefactor,
            },
            "conversions": {
                "GHz_to_rad_per_ns": GHZ_TO_RAD_PER_NS,
                "MHz_rate_to_per_ns": MHZ_TO_PER_NS,
                "MHz_angular_to_rad_per_ns": GHZ_TO_RAD_PER_NS * MHZ_TO_PER_NS,
            },
        }
