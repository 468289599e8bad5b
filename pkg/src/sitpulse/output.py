"""CSV emission and run manifests."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .dressed import GEOMETRIC_PHASE_SIGN

FLOAT_FORMAT = "{:.14e}"


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return FLOAT_FORMAT.format(x + 0.0)  # folds -0.0 into 0.0


def write_csv(path, header: list[str], columns) -> Path:
    """Write equal-length columns as an RFC-4180 CSV with a header row."""
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("header and column count differ")
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("columns have different lengths")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(n):
            w.writerow([fmt(c[i]) for c in cols])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)


def prefactor_name(prefactor: float) -> str:
    return {2.0: "calibrated", 4.0: "printed"}.get(float(prefactor), "custom")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_manifest(out_dir, command: str, config, grid_digest: str | None, outputs,
                   duration_s: float, warnings=(), extra: dict | None = None) -> Path:
    """Emit ``manifest.json`` next to the run outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "tool_version": __version__,
        "python": platform.python_version(),
        "parameters": config.resolved(),
        "config_text": config.to_text(),
        "grid_hash": grid_digest,
        "prefactor_convention": {
            "name": prefactor_name(config.prefactor),
            "value_M_over_mu": config.prefactor,
        },
        "geometric_phase_sign": GEOMETRIC_PHASE_SIGN,
        "wall_clock_s": duration_s,
        "warnings": list(warnings),
        "outputs": [str(Path(p).name) for p in outputs],
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(_jsonable(manifest), indent=2, allow_nan=False, default=str) + "\n")
    return path
