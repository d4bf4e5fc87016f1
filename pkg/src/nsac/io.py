"""Config parsing and bit-stable on-disk formats (CSV, legacy VTK, manifest).

Reals are printed with 17 significant digits so binary64 values survive a
write/read round trip bitwise. The config format is line-oriented
``section.key = value`` with ``#`` comments; unknown keys are hard errors.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import EnergyReport, REITrace, RelEntropyTrace
from .experiments import ExperimentConfig
from .solver import State

FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    """Malformed, unknown, or out-of-range configuration entry."""


class SchemaError(ValueError):
    """CSV file does not match the expected column schema."""


# ---------------------------------------------------------------------------
# config

_KEYS = {
    "grid.n": ("grid_n", int),
    "grid.length": ("length", float),
    "fluid.nu": ("nu", float),
    "fluid.eps": ("eps", float),
    "time.dt": ("dt", float),
    "time.t_end": ("t_end", float),
    "potential.kind": ("potential_kind", str),
    "potential.f1": ("potential_f1", float),
    "potential.f2": ("potential_f2", float),
    "init.kind": ("init_kind", str),
    "init.seed": ("init_seed", int),
    "init.amplitude": ("init_amplitude", float),
    "perturbation.delta": ("perturbation_delta", float),
    "wsu.levels": ("wsu_levels", "int_list"),
    "output.dir": ("output_dir", str),
    "output.every": ("output_every", int),
    "output.samples": ("sample_count", int),
}

_POSITIVE = {"grid.n", "grid.length", "fluid.nu", "fluid.eps", "time.dt",
             "time.t_end", "output.every", "output.samples"}
_NONNEGATIVE = {"perturbation.delta", "init.seed"}


def _parse_value(key: str, raw: str, lineno: int):
    _, kind = _KEYS[key]
    try:
        if kind is int:
            value = int(raw)
        elif kind is float:
            value = float(raw)
        elif kind == "int_list":
            value = tuple(int(part) for part in raw.split(","))
        else:
            value = raw
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse value {raw!r} for {key}")
    if key in _POSITIVE and not (value > 0):
        raise ConfigError(f"line {lineno}: {key} must be positive, got {raw}")
    if key in _NONNEGATIVE and not (value >= 0):
        raise ConfigError(f"line {lineno}: {key} must be nonnegative, got {raw}")
    return value


def parse_config_text(text: str) -> ExperimentConfig:
    kwargs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr = _KEYS[key][0]
        if attr in kwargs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kwargs[attr] = _parse_value(key, raw, lineno)
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc))


def parse_config(path: str) -> ExperimentConfig:
    """Parse a config file; an empty file yields the full default config."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config_text(text)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Full key = value dump; parse_config_text on it reproduces cfg."""
    lines = []
    for key, (attr, kind) in _KEYS.items():
        value = getattr(cfg, attr)
        if kind is float:
            text = FLOAT_FMT % value
        elif kind == "int_list":
            text = ",".join(str(v) for v in value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV tables

ENERGY_COLUMNS = ("t", "kinetic", "interfacial", "potential", "viscous_diss",
                  "ac_diss", "cumulative_diss", "audit_violation")
ENTROPY_COLUMNS = ("t", "E", "D", "omega", "bound_curve")
REI_COLUMNS = ("t", "lhs_entropy_gap", "lhs_visc", "lhs_ac", "r_conv",
               "r_eps1", "r_eps2", "r_eps3", "r_eps4", "r_f", "slack")


def _write_table(path: str, header: tuple[str, ...], columns: list[np.ndarray]):
    if columns and any(len(col) != len(columns[0]) for col in columns):
        raise ValueError("ragged columns")
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        if not columns:
            return
        for i in range(len(columns[0])):
            fh.write(",".join(FLOAT_FMT % col[i] for col in columns) + "\n")


def _read_table(path: str, header: tuple[str, ...]) -> list[np.ndarray]:
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines:
        raise SchemaError(f"{path}: empty file, expected header {','.join(header)}")
    found = tuple(lines[0].split(","))
    if found != header:
        missing = [name for name in header if name not in found]
        extra = [name for name in found if name not in header]
        detail = []
        if missing:
            detail.append(f"missing column(s) {', '.join(missing)}")
        if extra:
            detail.append(f"unexpected column(s) {', '.join(extra)}")
        raise SchemaError(f"{path}: {'; '.join(detail) or 'column order mismatch'}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaError(
                f"{path}: line {lineno} has {len(parts)} fields, expected {len(header)}"
            )
        rows.append([float(p) for p in parts])
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return [data[:, j].copy() for j in range(len(header))]


def write_energy_csv(reports: list[EnergyReport], path: str):
    """Energy trace with the running audit violation in the last column."""
    e0 = reports[0].total if reports else 0.0
    scale = e0 if e0 > 0 else 1.0
    cols = [
        np.array([r.t for r in reports]),
        np.array([r.kinetic for r in reports]),
        np.array([r.interfacial for r in reports]),
        np.array([r.potential for r in reports]),
        np.array([r.viscous_diss for r in reports]),
        np.array([r.ac_diss for r in reports]),
        np.array([r.cumulative_diss for r in reports]),
        np.array([(r.total + r.cumulative_diss - e0) / scale for r in reports]),
    ]
    _write_table(path, ENERGY_COLUMNS, cols if reports else [])


def read_energy_csv(path: str) -> tuple[list[EnergyReport], np.ndarray]:
    cols = _read_table(path, ENERGY_COLUMNS)
    if not cols or len(cols[0]) == 0:
        return [], np.empty(0)
    reports = [
        EnergyReport(
            t=cols[0][i], kinetic=cols[1][i], interfacial=cols[2][i],
            potential=cols[3][i], viscous_diss=cols[4][i], ac_diss=cols[5][i],
            cumulative_diss=cols[6][i],
        )
        for i in range(len(cols[0]))
    ]
    return reports, cols[7]


def write_entropy_csv(trace: RelEntropyTrace, bound_curve: np.ndarray, path: str):
    cols = [np.asarray(trace.times), np.asarray(trace.E), np.asarray(trace.D),
            np.asarray(trace.omega), np.asarray(bound_curve)]
    _write_table(path, ENTROPY_COLUMNS, cols)


def read_entropy_csv(path: str) -> tuple[RelEntropyTrace, np.ndarray]:
    cols = _read_table(path, ENTROPY_COLUMNS)
    trace = RelEntropyTrace(times=cols[0], E=cols[1], D=cols[2], omega=cols[3])
    return trace, cols[4]


def write_rei_csv(trace: REITrace, path: str):
    cols = [np.asarray(getattr(trace, name if name != "t" else "times"))
            for name in REI_COLUMNS]
    _write_table(path, REI_COLUMNS, cols)


def read_rei_csv(path: str) -> REITrace:
    cols = _read_table(path, REI_COLUMNS)
    names = ["times"] + list(REI_COLUMNS[1:])
    return REITrace(**dict(zip(names, cols)))


# ---------------------------------------------------------------------------
# VTK snapshots


def write_vtk(state: State, path: str, comment: str = "nsac snapshot"):
    """Legacy ASCII STRUCTURED_POINTS file with cell data c, p, u (averaged)."""
    from .grid import avg_to_cells

    grid = state.grid
    n = list(grid.n) + [1] * (3 - grid.dim)
    h = list(grid.h) + [1.0] * (3 - grid.dim)
    dims = [n[0] + 1, n[1] + 1, (n[2] + 1) if grid.dim == 3 else 1]
    ncells = int(np.prod(grid.n))
    u_cells = avg_to_cells(state.u)

    def scalars(fh, name, values):
        fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for v in np.asarray(values).ravel(order="F"):
            fh.write(FLOAT_FMT % v + "\n")

    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(comment + "\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        fh.write("ORIGIN 0 0 0\n")
        fh.write(f"SPACING {FLOAT_FMT % h[0]} {FLOAT_FMT % h[1]} {FLOAT_FMT % h[2]}\n")
        fh.write(f"CELL_DATA {ncells}\n")
        scalars(fh, "c", state.c.values)
        scalars(fh, "p", state.p.values)
        for a in range(grid.dim):
            scalars(fh, f"u_{'xyz'[a]}", u_cells[a])


# ---------------------------------------------------------------------------
# run manifest


@dataclass
class RunManifest:
    """Record of one CLI invocation: resolved config, version, outputs."""

    config: dict[str, str]
    version: str
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)

    def add(self, path: str) -> str:
        self.outputs.append(os.path.basename(path))
        return path

    def write(self, path: str):
        for name in self.outputs:
            full = os.path.join(os.path.dirname(path), name)
            if not os.path.exists(full) or os.path.getsize(full) == 0:
                raise IOError(f"manifest lists missing or empty output {name}")
        with open(path, "w") as fh:
            json.dump(dataclasses.asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def config_echo(cfg: ExperimentConfig) -> dict[str, str]:
    lines = serialize_config(cfg).strip().splitlines()
    return dict(line.split(" = ", 1) for line in lines)
