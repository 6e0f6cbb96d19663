"""Run configuration files and output artifacts: history CSV, legacy VTK
fields and a JSON summary."""
from __future__ import annotations

import configparser
import csv
import json
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .driver import HistoryRecord, RunConfig
from .grid import ParameterError, PeriodicGrid

SECTIONS = {
    "problem": ("preset", "method", "n", "holes", "hole_radius", "solver"),
    "output": (),
}
OUTPUT_KEYS = ("out", "snapshot_every")


def _coerce(name: str, raw: str):
    ftype = {f.name: f.type for f in fields(RunConfig)}[name]
    text = raw.strip()
    if "None" in str(ftype) and text.lower() in ("", "none"):
        return None
    try:
        if str(ftype).startswith("int"):
            return int(text)
        if str(ftype).startswith("float"):
            return float(text)
    except ValueError:
        raise ParameterError(f"{name} = {text!r} is not a valid {str(ftype).split(' ')[0]}") from None
    return text


def read_config(path: str | Path) -> tuple[RunConfig, dict]:
    """Parse a ``[problem]`` / ``[params]`` / ``[output]`` file.

    Returns the config (preset overrides applied beneath explicit keys) and
    the ``[output]`` options.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    unknown = set(parser.sections()) - {"problem", "params", "output"}
    if unknown:
        raise ParameterError(f"unknown config sections: {sorted(unknown)}")
    known = set(RunConfig.field_names())
    values = {}
    for section in ("problem", "params"):
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in known:
                    raise ParameterError(f"unknown key {key!r} in [{section}]")
                values[key] = _coerce(key, raw)
    output = {}
    if parser.has_section("output"):
        for key, raw in parser.items("output"):
            if key not in OUTPUT_KEYS:
                raise ParameterError(f"unknown key {key!r} in [output]")
            output[key] = int(raw) if key == "snapshot_every" else raw.strip()
    preset = values.pop("preset", "bulk2d")
    config = RunConfig.for_preset(preset, **values)
    config.validate()
    return config, output


def write_config(config: RunConfig, path: str | Path, output: dict | None = None) -> Path:
    """Write every field of ``config`` so that ``read_config`` reproduces it."""
    path = Path(path)
    data = asdict(config)
    lines = ["[problem]"]
    lines += [f"{k} = {data[k]}" for k in SECTIONS["problem"]]
    lines.append("")
    lines.append("[params]")
    lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}"
              for k, v in data.items() if k not in SECTIONS["problem"]]
    if output:
        lines += ["", "[output]"] + [f"{k} = {v}" for k, v in output.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def _num(x: float) -> str:
    return repr(float(x))


def emit_history(records: list[HistoryRecord], path: str | Path) -> Path:
    """One CSV row per accepted iteration, floats at full round-trip precision."""
    if not records:
        raise ValueError("history is empty")
    path = Path(path)
    n_con = len(records[0].constraints)
    header = ["iter", "J"] + [f"C_{i}" for i in range(1, n_con + 1)] + \
             ["gamma", "rejections", "alpha_sq", "lambda_used", "wall_ms"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in records:
            w.writerow([r.iteration, _num(r.objective), *map(_num, r.constraints), _num(r.gamma),
                        r.rejections, _num(r.alpha_sq_sum), _num(r.lambda_used), _num(r.wall_ms)])
    return path


def read_history(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}


def write_vtk(grid: PeriodicGrid, field: np.ndarray, path: str | Path, name: str = "phi") -> Path:
    """ASCII legacy VTK structured points; x varies fastest."""
    field = np.asarray(field, dtype=float)
    grid.check(field)
    n, h = grid.n, grid.dx
    path = Path(path)
    values = field.T.ravel()  # field is indexed [i_x, i_y]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {n} {n} 1\nORIGIN 0 0 0\nSPACING {h!r} {h!r} 1\n")
        fh.write(f"POINT_DATA {n * n}\nSCALARS {name} double 1\nLOOKUP_TABLE default\n")
        for start in range(0, values.size, 8):
            fh.write(" ".join(f"{v:.12g}" for v in values[start:start + 8]) + "\n")
    return path


def read_vtk(path: str | Path) -> np.ndarray:
    """Read back a file written by ``write_vtk`` as an ``(n, n)`` array."""
    tokens = Path(path).read_text().split("\n")
    dims = next(line for line in tokens if line.startswith("DIMENSIONS")).split()[1:3]
    nx, ny = int(dims[0]), int(dims[1])
    start = next(i for i, line in enumerate(tokens) if line.startswith("LOOKUP_TABLE")) + 1
    vals = np.array(" ".join(tokens[start:]).split(), dtype=float)
    return vals.reshape(ny, nx).T


def emit_fields(state, directory: str | Path, tag: str = "final") -> list[Path]:
    """Write each level set as ``phi[_k]_<tag>.vtk``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for m, phi in enumerate(state.phi):
        name = "phi" if state.num_phases == 1 else f"phi{m + 1}"
        paths.append(write_vtk(state.grid, phi, directory / f"{name}_{tag}.vtk", name))
    return paths


def emit_summary(summary: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, default=float) + "\n")
    return path
