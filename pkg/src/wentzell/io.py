"""CSV and JSON export with round-trip readers.

CSV floats use ``%.17g`` so a read-back reproduces every double exactly;
JSON relies on Python's shortest round-trip ``repr`` for floats.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import Eigenpair
from .state import Control, Grid, State

SCHEMA_VERSION = "1"
FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    return FLOAT_FMT % x


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _read_columns(path) -> dict[str, list[str]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def write_eigen_csv(path, pairs: Sequence[Eigenpair]) -> Path:
    rows = ((p.n, p.kind.value, float(p.mu), float(p.lam), float(p.norm_H)) for p in pairs)
    return _write_rows(path, ("n", "kind", "mu", "lambda", "norm_H"), rows)


def read_eigen_csv(path) -> dict[str, np.ndarray]:
    cols = _read_columns(path)
    out = {"n": np.array(cols["n"], dtype=int), "kind": np.array(cols["kind"])}
    for k in ("mu", "lambda", "norm_H"):
        out[k] = np.array(cols[k], dtype=float)
    return out


def write_control_csv(path, f: Control) -> Path:
    return _write_rows(path, ("t", "f"), zip(map(float, f.times), map(float, f.samples)))


def read_control_csv(path) -> Control:
    cols = _read_columns(path)
    return Control(np.array(cols["t"], dtype=float), np.array(cols["f"], dtype=float))


def write_trajectory_csv(path, times: np.ndarray, grid: Grid, states: np.ndarray,
                         stride: int = 1) -> Path:
    """Long format ``t, x, u``; ``stride`` thins the time levels (the last level is kept)."""
    idx = list(range(0, len(times), max(int(stride), 1)))
    if idx[-1] != len(times) - 1:
        idx.append(len(times) - 1)
    x = grid.nodes

    def rows():
        for k in idx:
            t = float(times[k])
            for j in range(x.size):
                yield t, float(x[j]), float(states[k, j])

    return _write_rows(path, ("t", "x", "u"), rows())


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns ``(times, x, u)`` with ``u`` shaped (len(times), len(x))."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = np.unique(data[:, 0])
    x = np.unique(data[:, 1])
    return times, x, data[:, 2].reshape(times.size, x.size)


def write_residuals_csv(path, residuals: Sequence[float]) -> Path:
    return _write_rows(path, ("iteration", "residual"),
                       ((k, float(r)) for k, r in enumerate(residuals)))


def read_residuals_csv(path) -> np.ndarray:
    return np.array(_read_columns(path)["residual"], dtype=float)


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and paths; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"schema_version": SCHEMA_VERSION, **to_jsonable(payload)}
    path.write_text(json.dumps(body, indent=2, sort_keys=False) + "\n")
    return path


def read_json(path) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {data.get('schema_version')!r}")
    return data


def write_state_json(path, state: State, t: float | None = None) -> Path:
    return write_json(path, {"kind": "state", "t": t, "n_x": state.grid.n_x,
                             "values": state.values, "boundary": state.boundary})


def read_state_json(path) -> State:
    data = read_json(path)
    return State(Grid(int(data["n_x"])), np.array(data["values"], dtype=float))
