"""Delimited text formats for every artifact the pipeline persists.

Numeric grids use repr() formatting so values round-trip bit-exactly.
Structured metadata (provenance, selections, manifests) is JSON. Grid-like
files carry their dimensions on the first line.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .errors import DataError
from .greedy import SelectionResult
from .imputation import ObservationSet
from .occupancy import LocationSet, OccupancyTensor, Stop

logger = logging.getLogger(__name__)


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _fmt(x: float) -> str:
    return repr(float(x))


def _read_lines(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return path.read_text().splitlines()


def _parse_ints(path: Path, lineno: int, line: str, n: int) -> list[int]:
    parts = line.split(",")
    if len(parts) != n:
        raise DataError(f"{path}:{lineno}: expected {n} comma-separated fields, got {len(parts)}")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise DataError(f"{path}:{lineno}: unparseable integer in {line!r}") from None


# -- occupancy tensor: header line "L,T,B" values, then sorted "l,t,b" triples --

def write_tensor(path: str | Path, tensor: OccupancyTensor) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{tensor.L},{tensor.T},{tensor.B}\n")
        for l, t, b in tensor.entries():
            fh.write(f"{l},{t},{b}\n")
    if tensor.meta:
        _meta_path(path).write_text(json.dumps(tensor.meta, indent=2) + "\n")


def read_tensor(path: str | Path) -> OccupancyTensor:
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty tensor file")
    L, T, B = _parse_ints(path, 1, lines[0], 3)
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        l, t, b = _parse_ints(path, lineno, line, 3)
        if not (0 <= l < L and 0 <= t < T and 0 <= b < B):
            raise DataError(f"{path}:{lineno}: entry ({l},{t},{b}) outside header dimensions {L},{T},{B}")
        entries.append((l, t, b))
    meta = None
    if _meta_path(path).exists():
        meta = json.loads(_meta_path(path).read_text())
    return OccupancyTensor.from_entries(L, T, B, entries, meta=meta)


# -- monitoring locations: "stop_id,lat,lon" rows plus a metadata sidecar --

def write_locations(path: str | Path, locations: LocationSet) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("stop_id,lat,lon\n")
        for s in locations.stops:
            fh.write(f"{s.stop_id},{_fmt(s.lat)},{_fmt(s.lon)}\n")
    _meta_path(path).write_text(json.dumps({"min_separation_m": locations.min_separation_m}) + "\n")


def read_locations(path: str | Path) -> LocationSet:
    path = Path(path)
    lines = _read_lines(path)
    if not lines or lines[0] != "stop_id,lat,lon":
        raise DataError(f"{path}: missing 'stop_id,lat,lon' header")
    stops = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            stops.append(Stop(parts[0], float(parts[1]), float(parts[2])))
        except ValueError:
            raise DataError(f"{path}:{lineno}: unparseable coordinates") from None
    min_sep = 0.0
    if _meta_path(path).exists():
        min_sep = float(json.loads(_meta_path(path).read_text()).get("min_separation_m", 0.0))
    return LocationSet(tuple(stops), min_sep)


# -- similarity grid: "L" header line, then an L x L comma-separated grid --

def write_similarity(path: str | Path, S: np.ndarray) -> None:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"similarity must be square, got shape {S.shape}")
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{S.shape[0]}\n")
        for row in S:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_similarity(path: str | Path) -> np.ndarray:
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty similarity file")
    (L,) = _parse_ints(path, 1, lines[0], 1)
    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != L:
        raise DataError(f"{path}: header says L={L} but found {len(rows)} rows")
    out = np.empty((L, L))
    for i, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != L:
            raise DataError(f"{path}:{i + 2}: expected {L} values, got {len(parts)}")
        try:
            out[i] = [float(p) for p in parts]
        except ValueError:
            raise DataError(f"{path}:{i + 2}: unparseable value") from None
    return out


# -- dense matrix grid: "rows,cols" header, then the grid; provenance sidecar --

def write_matrix(path: str | Path, values: np.ndarray, meta: dict | None = None) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {values.shape}")
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{values.shape[0]},{values.shape[1]}\n")
        for row in values:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    if meta is not None:
        _meta_path(path).write_text(json.dumps(meta, indent=2, default=float) + "\n")


def read_matrix(path: str | Path) -> tuple[np.ndarray, dict | None]:
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty matrix file")
    n_rows, n_cols = _parse_ints(path, 1, lines[0], 2)
    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != n_rows:
        raise DataError(f"{path}: header says {n_rows} rows but found {len(rows)}")
    out = np.empty((n_rows, n_cols))
    for i, line in enumerate(rows):
        parts = line.split(",")
        if len(parts) != n_cols:
            raise DataError(f"{path}:{i + 2}: expected {n_cols} values, got {len(parts)}")
        try:
            out[i] = [float(p) for p in parts]
        except ValueError:
            raise DataError(f"{path}:{i + 2}: unparseable value") from None
    meta = json.loads(_meta_path(path).read_text()) if _meta_path(path).exists() else None
    return out, meta


# -- station readings: matrix grid plus a "lat,lon" coordinates sidecar --

def write_readings(path: str | Path, readings: np.ndarray, coords: np.ndarray) -> None:
    path = Path(path)
    readings = np.asarray(readings, dtype=float)
    coords = np.asarray(coords, dtype=float)
    if coords.shape != (readings.shape[0], 2):
        raise ValueError(f"coords shape {coords.shape} does not match {readings.shape[0]} stations")
    write_matrix(path, readings)
    sidecar = path.with_name(path.stem + ".coords.csv")
    with open(sidecar, "w") as fh:
        fh.write("lat,lon\n")
        for lat, lon in coords:
            fh.write(f"{_fmt(lat)},{_fmt(lon)}\n")


def read_readings(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    readings, _ = read_matrix(path)
    sidecar = path.with_name(path.stem + ".coords.csv")
    lines = _read_lines(sidecar)
    if not lines or lines[0] != "lat,lon":
        raise DataError(f"{sidecar}: missing 'lat,lon' header")
    coords = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            coords.append((float(parts[0]), float(parts[1])))
        except (ValueError, IndexError):
            raise DataError(f"{sidecar}:{lineno}: unparseable coordinate row") from None
    coords = np.array(coords, dtype=float).reshape(-1, 2)
    if coords.shape[0] != readings.shape[0]:
        raise DataError(f"{sidecar}: {coords.shape[0]} coordinate rows for {readings.shape[0]} stations")
    return readings, coords


# -- observations: "L,T" header, then "l,t,value" lines --

def write_observations(path: str | Path, obs: ObservationSet) -> None:
    path = Path(path)
    order = np.lexsort((obs.cols, obs.rows))
    with open(path, "w") as fh:
        fh.write(f"{obs.L},{obs.T}\n")
        for idx in order:
            fh.write(f"{obs.rows[idx]},{obs.cols[idx]},{_fmt(obs.values[idx])}\n")


def read_observations(path: str | Path) -> ObservationSet:
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise DataError(f"{path}: empty observations file")
    L, T = _parse_ints(path, 1, lines[0], 2)
    rows, cols, values = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 'l,t,value', got {line!r}")
        try:
            rows.append(int(parts[0]))
            cols.append(int(parts[1]))
            values.append(float(parts[2]))
        except ValueError:
            raise DataError(f"{path}:{lineno}: unparseable observation {line!r}") from None
    try:
        return ObservationSet(L, T, np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(values))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


# -- selection result: JSON record --

def write_selection(path: str | Path, result: SelectionResult) -> None:
    record = {
        "objective": result.objective_kind,
        "rho": result.rho,
        "k": result.k,
        "chosen": [int(b) for b in result.chosen],
        "gain_trajectory": [float(g) for g in result.gain_trajectory],
        "n_evaluations": result.n_evaluations,
    }
    Path(path).write_text(json.dumps(record, indent=2) + "\n")


def read_selection(path: str | Path) -> SelectionResult:
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        record = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid selection record: {exc}") from None
    try:
        return SelectionResult(
            chosen=[int(b) for b in record["chosen"]],
            gain_trajectory=[float(g) for g in record["gain_trajectory"]],
            objective_kind=record["objective"],
            rho=record["rho"],
            k=int(record["k"]),
            n_evaluations=int(record.get("n_evaluations", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed selection record ({exc})") from None


# -- generic comma-separated table with a header row --

def write_table(path: str | Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def sha256_of(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
