"""Transit feed ingestion and the binary bus-location-time occupancy tensor.

A fleet snapshot is reduced to a tensor over L monitoring locations, T
time slots, and B buses, where a cell is 1 when a bus is near a location
during a slot. Locations are a distance-separated subsample of the feed's
stops; nearness is a fixed great-circle radius.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, SchemaError
from .geo import haversine_m

logger = logging.getLogger(__name__)

_TIME_RE = re.compile(r"^(\d{1,3}):([0-5]\d):([0-5]\d)$")


@dataclass(frozen=True)
class Stop:
    stop_id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class TimedVisit:
    """One scheduled arrival of a trip at a stop, seconds after midnight."""

    trip_id: str
    stop_id: str
    seconds: int


@dataclass(frozen=True)
class TimeGrid:
    """Uniform slots of ``slot_minutes`` covering [start, end) within one day.

    Slot t spans [start + t*slot, start + (t+1)*slot); a trailing remainder
    shorter than one slot is excluded.
    """

    start_minute: int
    end_minute: int
    slot_minutes: int

    def __post_init__(self):
        if not (0 <= self.start_minute < self.end_minute <= 1440):
            raise ValueError(f"grid window [{self.start_minute}, {self.end_minute}) minutes is not within one day")
        if self.slot_minutes < 1:
            raise ValueError(f"slot_minutes must be positive, got {self.slot_minutes}")
        if self.T < 1:
            raise ValueError("grid window is shorter than one slot")

    @property
    def T(self) -> int:
        return (self.end_minute - self.start_minute) // self.slot_minutes

    @classmethod
    def from_hhmm(cls, start: str, end: str, slot_minutes: int) -> "TimeGrid":
        def minutes(text: str) -> int:
            h, m = text.split(":")
            return int(h) * 60 + int(m)

        return cls(minutes(start), minutes(end), slot_minutes)

    def slot_of(self, seconds: int) -> int | None:
        """Slot index containing the given time of day, or None if outside the grid."""
        offset = seconds - self.start_minute * 60
        if offset < 0:
            return None
        t = offset // (self.slot_minutes * 60)
        return int(t) if t < self.T else None


@dataclass(frozen=True)
class LocationSet:
    """Ordered monitoring locations kept after distance subsampling."""

    stops: tuple[Stop, ...]
    min_separation_m: float

    def __len__(self) -> int:
        return len(self.stops)

    def coords(self) -> np.ndarray:
        """(L, 2) array of latitude, longitude in degrees."""
        return np.array([(s.lat, s.lon) for s in self.stops], dtype=float).reshape(len(self.stops), 2)


class OccupancyTensor:
    """Sparse binary tensor over locations x slots x buses.

    Cells are stored per bus as sorted flat indices t*L + l, which keeps
    slot lookups and subset unions cheap for the selection objectives.
    """

    def __init__(self, L: int, T: int, B: int, cells_by_bus: list[np.ndarray], meta: dict | None = None):
        if L < 1 or T < 1 or B < 1:
            raise ValueError(f"tensor dimensions must be positive, got L={L} T={T} B={B}")
        if len(cells_by_bus) != B:
            raise ValueError(f"expected {B} per-bus cell arrays, got {len(cells_by_bus)}")
        self.L = L
        self.T = T
        self.B = B
        self._cells = [np.asarray(c, dtype=np.int64) for c in cells_by_bus]
        self.meta = dict(meta or {})

    @classmethod
    def from_entries(cls, L: int, T: int, B: int, entries, meta: dict | None = None) -> "OccupancyTensor":
        """Build from (l, t, b) index triples; duplicates collapse to one."""
        per_bus: list[set[int]] = [set() for _ in range(B)]
        for l, t, b in entries:
            if not (0 <= l < L and 0 <= t < T and 0 <= b < B):
                raise DataError(f"occupancy entry ({l}, {t}, {b}) outside dimensions L={L} T={T} B={B}")
            per_bus[b].add(t * L + l)
        cells = [np.array(sorted(s), dtype=np.int64) for s in per_bus]
        return cls(L, T, B, cells, meta=meta)

    def cells(self, b: int) -> np.ndarray:
        """Sorted flat cell indices (t*L + l) of one bus."""
        return self._cells[b]

    def entries(self) -> list[tuple[int, int, int]]:
        """All (l, t, b) triples in ascending (l, t, b) order."""
        out = []
        for b in range(self.B):
            flat = self._cells[b]
            out.extend(zip((flat % self.L).tolist(), (flat // self.L).tolist(), [b] * len(flat)))
        out.sort()
        return out

    def slot_locations(self, b: int) -> list[tuple[int, np.ndarray]]:
        """Per-slot location indices visited by one bus, slots ascending."""
        flat = self._cells[b]
        if len(flat) == 0:
            return []
        ts = flat // self.L
        ls = flat % self.L
        bounds = np.flatnonzero(np.diff(ts)) + 1
        return [
            (int(chunk_t[0]), chunk_l)
            for chunk_t, chunk_l in zip(np.split(ts, bounds), np.split(ls, bounds))
        ]

    def count(self) -> int:
        return int(sum(len(c) for c in self._cells))

    def density(self) -> float:
        return self.count() / float(self.L * self.T * self.B)

    def as_dense(self) -> np.ndarray:
        """(L, T, B) uint8 array; intended for small instances and tests."""
        dense = np.zeros((self.L, self.T, self.B), dtype=np.uint8)
        for b in range(self.B):
            flat = self._cells[b]
            dense[flat % self.L, flat // self.L, b] = 1
        return dense


def parse_gtfs_time(text: str) -> int:
    """Seconds after midnight for a GTFS HH:MM:SS string (hours may exceed 23)."""
    m = _TIME_RE.match(text.strip())
    if m is None:
        raise ValueError(f"unparseable GTFS time {text!r}")
    h, mi, s = (int(g) for g in m.groups())
    return h * 3600 + mi * 60 + s


def _read_rows(path: Path, required: tuple[str, ...]):
    if not path.exists():
        raise DataError(f"required feed file not found: {path}")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path.name} is missing required column(s): {', '.join(missing)}")
        # Line numbers are 1-based and include the header line.
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def load_gtfs(gtfs_dir: str | Path) -> tuple[list[Stop], list[TimedVisit]]:
    """Read stops.txt, trips.txt, and stop_times.txt from a GTFS directory.

    Returns the stop universe in file order and all same-day timed visits.
    Arrivals at or past 24:00:00 belong to next-day service and are dropped.
    Malformed rows raise DataError with the file and line number.
    """
    gtfs_dir = Path(gtfs_dir)

    stops: list[Stop] = []
    seen_ids: set[str] = set()
    for lineno, row in _read_rows(gtfs_dir / "stops.txt", ("stop_id", "stop_lat", "stop_lon")):
        sid = (row["stop_id"] or "").strip()
        if not sid:
            raise DataError(f"stops.txt line {lineno}: empty stop_id")
        if sid in seen_ids:
            raise DataError(f"stops.txt line {lineno}: duplicate stop_id {sid!r}")
        seen_ids.add(sid)
        try:
            lat = float(row["stop_lat"])
            lon = float(row["stop_lon"])
        except (TypeError, ValueError):
            raise DataError(
                f"stops.txt line {lineno}: unparseable coordinates ({row['stop_lat']!r}, {row['stop_lon']!r})"
            ) from None
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise DataError(f"stops.txt line {lineno}: coordinates ({lat}, {lon}) out of range")
        stops.append(Stop(sid, lat, lon))

    trip_ids: set[str] = set()
    for lineno, row in _read_rows(gtfs_dir / "trips.txt", ("trip_id",)):
        tid = (row["trip_id"] or "").strip()
        if not tid:
            raise DataError(f"trips.txt line {lineno}: empty trip_id")
        trip_ids.add(tid)

    visits: list[TimedVisit] = []
    dropped_overnight = 0
    for lineno, row in _read_rows(gtfs_dir / "stop_times.txt", ("trip_id", "stop_id", "arrival_time")):
        tid = (row["trip_id"] or "").strip()
        sid = (row["stop_id"] or "").strip()
        if tid not in trip_ids:
            raise DataError(f"stop_times.txt line {lineno}: unknown trip_id {tid!r}")
        if sid not in seen_ids:
            raise DataError(f"stop_times.txt line {lineno}: unknown stop_id {sid!r}")
        try:
            seconds = parse_gtfs_time(row["arrival_time"] or "")
        except ValueError as exc:
            raise DataError(f"stop_times.txt line {lineno}: {exc}") from None
        if seconds >= 86400:
            dropped_overnight += 1
            continue
        visits.append(TimedVisit(tid, sid, seconds))

    logger.info(
        "loaded GTFS feed: %d stops, %d trips, %d visits (%d overnight rows dropped)",
        len(stops), len(trip_ids), len(visits), dropped_overnight,
    )
    return stops, visits


def subsample_stops(stops: list[Stop], d_meters: float, shuffle_seed: int | None = None) -> LocationSet:
    """Greedy subsample keeping stops at least ``d_meters`` apart.

    Stops are scanned in file order (or a seeded shuffle of it) and kept
    when no previously kept stop lies within d_meters.
    """
    if d_meters < 0:
        raise ValueError(f"d_meters must be nonnegative, got {d_meters}")
    if not stops:
        raise DataError("cannot subsample an empty stop list")
    order = list(range(len(stops)))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(stops)).tolist()

    kept: list[Stop] = []
    kept_lat = np.empty(len(stops))
    kept_lon = np.empty(len(stops))
    for i in order:
        s = stops[i]
        n = len(kept)
        if n > 0:
            d = haversine_m(s.lat, s.lon, kept_lat[:n], kept_lon[:n])
            if float(np.min(d)) < d_meters:
                continue
        kept_lat[n] = s.lat
        kept_lon[n] = s.lon
        kept.append(s)
    logger.info("subsampled %d of %d stops at min separation %.0f m", len(kept), len(stops), d_meters)
    return LocationSet(tuple(kept), float(d_meters))


def build_occupancy(
    visits: list[TimedVisit],
    stops: list[Stop],
    locations: LocationSet,
    grid: TimeGrid,
    radius_m: float,
) -> OccupancyTensor:
    """Rasterize timed visits onto the location/slot grid.

    A visit marks every monitoring location within ``radius_m`` of its stop
    during the slot containing its arrival. The stop universe must cover
    every visited stop; visits outside the grid window are ignored. Buses
    are the distinct trip ids among the visits, indexed in sorted order.
    """
    if radius_m <= 0:
        raise ValueError(f"radius_m must be positive, got {radius_m}")
    if not visits:
        raise DataError("no visits to rasterize")
    coord_of = {s.stop_id: (s.lat, s.lon) for s in stops}
    loc_coords = locations.coords()
    L = len(locations)

    bus_ids = sorted({v.trip_id for v in visits})
    bus_index = {tid: i for i, tid in enumerate(bus_ids)}
    B = len(bus_ids)

    # Resolve each distinct stop's nearby locations once; feeds revisit stops often.
    nearby: dict[str, np.ndarray] = {}
    for sid in {v.stop_id for v in visits}:
        if sid not in coord_of:
            raise DataError(f"visit references unknown stop_id {sid!r}")
        lat, lon = coord_of[sid]
        d = haversine_m(lat, lon, loc_coords[:, 0], loc_coords[:, 1])
        nearby[sid] = np.flatnonzero(d <= radius_m)

    per_bus: list[set[int]] = [set() for _ in range(B)]
    for v in visits:
        t = grid.slot_of(v.seconds)
        if t is None:
            continue
        locs = nearby[v.stop_id]
        if len(locs) == 0:
            continue
        per_bus[bus_index[v.trip_id]].update((t * L + locs).tolist())

    cells = [np.array(sorted(s), dtype=np.int64) for s in per_bus]
    tensor = OccupancyTensor(L, grid.T, B, cells, meta={"bus_ids": bus_ids, "radius_m": float(radius_m)})
    logger.info(
        "occupancy tensor L=%d T=%d B=%d with %d cells (density %.4f)",
        tensor.L, tensor.T, tensor.B, tensor.count(), tensor.density(),
    )
    return tensor


def sampling_matrix(tensor: OccupancyTensor, buses) -> np.ndarray:
    """(L, T) binary matrix: cell is 1 when any selected bus occupies it."""
    out = np.zeros(tensor.L * tensor.T, dtype=np.uint8)
    for b in buses:
        if not (0 <= b < tensor.B):
            raise ValueError(f"bus index {b} out of range for B={tensor.B}")
        out[tensor.cells(int(b))] = 1
    return out.reshape(tensor.T, tensor.L).T
