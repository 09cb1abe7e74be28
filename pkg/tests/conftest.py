"""Shared fixtures: a tiny transit feed on disk and random instance factories."""

import numpy as np
import pytest

from driveby.occupancy import OccupancyTensor

# Four stops on a ~2 km north-south strip. D sits 55 m from A, inside the
# 500 m subsampling separation, so it is dropped from the monitoring set
# while its visits still mark A. Two trips within the 06:00-07:00 window.
STOPS_TXT = """stop_id,stop_name,stop_lat,stop_lon
A,Alpha,28.60,77.20
B,Bravo,28.61,77.21
C,Charlie,28.62,77.20
D,Delta,28.6005,77.20
"""

TRIPS_TXT = """route_id,service_id,trip_id
r1,wk,t1
r2,wk,t2
"""

STOP_TIMES_TXT = """trip_id,arrival_time,departure_time,stop_id,stop_sequence
t1,06:05:00,06:05:30,A,1
t1,06:12:00,06:12:30,B,2
t1,06:31:00,06:31:30,C,3
t2,06:05:00,06:05:30,D,1
t2,06:45:00,06:45:30,B,2
"""


@pytest.fixture(scope="session")
def gtfs_dir(tmp_path_factory):
    """Directory holding the three-file feed above."""
    root = tmp_path_factory.mktemp("feed")
    (root / "stops.txt").write_text(STOPS_TXT)
    (root / "trips.txt").write_text(TRIPS_TXT)
    (root / "stop_times.txt").write_text(STOP_TIMES_TXT)
    return root


def _random_tensor(rng, L, T, B, density=0.3):
    entries = []
    for b in range(B):
        n = int(rng.integers(1, max(2, int(density * L * T)) + 1))
        cells = rng.choice(L * T, size=min(n, L * T), replace=False)
        entries.extend((int(c % L), int(c // L), b) for c in cells)
    return OccupancyTensor.from_entries(L, T, B, entries)


def _random_similarity(rng, L):
    R = rng.random((L, L))
    S = (R + R.T) / 2.0
    np.fill_diagonal(S, 1.0)
    return S


@pytest.fixture
def make_tensor():
    """Factory for a random occupancy tensor; every bus gets at least one cell."""
    return _random_tensor


@pytest.fixture
def make_similarity():
    """Factory for a random symmetric similarity matrix with unit diagonal."""
    return _random_similarity
