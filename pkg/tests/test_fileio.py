"""Round-trip and error-path tests for the delimited artifact formats."""

import numpy as np
import pytest

from driveby.errors import DataError
from driveby.fileio import (
    read_locations,
    read_matrix,
    read_observations,
    read_readings,
    read_selection,
    read_similarity,
    read_tensor,
    sha256_of,
    write_locations,
    write_matrix,
    write_observations,
    write_readings,
    write_selection,
    write_similarity,
    write_table,
    write_tensor,
)
from driveby.greedy import SelectionResult
from driveby.imputation import ObservationSet
from driveby.occupancy import LocationSet, OccupancyTensor, Stop


class TestTensorFormat:
    def test_round_trip(self, make_tensor, tmp_path):
        rng = np.random.default_rng(91)
        tensor = make_tensor(rng, 7, 5, 4)
        tensor.meta["bus_ids"] = ["a", "b", "c", "d"]
        path = tmp_path / "tensor.csv"
        write_tensor(path, tensor)
        back = read_tensor(path)
        assert (back.L, back.T, back.B) == (7, 5, 4)
        assert back.entries() == tensor.entries()
        assert back.meta["bus_ids"] == ["a", "b", "c", "d"]

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="file not found"):
            read_tensor(tmp_path / "nope.csv")

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("3,4\n")
        with pytest.raises(DataError, match="expected 3 comma-separated"):
            read_tensor(path)

    def test_entry_outside_dimensions(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,2,2\n0,0,0\n2,0,0\n")
        with pytest.raises(DataError, match=r"bad.csv:3"):
            read_tensor(path)

    def test_unparseable_entry(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("2,2,2\n0,x,0\n")
        with pytest.raises(DataError, match=r"bad.csv:2.*unparseable"):
            read_tensor(path)


class TestLocationFormat:
    def test_round_trip_is_bit_exact(self, tmp_path):
        locations = LocationSet(
            (Stop("A", 28.6 + 1e-13, 77.2), Stop("B", 28.61, 77.21 - 1e-13)), 500.0
        )
        path = tmp_path / "locations.csv"
        write_locations(path, locations)
        back = read_locations(path)
        assert back.min_separation_m == 500.0
        assert [s.stop_id for s in back.stops] == ["A", "B"]
        for orig, rt in zip(locations.stops, back.stops):
            assert rt.lat == orig.lat and rt.lon == orig.lon

    def test_missing_header(self, tmp_path):
        path = tmp_path / "locations.csv"
        path.write_text("id,lat,lon\nA,1.0,2.0\n")
        with pytest.raises(DataError, match="header"):
            read_locations(path)

    def test_unparseable_row(self, tmp_path):
        path = tmp_path / "locations.csv"
        path.write_text("stop_id,lat,lon\nA,x,2.0\n")
        with pytest.raises(DataError, match=r"locations.csv:2"):
            read_locations(path)


class TestSimilarityFormat:
    def test_round_trip_is_bit_exact(self, make_similarity, tmp_path):
        S = make_similarity(np.random.default_rng(92), 6)
        path = tmp_path / "similarity.csv"
        write_similarity(path, S)
        assert np.array_equal(read_similarity(path), S)

    def test_non_square_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="square"):
            write_similarity(tmp_path / "s.csv", np.ones((2, 3)))

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("2\n1.0,0.5\n")
        with pytest.raises(DataError, match="header says L=2"):
            read_similarity(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("2\n1.0,0.5\n0.5\n")
        with pytest.raises(DataError, match=r"s.csv:3"):
            read_similarity(path)


class TestMatrixFormat:
    def test_round_trip_with_meta(self, tmp_path):
        values = np.random.default_rng(93).standard_normal((4, 6))
        path = tmp_path / "matrix.csv"
        write_matrix(path, values, meta={"generator": "test", "seed": 3})
        back, meta = read_matrix(path)
        assert np.array_equal(back, values)
        assert meta == {"generator": "test", "seed": 3}

    def test_round_trip_without_meta(self, tmp_path):
        values = np.zeros((2, 2))
        path = tmp_path / "matrix.csv"
        write_matrix(path, values)
        back, meta = read_matrix(path)
        assert np.array_equal(back, values)
        assert meta is None

    def test_non_2d_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="2-d"):
            write_matrix(tmp_path / "m.csv", np.zeros(3))

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("3,2\n1.0,2.0\n")
        with pytest.raises(DataError, match="header says 3 rows"):
            read_matrix(path)


class TestReadingsFormat:
    def test_round_trip_with_coords(self, tmp_path):
        rng = np.random.default_rng(94)
        readings = rng.standard_normal((5, 8))
        coords = rng.random((5, 2)) + np.array([28.0, 77.0])
        path = tmp_path / "readings.csv"
        write_readings(path, readings, coords)
        back_r, back_c = read_readings(path)
        assert np.array_equal(back_r, readings)
        assert np.array_equal(back_c, coords)

    def test_coords_shape_mismatch(self, tmp_path):
        with pytest.raises(ValueError, match="coords shape"):
            write_readings(tmp_path / "r.csv", np.zeros((3, 4)), np.zeros((2, 2)))

    def test_coords_row_count_mismatch(self, tmp_path):
        path = tmp_path / "r.csv"
        write_readings(path, np.zeros((2, 2)), np.zeros((2, 2)))
        (tmp_path / "r.coords.csv").write_text("lat,lon\n1.0,2.0\n")
        with pytest.raises(DataError, match="1 coordinate rows for 2"):
            read_readings(path)


class TestObservationFormat:
    def test_round_trip(self, tmp_path):
        obs = ObservationSet(4, 5, [2, 0, 3], [1, 4, 0], [0.25, -1.5, 3.0])
        path = tmp_path / "observations.csv"
        write_observations(path, obs)
        back = read_observations(path)
        assert (back.L, back.T) == (4, 5)
        # rows are written in (row, col) order
        assert back.rows.tolist() == [0, 2, 3]
        assert back.cols.tolist() == [4, 1, 0]
        assert back.values.tolist() == [-1.5, 0.25, 3.0]

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("2,2\n0,0\n")
        with pytest.raises(DataError, match="expected 'l,t,value'"):
            read_observations(path)

    def test_out_of_grid_entry(self, tmp_path):
        path = tmp_path / "obs.csv"
        path.write_text("2,2\n0,5,1.0\n")
        with pytest.raises(DataError, match="outside"):
            read_observations(path)


class TestSelectionFormat:
    def test_round_trip(self, tmp_path):
        result = SelectionResult([3, 0, 5], [0.5, 0.75, 0.9], "rfl", 0.98, 3, 42)
        path = tmp_path / "selection.json"
        write_selection(path, result)
        back = read_selection(path)
        assert back == result

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "selection.json"
        path.write_text("{not json")
        with pytest.raises(DataError, match="invalid selection record"):
            read_selection(path)

    def test_missing_key(self, tmp_path):
        path = tmp_path / "selection.json"
        path.write_text('{"objective": "pc"}')
        with pytest.raises(DataError, match="malformed selection record"):
            read_selection(path)


class TestTableAndHashing:
    def test_write_table(self, tmp_path):
        path = tmp_path / "table.csv"
        write_table(path, ["method", "k", "gain"], [["rfl", 4, 0.5], ["mc", 4, 0.4]])
        assert path.read_text() == "method,k,gain\nrfl,4,0.5\nmc,4,0.4\n"

    def test_sha256_of_known_content(self, tmp_path):
        path = tmp_path / "blob.txt"
        path.write_bytes(b"abc")
        assert sha256_of(path) == (
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        )
