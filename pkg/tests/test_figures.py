"""Smoke tests: every figure saver writes a nonempty PNG and returns its path."""

from pathlib import Path

from driveby.figures import (
    save_coverage_map,
    save_gain_trajectory,
    save_mre_curves,
    save_rho_sweep,
)
from driveby.greedy import SelectionResult
from driveby.harness import CoverageClass


def _check_png(returned, path):
    assert returned == path
    assert isinstance(returned, Path)
    data = path.read_bytes()
    assert len(data) > 0
    assert data[:8] == b"\x89PNG\r\n\x1a\n"


class TestFigures:
    def test_coverage_map(self, tmp_path):
        classes = [
            CoverageClass(0, "both", 1, 28.61, 77.21),
            CoverageClass(1, "rfl_only", 1, 28.62, 77.22),
            CoverageClass(2, "other_only", 1, 28.63, 77.20),
            CoverageClass(3, "neither", 1, 28.60, 77.23),
        ]
        path = tmp_path / "coverage.png"
        _check_png(save_coverage_map(classes, path, title="coverage"), path)

    def test_mre_curves(self, tmp_path):
        rows = [
            {"method": "random", "k": 4, "mre_pct_mean": 20.0},
            {"method": "random", "k": 8, "mre_pct_mean": 12.0},
            {"method": "rfl", "k": 4, "mre_pct_mean": 6.0},
            {"method": "rfl", "k": 8, "mre_pct_mean": 3.0},
        ]
        path = tmp_path / "mre.png"
        _check_png(save_mre_curves(rows, path, title="reconstruction"), path)

    def test_gain_trajectory(self, tmp_path):
        result = SelectionResult([3, 1, 5], [0.4, 0.6, 0.7], "rfl", 0.98, 3, 30)
        path = tmp_path / "gain.png"
        _check_png(save_gain_trajectory(result, path), path)

    def test_rho_sweep(self, tmp_path):
        sweep = {
            "rhos": [0.95, 0.98, 1.0],
            "mean_psc": [90.0, 95.0, 98.0],
            "mcl_mean_psc": 98.5,
        }
        path = tmp_path / "rho.png"
        _check_png(save_rho_sweep(sweep, path, title="decay sweep"), path)
