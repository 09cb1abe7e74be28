"""Great-circle distances on known geometries."""

import numpy as np

from driveby.geo import EARTH_RADIUS_M, haversine_m, pairwise_distances_m


class TestHaversine:
    def test_zero_for_identical_points(self):
        assert haversine_m(28.6, 77.2, 28.6, 77.2) == 0.0

    def test_meridian_arc_is_radius_times_angle(self):
        # A pure latitude offset reduces the formula to R * dlat exactly.
        d = haversine_m(0.0, 0.0, 0.01, 0.0)
        np.testing.assert_allclose(d, EARTH_RADIUS_M * np.radians(0.01), rtol=1e-14)
        np.testing.assert_allclose(d, 1111.9508023353292, rtol=1e-12)

    def test_pole_to_pole_is_half_circumference(self):
        np.testing.assert_allclose(haversine_m(90.0, 0.0, -90.0, 0.0),
                                   np.pi * EARTH_RADIUS_M, rtol=1e-14)

    def test_antipodal_points_stay_finite(self):
        # The arcsin argument clips at 1, so rounding cannot produce NaN.
        d = haversine_m(0.0, 0.0, 0.0, 180.0)
        assert np.isfinite(d)
        np.testing.assert_allclose(d, np.pi * EARTH_RADIUS_M, rtol=1e-12)

    def test_symmetric_in_endpoints(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            lat1, lat2 = rng.uniform(-80, 80, 2)
            lon1, lon2 = rng.uniform(-180, 180, 2)
            assert haversine_m(lat1, lon1, lat2, lon2) == haversine_m(lat2, lon2, lat1, lon1)

    def test_broadcasts_over_arrays(self):
        lats = np.array([0.0, 0.01, 0.02])
        d = haversine_m(0.0, 0.0, lats, 0.0)
        assert d.shape == (3,)
        np.testing.assert_allclose(d, EARTH_RADIUS_M * np.radians(lats), rtol=1e-14)

    def test_scalar_inputs_return_python_float(self):
        assert isinstance(haversine_m(0.0, 0.0, 1.0, 1.0), float)


class TestPairwiseDistances:
    def test_matches_scalar_calls(self):
        rng = np.random.default_rng(9)
        lat = rng.uniform(-60, 60, 6)
        lon = rng.uniform(-120, 120, 6)
        D = pairwise_distances_m(lat, lon)
        assert D.shape == (6, 6)
        for i in range(6):
            for j in range(6):
                if i != j:
                    np.testing.assert_allclose(D[i, j], haversine_m(lat[i], lon[i], lat[j], lon[j]),
                                               rtol=1e-12)

    def test_zero_diagonal_and_symmetry(self):
        rng = np.random.default_rng(2)
        lat = rng.uniform(-60, 60, 8)
        lon = rng.uniform(-120, 120, 8)
        D = pairwise_distances_m(lat, lon)
        assert np.all(np.diag(D) == 0.0)
        np.testing.assert_array_equal(D, D.T)
