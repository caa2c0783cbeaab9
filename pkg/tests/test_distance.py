"""Score-to-distance transform against an arbitrary-precision oracle."""

import numpy as np
import pytest

from covergraph.distance import (
    DEFAULT_MIDPOINT,
    DEFAULT_SCALE,
    LogisticParams,
    matrix_to_distances,
    score_to_distance,
)
from covergraph.model import SELF_SCORE, ScoreMatrix

from oracles import logistic_distance_mp


class TestScalarTransform:
    def test_midpoint_maps_to_exactly_half(self):
        params = LogisticParams()
        assert score_to_distance(DEFAULT_MIDPOINT, params) == 0.5

    def test_matches_high_precision_oracle_on_grid(self):
        params = LogisticParams()
        for s in np.linspace(-20.0, 40.0, 241):
            expected = logistic_distance_mp(float(s), DEFAULT_MIDPOINT, DEFAULT_SCALE)
            assert score_to_distance(float(s), params) == pytest.approx(
                expected, abs=1e-15
            )

    def test_matches_oracle_for_other_parameter_choices(self):
        for midpoint, scale in ((0.0, 1.0), (10.0, 0.1), (-3.0, 2.5), (4.3, 0.5)):
            params = LogisticParams(midpoint=midpoint, scale=scale)
            for s in (-100.0, -1.0, 0.0, midpoint, midpoint + scale, 50.0):
                expected = logistic_distance_mp(s, midpoint, scale)
                assert score_to_distance(s, params) == pytest.approx(expected, abs=1e-15)

    def test_decreasing_in_score(self):
        params = LogisticParams()
        grid = np.linspace(-50.0, 50.0, 1001)
        d = score_to_distance(grid, params)
        assert np.all(np.diff(d) <= 0)
        # Strict within the band where float resolution can show it.
        band = score_to_distance(np.linspace(-10.0, 20.0, 301), params)
        assert np.all(np.diff(band) < 0)

    def test_extreme_scores_do_not_overflow(self):
        params = LogisticParams()
        with np.errstate(over="raise"):
            lo = score_to_distance(1e6, params)
            hi = score_to_distance(-1e6, params)
        assert lo == 0.0
        assert hi == 1.0

    def test_bounds_hold_everywhere(self):
        params = LogisticParams()
        d = score_to_distance(np.linspace(-1e3, 1e3, 4001), params)
        assert np.all(d >= 0.0)
        assert np.all(d <= 1.0)

    def test_array_shape_preserved_and_scalar_returns_float(self):
        params = LogisticParams()
        arr = score_to_distance(np.array([[1.0, 2.0], [3.0, 4.0]]), params)
        assert arr.shape == (2, 2)
        out = score_to_distance(4.0, params)
        assert isinstance(out, float)


class TestParams:
    def test_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            LogisticParams(scale=0.0)
        with pytest.raises(ValueError):
            LogisticParams(scale=-1.0)

    def test_values_must_be_finite(self):
        with pytest.raises(ValueError):
            LogisticParams(midpoint=float("nan"))
        with pytest.raises(ValueError):
            LogisticParams(scale=float("inf"))


class TestMatrixTransform:
    def _matrix(self):
        ids = ("a", "b", "c")
        values = np.array(
            [
                [SELF_SCORE, 6.0, 1.0],
                [6.0, SELF_SCORE, 4.3],
                [1.0, 4.3, SELF_SCORE],
            ]
        )
        return ScoreMatrix(track_ids=ids, values=values)

    def test_elementwise_agreement_with_scalar_transform(self):
        params = LogisticParams()
        dist = matrix_to_distances(self._matrix(), params)
        assert dist.values[0, 1] == score_to_distance(6.0, params)
        assert dist.values[1, 2] == 0.5

    def test_diagonal_is_exactly_zero_and_not_collapsed(self):
        dist = matrix_to_distances(self._matrix(), LogisticParams())
        assert np.all(np.diag(dist.values) == 0.0)
        assert not dist.collapsed

    def test_symmetry_and_track_ids_carried_over(self):
        matrix = self._matrix()
        dist = matrix_to_distances(matrix, LogisticParams())
        assert dist.track_ids == matrix.track_ids
        np.testing.assert_array_equal(dist.values, dist.values.T)

    def test_higher_scores_map_closer(self):
        dist = matrix_to_distances(self._matrix(), LogisticParams())
        assert dist.values[0, 1] < dist.values[0, 2]
