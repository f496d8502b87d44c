"""Intervention engine: identity, consistency, propagation, and exports."""

import math

import numpy as np
import pytest

from aminecast import causal
from aminecast.causal import (
    DELTA_GRID,
    CausalError,
    DuplicateInterventionError,
    Intervention,
    InterventionSpec,
    UnknownFeatureError,
    grid_from_csv,
    grid_from_json,
    grid_to_csv,
    grid_to_json,
    impact,
    impact_detail,
    perturb,
    sweep_pair,
    sweep_single,
)
from aminecast.features import FeatureConfig, make_rolling
from aminecast.ingest import PlantSchema, TimeSeriesFrame
from aminecast.synthplant import GeneratorConfig, generate
from aminecast.training import TrainConfig, fit_forecaster

SCHEMA = PlantSchema.default()


@pytest.fixture(scope="module")
def fast_model():
    frame = generate(GeneratorConfig.default(seed=31, days=4))
    config = FeatureConfig(lag_steps=12, rolling_windows=(6,), input_window=6)
    tc = TrainConfig(batch_size=64, max_epochs=12, patience=12, learning_rate=2e-3, seed=0)
    trained, _ = fit_forecaster(
        frame, SCHEMA.input_columns, "amp_ftir", "basic", config, tc, hidden=10
    )
    window_start = len(frame) - 160
    return trained, frame, window_start, 120


class TestDeltaGrid:
    def test_grid_values(self):
        assert DELTA_GRID == (-0.2, -0.15, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15, 0.2)

    def test_out_of_range_delta_rejected(self):
        with pytest.raises(CausalError):
            Intervention("fg_inlet_flow", 0.25)

    def test_spec_arity(self):
        with pytest.raises(CausalError):
            InterventionSpec((), 0, 10)
        with pytest.raises(CausalError):
            InterventionSpec(
                (
                    Intervention("a", 0.1),
                    Intervention("b", 0.1),
                    Intervention("c", 0.1),
                ),
                0,
                10,
            )

    def test_duplicate_features_rejected(self):
        with pytest.raises(DuplicateInterventionError):
            InterventionSpec(
                (Intervention("a", 0.1), Intervention("a", -0.1)), 0, 10
            )


class TestPerturb:
    def make_frame(self, n=40):
        rng = np.random.default_rng(0)
        cols = {"x": np.full(n, 100.0), "y": rng.uniform(1, 2, n)}
        return TimeSeriesFrame(300 * np.arange(n, dtype=np.int64), cols, 300)

    def test_multiplies_window_rows(self):
        frame = self.make_frame()
        out = perturb(frame, [Intervention("x", 0.10)], 10, 20, lookback_steps=5)
        np.testing.assert_allclose(out.column("x")[5:30], 110.0, rtol=1e-15)
        np.testing.assert_array_equal(out.column("x")[:5], 100.0)
        np.testing.assert_array_equal(out.column("x")[30:], 100.0)

    def test_zero_delta_is_bitwise_identity(self):
        frame = self.make_frame()
        out = perturb(frame, [Intervention("x", 0.0)], 10, 20, lookback_steps=5)
        np.testing.assert_array_equal(out.column("x"), frame.column("x"))
        np.testing.assert_array_equal(out.column("y"), frame.column("y"))

    def test_other_columns_untouched(self):
        frame = self.make_frame()
        out = perturb(frame, [Intervention("x", 0.2)], 0, 40)
        np.testing.assert_array_equal(out.column("y"), frame.column("y"))

    def test_unknown_feature_rejected(self):
        with pytest.raises(UnknownFeatureError):
            perturb(self.make_frame(), [Intervention("zz", 0.1)], 0, 10)

    def test_lookback_before_frame_start_rejected(self):
        with pytest.raises(CausalError):
            perturb(self.make_frame(), [Intervention("x", 0.1)], 3, 10, lookback_steps=5)

    def test_rolling_mean_scales_inside_window(self):
        # Homogeneity through the feature stage: the 1-h rolling mean of the
        # perturbed column is (1 + delta) times the baseline mean wherever
        # the trailing window sits inside the perturbed region.
        rng = np.random.default_rng(1)
        n = 60
        cols = {"x": rng.uniform(50, 150, n), "y": rng.uniform(1, 2, n)}
        frame = TimeSeriesFrame(300 * np.arange(n, dtype=np.int64), cols, 300)
        delta = 0.1
        pert = perturb(frame, [Intervention("x", delta)], 20, 30, lookback_steps=12)
        base_roll = make_rolling(frame, ["x"], [12]).column("x_rmean12")
        pert_roll = make_rolling(pert, ["x"], [12]).column("x_rmean12")
        interior = slice(20 + 11, 50)
        np.testing.assert_allclose(
            pert_roll[interior], (1 + delta) * base_roll[interior], rtol=1e-12
        )


class TestImpact:
    def test_zero_delta_impact_exactly_zero(self, fast_model):
        trained, frame, start, length = fast_model
        spec = InterventionSpec((Intervention("fg_inlet_flow", 0.0),), start, length)
        assert impact(trained, frame, spec) == 0.0

    def test_detail_series_lengths(self, fast_model):
        trained, frame, start, length = fast_model
        spec = InterventionSpec((Intervention("lean_solvent_temp", -0.1),), start, length)
        detail = impact_detail(trained, frame, spec)
        assert len(detail.baseline) == len(detail.counterfactual) == length
        assert len(detail.timestamps) == length
        mean_pct = float(
            np.mean(100.0 * (detail.counterfactual - detail.baseline) / detail.baseline)
        )
        assert detail.impact_pct == pytest.approx(mean_pct, abs=1e-12)

    def test_unknown_feature_rejected(self, fast_model):
        trained, frame, start, length = fast_model
        spec = InterventionSpec((Intervention("not_a_feature", 0.1),), start, length)
        with pytest.raises(UnknownFeatureError):
            impact(trained, frame, spec)

    def test_non_input_column_rejected(self, fast_model):
        # Output columns exist in the frame but are not intervention targets.
        trained, frame, start, length = fast_model
        spec = InterventionSpec((Intervention("amp_imr_ms", 0.1),), start, length)
        with pytest.raises(UnknownFeatureError):
            impact(trained, frame, spec)

    def test_window_must_fit(self, fast_model):
        trained, frame, _, _ = fast_model
        spec = InterventionSpec((Intervention("fg_inlet_flow", 0.1),), len(frame) - 10, 50)
        with pytest.raises(CausalError):
            impact(trained, frame, spec)


class TestSweeps:
    def test_single_grid_shape_and_zero_column(self, fast_model):
        trained, frame, start, length = fast_model
        grid = sweep_single(trained, frame, start, length)
        assert grid.cells.shape == (8, 9)
        assert grid.cells.size == 72
        zero_col = list(grid.deltas).index(0.0)
        np.testing.assert_array_equal(grid.cells[:, zero_col], np.zeros(8))
        assert grid.errors == {}

    def test_single_feature_restriction(self, fast_model):
        trained, frame, start, length = fast_model
        grid = sweep_single(trained, frame, start, length, features=("upper_ww_temp",))
        assert grid.cells.shape == (1, 9)

    def test_pair_grid_shape_and_origin(self, fast_model):
        trained, frame, start, length = fast_model
        grid = sweep_pair(trained, frame, "lean_solvent_temp", "upper_ww_temp", start, length)
        assert grid.cells.shape == (9, 9)
        origin = list(grid.deltas).index(0.0)
        assert grid.cells[origin, origin] == 0.0

    def test_pair_zero_axis_equals_single(self, fast_model):
        trained, frame, start, length = fast_model
        single = sweep_single(trained, frame, start, length, features=("lean_solvent_temp",))
        pair = sweep_pair(trained, frame, "lean_solvent_temp", "upper_ww_temp", start, length)
        zero_col = list(pair.deltas).index(0.0)
        np.testing.assert_allclose(pair.cells[:, zero_col], single.cells[0], atol=1e-12)

    def test_pair_needs_distinct_features(self, fast_model):
        trained, frame, start, length = fast_model
        with pytest.raises(CausalError):
            sweep_pair(trained, frame, "fg_temp", "fg_temp", start, length)

    def test_locality_of_other_features(self, fast_model):
        # Perturbing one input leaves engineered columns of others bitwise
        # unchanged, so single-feature impacts of disjoint features are
        # computed from identical baselines.
        trained, frame, start, length = fast_model
        spec_a = InterventionSpec((Intervention("fg_temp", 0.2),), start, length)
        detail_a = impact_detail(trained, frame, spec_a)
        spec_b = InterventionSpec((Intervention("lower_ww_flow", 0.2),), start, length)
        detail_b = impact_detail(trained, frame, spec_b)
        np.testing.assert_array_equal(detail_a.baseline, detail_b.baseline)


class TestGridExports:
    def make_grid(self):
        cells = np.arange(18, dtype=float).reshape(2, 9)
        cells[1, 3] = math.nan
        return causal.ImpactGrid(
            kind="single",
            target="amp_ftir",
            row_labels=("fg_inlet_flow", "fg_temp"),
            deltas=DELTA_GRID,
            cells=cells,
            window_start=100,
            window_len=576,
            errors={"1,3": "baseline within 1e-9 of zero"},
        )

    def test_json_round_trip(self):
        grid = self.make_grid()
        back = grid_from_json(grid_to_json(grid))
        assert back.kind == grid.kind and back.target == grid.target
        assert back.row_labels == grid.row_labels
        assert back.deltas == grid.deltas
        np.testing.assert_array_equal(
            np.isnan(back.cells), np.isnan(grid.cells)
        )
        mask = ~np.isnan(grid.cells)
        np.testing.assert_array_equal(back.cells[mask], grid.cells[mask])
        assert back.errors == grid.errors
        assert back.window_start == 100 and back.window_len == 576

    def test_csv_round_trip(self):
        grid = self.make_grid()
        back = grid_from_csv(grid_to_csv(grid))
        assert back.kind == grid.kind and back.target == grid.target
        assert back.row_labels == grid.row_labels
        assert back.deltas == grid.deltas
        mask = ~np.isnan(grid.cells)
        np.testing.assert_array_equal(back.cells[mask], grid.cells[mask])
        np.testing.assert_array_equal(np.isnan(back.cells), np.isnan(grid.cells))
        assert back.errors == grid.errors

    def test_pair_csv_round_trip(self):
        cells = np.random.default_rng(0).uniform(-5, 5, size=(9, 9))
        grid = causal.ImpactGrid(
            kind="pair",
            target="amp_ftir",
            row_labels=tuple(repr(d) for d in DELTA_GRID),
            deltas=DELTA_GRID,
            cells=cells,
            window_start=50,
            window_len=100,
            feature_pair=("lean_solvent_temp", "upper_ww_temp"),
        )
        back = grid_from_csv(grid_to_csv(grid))
        assert back.feature_pair == grid.feature_pair
        np.testing.assert_array_equal(back.cells, grid.cells)
