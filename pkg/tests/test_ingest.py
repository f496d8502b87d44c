"""Ingestion ops against hand-computed and brute-force oracles."""

import math

import numpy as np
import pytest

from aminecast.ingest import (
    EmptyInputError,
    InsufficientDataError,
    OrderingError,
    PlantSchema,
    SchemaError,
    SplitError,
    TimeSeriesFrame,
    UnfillableColumnError,
    chronological_split,
    concat,
    downsample_alternate,
    fill_missing,
    format_timestamp,
    load_csv,
    parse_timestamp,
    write_csv,
)


def make_frame(values, interval=300, start=0, name="x", extra=None):
    n = len(values)
    cols = {name: np.asarray(values, dtype=float)}
    if extra:
        cols.update({k: np.asarray(v, dtype=float) for k, v in extra.items()})
    ts = start + interval * np.arange(n, dtype=np.int64)
    return TimeSeriesFrame(ts, cols, interval)


def brute_force_interpolate(timestamps, values):
    """Independent interior-linear / edge-nearest fill, one cell at a time."""
    out = list(values)
    known = [i for i, v in enumerate(values) if not math.isnan(v)]
    for i, v in enumerate(values):
        if not math.isnan(v):
            continue
        before = [k for k in known if k < i]
        after = [k for k in known if k > i]
        if before and after:
            a, b = before[-1], after[0]
            frac = (timestamps[i] - timestamps[a]) / (timestamps[b] - timestamps[a])
            out[i] = values[a] + frac * (values[b] - values[a])
        elif after:
            out[i] = values[after[0]]
        else:
            out[i] = values[before[-1]]
    return out


class TestParseTimestamp:
    def test_z_suffix_and_offset_agree(self):
        assert parse_timestamp("2020-11-01T00:00:00Z") == parse_timestamp(
            "2020-11-01T00:00:00+00:00"
        )

    def test_naive_is_utc(self):
        assert parse_timestamp("1970-01-01T00:05:00") == 300

    def test_round_trip(self):
        t = parse_timestamp("2020-11-01T06:10:00Z")
        assert parse_timestamp(format_timestamp(t)) == t


class TestLoadCsv:
    def write(self, tmp_path, text):
        path = tmp_path / "plant.csv"
        path.write_text(text)
        return path

    def header(self, schema):
        return "timestamp," + ",".join(schema.all_columns)

    def row(self, ts, value):
        return f"{ts}," + ",".join([str(value)] * 16)

    def test_identity_parse(self, tmp_path):
        schema = PlantSchema.default()
        lines = [self.header(schema)]
        for i in range(3):
            lines.append(self.row(format_timestamp(i * 300), 1.5 + i))
        frame = load_csv(self.write(tmp_path, "\n".join(lines)), schema)
        assert len(frame) == 3
        assert frame.missing_count() == 0
        assert frame.column("amp_ftir")[1] == 2.5

    def test_blank_cell_becomes_missing(self, tmp_path):
        schema = PlantSchema.default()
        lines = [self.header(schema), self.row("1970-01-01T00:00:00Z", 1.0)]
        cells = self.row("1970-01-01T00:05:00Z", 2.0).split(",")
        cells[3] = ""  # blank one value
        lines.append(",".join(cells))
        frame = load_csv(self.write(tmp_path, "\n".join(lines)), schema)
        assert frame.missing_count() == 1
        assert math.isnan(frame.column(schema.all_columns[2])[1])

    def test_interval_is_modal_spacing(self, tmp_path):
        # Oracle: mode over all pair gaps.
        schema = PlantSchema.default()
        offsets = [0, 300, 600]
        lines = [self.header(schema)]
        for t in offsets:
            lines.append(self.row(format_timestamp(t), 1.0))
        frame = load_csv(self.write(tmp_path, "\n".join(lines)), schema)
        gaps = [b - a for a, b in zip(offsets, offsets[1:])]
        modal = max(set(gaps), key=gaps.count)
        assert frame.interval_s == modal == 300

    def test_missing_column_rejected(self, tmp_path):
        schema = PlantSchema.default()
        text = "timestamp,amp_ftir\n1970-01-01T00:00:00Z,1.0\n"
        with pytest.raises(SchemaError):
            load_csv(self.write(tmp_path, text), schema)

    def test_duplicate_column_rejected(self, tmp_path):
        schema = PlantSchema.default()
        text = self.header(schema) + ",amp_ftir\n"
        with pytest.raises(SchemaError):
            load_csv(self.write(tmp_path, text), schema)

    def test_non_monotone_rejected(self, tmp_path):
        schema = PlantSchema.default()
        lines = [
            self.header(schema),
            self.row("1970-01-01T00:10:00Z", 1.0),
            self.row("1970-01-01T00:05:00Z", 1.0),
        ]
        with pytest.raises(OrderingError):
            load_csv(self.write(tmp_path, "\n".join(lines)), schema)

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(EmptyInputError):
            load_csv(self.write(tmp_path, ""), PlantSchema.default())

    def test_header_only_rejected(self, tmp_path):
        schema = PlantSchema.default()
        with pytest.raises(EmptyInputError):
            load_csv(self.write(tmp_path, self.header(schema) + "\n"), schema)

    def test_csv_round_trip(self, tmp_path):
        schema = PlantSchema.default()
        rng = np.random.default_rng(5)
        cols = {name: rng.uniform(1, 100, size=7) for name in schema.all_columns}
        frame = TimeSeriesFrame(300 * np.arange(7, dtype=np.int64), cols, 300)
        path = tmp_path / "round.csv"
        write_csv(frame, path)
        back = load_csv(path, schema)
        for name in schema.all_columns:
            np.testing.assert_array_equal(back.column(name), frame.column(name))


class TestFillMissing:
    def test_linear_midpoint(self):
        frame = make_frame([10.0, math.nan, 20.0], interval=600)
        result = fill_missing(frame)
        assert result.filled_cells == 1
        assert result.frame.column("x")[1] == 15.0

    def test_time_weighted_interior(self):
        # Hand oracle: 10 + (300/1200) * 30 = 17.5 at t=300.
        ts = np.array([0, 300, 1200], dtype=np.int64)
        frame = TimeSeriesFrame(ts, {"x": np.array([10.0, math.nan, 40.0])}, 300)
        result = fill_missing(frame)
        assert result.frame.column("x")[1] == pytest.approx(17.5, abs=1e-12)

    def test_no_missing_is_identity(self):
        frame = make_frame([1.0, 2.0, 3.0])
        result = fill_missing(frame)
        assert result.filled_cells == 0
        np.testing.assert_array_equal(result.frame.column("x"), frame.column("x"))

    def test_edges_take_nearest_value(self):
        frame = make_frame([math.nan, 5.0, 7.0, math.nan])
        filled = fill_missing(frame).frame.column("x")
        assert filled[0] == 5.0 and filled[3] == 7.0

    def test_all_missing_column_rejected(self):
        frame = make_frame([math.nan, math.nan, math.nan])
        with pytest.raises(UnfillableColumnError) as excinfo:
            fill_missing(frame)
        assert "x" in str(excinfo.value)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        values = rng.uniform(0, 10, size=30)
        values[rng.choice(30, size=8, replace=False)] = math.nan
        frame = make_frame(values)
        once = fill_missing(frame).frame
        twice = fill_missing(once).frame
        np.testing.assert_array_equal(once.column("x"), twice.column("x"))

    def test_matches_brute_force_on_random_frames(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = rng.integers(4, 40)
            values = rng.uniform(-5, 5, size=n)
            n_missing = rng.integers(1, max(2, n - 2))
            missing_idx = rng.choice(n, size=min(n_missing, n - 2), replace=False)
            values[missing_idx] = math.nan
            if np.isnan(values).sum() > n - 2:
                continue
            frame = make_frame(values.copy())
            got = fill_missing(frame).frame.column("x")
            want = brute_force_interpolate(frame.timestamps.tolist(), values.tolist())
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_interpolated_within_neighbor_bounds(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(5, 30))
            values = rng.uniform(-1, 1, size=n)
            hole = int(rng.integers(1, n - 1))
            original = values.copy()
            values[hole] = math.nan
            filled = fill_missing(make_frame(values)).frame.column("x")[hole]
            known = [i for i in range(n) if i != hole]
            below = max(i for i in known if i < hole)
            above = min(i for i in known if i > hole)
            lo = min(original[below], original[above])
            hi = max(original[below], original[above])
            assert lo - 1e-12 <= filled <= hi + 1e-12


class TestDownsample:
    def test_keeps_even_rows(self):
        frame = make_frame([0.0, 1.0, 2.0, 3.0])
        out = downsample_alternate(frame)
        np.testing.assert_array_equal(out.column("x"), [0.0, 2.0])
        assert out.interval_s == 600

    def test_two_rows(self):
        out = downsample_alternate(make_frame([5.0, 6.0]))
        np.testing.assert_array_equal(out.column("x"), [5.0])

    def test_count_oracle(self):
        # ceil(n/2) retained for every length, and out[i] == in[2i].
        for n in range(2, 101):
            frame = make_frame(np.arange(n, dtype=float))
            out = downsample_alternate(frame)
            assert len(out) == math.ceil(n / 2)
            for i in range(len(out)):
                assert out.column("x")[i] == frame.column("x")[2 * i]

    def test_single_row_rejected(self):
        with pytest.raises(InsufficientDataError):
            downsample_alternate(make_frame([1.0]))

    def test_wrong_interval_rejected(self):
        with pytest.raises(Exception):
            downsample_alternate(make_frame([1.0, 2.0], interval=600))


class TestConcat:
    def test_lengths_add(self):
        a = make_frame(np.arange(15.0), interval=600)
        b = make_frame(np.arange(8.0), interval=600, start=15 * 600)
        out = concat(a, b)
        assert len(out) == 23

    def test_values_preserved_in_order(self):
        a = make_frame([1.0, 2.0, 3.0])
        b = make_frame([4.0, 5.0, 6.0], start=900)
        out = concat(a, b)
        np.testing.assert_array_equal(out.column("x"), [1, 2, 3, 4, 5, 6])

    def test_empty_rejected(self):
        a = make_frame([1.0, 2.0])
        empty = TimeSeriesFrame(np.array([], dtype=np.int64), {"x": np.array([])}, 300)
        with pytest.raises(EmptyInputError):
            concat(a, empty)

    def test_overlap_rejected(self):
        a = make_frame([1.0, 2.0, 3.0])
        b = make_frame([4.0, 5.0], start=300)
        with pytest.raises(OrderingError):
            concat(a, b)

    def test_column_mismatch_rejected(self):
        a = make_frame([1.0, 2.0])
        b = make_frame([1.0, 2.0], start=600, name="y")
        with pytest.raises(SchemaError):
            concat(a, b)

    def test_gap_is_flagged(self):
        a = make_frame([1.0, 2.0])
        b = make_frame([3.0, 4.0], start=1500)
        assert "gap" in concat(a, b).provenance


class TestChronologicalSplit:
    def test_simple_arithmetic(self):
        frame = make_frame(np.arange(100.0))
        train, val, test = chronological_split(frame, (0.7, 0.15, 0.15))
        assert (len(train), len(val), len(test)) == (70, 15, 15)

    def test_paper_scale_floor_arithmetic(self):
        # floor(6624*0.7)=4636, floor(6624*0.15)=993, remainder 995.
        frame = make_frame(np.arange(6624.0))
        train, val, test = chronological_split(frame, (0.7, 0.15, 0.15))
        assert (len(train), len(val), len(test)) == (4636, 993, 995)

    def test_segments_contiguous_and_ordered(self):
        frame = make_frame(np.arange(50.0))
        train, val, test = chronological_split(frame, (0.6, 0.2, 0.2))
        joined = np.concatenate([train.column("x"), val.column("x"), test.column("x")])
        np.testing.assert_array_equal(joined, frame.column("x"))
        assert train.end < val.start and val.end < test.start

    def test_degenerate_fractions_rejected(self):
        frame = make_frame(np.arange(10.0))
        with pytest.raises(SplitError):
            chronological_split(frame, (1.0, 0.0, 0.0))

    def test_min_rows_enforced(self):
        frame = make_frame(np.arange(20.0))
        with pytest.raises(SplitError):
            chronological_split(frame, (0.7, 0.15, 0.15), min_rows=5)

    def test_concat_then_split_preserves_values(self):
        a = make_frame(np.arange(30.0))
        b = make_frame(np.arange(30.0, 60.0), start=9000)
        frame = concat(a, b)
        train, val, test = chronological_split(frame, (0.5, 0.25, 0.25))
        joined = np.concatenate([train.column("x"), val.column("x"), test.column("x")])
        np.testing.assert_array_equal(joined, np.arange(60.0))


class TestFrameInvariants:
    def test_columns_immutable(self):
        frame = make_frame([1.0, 2.0])
        with pytest.raises(ValueError):
            frame.column("x")[0] = 99.0

    def test_non_monotone_rejected_at_construction(self):
        with pytest.raises(OrderingError):
            TimeSeriesFrame(np.array([0, 0], dtype=np.int64), {"x": np.zeros(2)}, 300)

    def test_length_mismatch_rejected(self):
        with pytest.raises(Exception):
            TimeSeriesFrame(np.array([0, 300], dtype=np.int64), {"x": np.zeros(3)}, 300)
