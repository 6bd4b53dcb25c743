import json
import math

import numpy as np
import pytest

from isd import DataError, TimeSeries, WindowPlan, load_csv, make_windows, write_csv


def _write(path, text):
    path.write_text(text, encoding="utf-8")


class TestLoadCsv:
    def test_three_row_parse(self, tmp_path):
        f = tmp_path / "d.csv"
        _write(f, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
        ts = load_csv(f, ["a", "b"], "y")
        assert ts.n == 3 and ts.p == 2
        assert np.array_equal(ts.x, [[1, 2], [4, 5], [7, 8]])
        assert np.array_equal(ts.y, [3, 6, 9])

    def test_nan_cell_names_location(self, tmp_path):
        f = tmp_path / "d.csv"
        _write(f, "a,y\n1,2\nnan,4\n")
        with pytest.raises(DataError, match=r"row 2, column 'a'"):
            load_csv(f, ["a"], "y")

    def test_non_numeric_cell(self, tmp_path):
        f = tmp_path / "d.csv"
        _write(f, "a,y\n1,2\n3,oops\n")
        with pytest.raises(DataError, match=r"'oops' at row 2, column 'y'"):
            load_csv(f, ["a"], "y")

    def test_empty_file(self, tmp_path):
        f = tmp_path / "d.csv"
        _write(f, "")
        with pytest.raises(DataError, match="empty file"):
            load_csv(f, ["a"], "y")

    def test_missing_column(self, tmp_path):
        f = tmp_path / "d.csv"
        _write(f, "a,y\n1,2\n")
        with pytest.raises(DataError, match=r"missing column"):
            load_csv(f, ["a", "b"], "y")

    def test_large_roundtrip(self, tmp_path):
        # synthetic file shaped like the 8000-row, 3-covariate sensor dataset
        rng = np.random.default_rng(7)
        x = rng.normal(size=(8000, 3)) * rng.uniform(0.1, 100.0, size=3)
        y = rng.normal(size=8000)
        ts = TimeSeries(x, y)
        f = tmp_path / "big.csv"
        write_csv(ts, f, x_columns=["red", "led31", "led32"], y_column="ir")
        back = load_csv(f, ["red", "led31", "led32"], "ir")
        assert back.n == 8000 and back.p == 3
        assert np.max(np.abs(back.x - ts.x)) <= 1e-12 * np.max(np.abs(ts.x))
        assert np.max(np.abs(back.y - ts.y)) <= 1e-12 * np.max(np.abs(ts.y))


class TestTimeSeries:
    def test_validation(self):
        with pytest.raises(DataError):
            TimeSeries(np.ones((3, 2)), np.ones(2))
        with pytest.raises(DataError):
            TimeSeries(np.array([[1.0, np.inf]]), np.array([1.0]))
        with pytest.raises(DataError):
            TimeSeries(np.ones((0, 2)), np.ones(0))

    def test_immutable(self):
        ts = TimeSeries(np.ones((3, 2)), np.ones(3))
        with pytest.raises(ValueError):
            ts.x[0, 0] = 2.0

    def test_window_slicing(self):
        ts = TimeSeries(np.arange(10.0).reshape(5, 2), np.arange(5.0), t0=1)
        sub = ts.window(2, 5)
        assert sub.n == 3 and sub.t0 == 3
        assert np.array_equal(sub.y, [2, 3, 4])


class TestMakeWindows:
    def test_contiguous_exact_division(self):
        plan = make_windows(100, 4, scheme="contiguous")
        assert plan.windows == ((0, 25), (25, 50), (50, 75), (75, 100))

    def test_equally_spaced_start_grid(self):
        # starts must follow floor(j * (n - w) / (K - 1))
        plan = make_windows(1000, 25, w=125, scheme="equally_spaced")
        expected = [math.floor(j * 875 / 24) for j in range(25)]
        assert [s for s, _ in plan.windows] == expected
        assert expected[0] == 0 and expected[1] == 36 and expected[-1] == 875

    def test_window_longer_than_series(self):
        with pytest.raises(DataError):
            make_windows(50, 10, w=60, scheme="equally_spaced")

    def test_contiguous_w_mismatch(self):
        with pytest.raises(DataError):
            make_windows(100, 4, w=30, scheme="contiguous")

    def test_single_window(self):
        plan = make_windows(40, 1, w=17, scheme="equally_spaced")
        assert plan.windows == ((0, 17),)

    @pytest.mark.parametrize("n,k", [(100, 7), (55, 3), (20, 20), (101, 4)])
    def test_contiguous_disjoint_cover(self, n, k):
        plan = make_windows(n, k, scheme="contiguous")
        w = n // k
        seen = set()
        for s, e in plan.windows:
            assert e - s == w
            rows = set(range(s, e))
            assert not rows & seen
            seen |= rows
        assert seen == set(range(k * w))

    @pytest.mark.parametrize("n,k,w", [(1000, 25, 125), (200, 6, 90), (60, 2, 50)])
    def test_equally_spaced_in_bounds(self, n, k, w):
        plan = make_windows(n, k, w=w, scheme="equally_spaced")
        assert len(plan.windows) == k
        for s, e in plan.windows:
            assert 0 <= s < e <= n


class TestPlanSerialization:
    def test_json_roundtrip(self):
        plan = make_windows(1000, 25, w=125, scheme="equally_spaced")
        data = json.loads(json.dumps(plan.to_json()))
        back = WindowPlan.from_json(data)
        assert back == plan
        assert set(data) == {"scheme", "K", "w", "windows"}
