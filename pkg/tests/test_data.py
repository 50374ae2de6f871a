"""Dataset construction, CSV ingestion, rescaling and complete cases."""

import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hskdetect.data import (
    CsvSchema,
    DataError,
    Dataset,
    complete_cases,
    ingest_csv,
    read_column,
    rescale_to_unit_cube,
    to_csv,
)

CSV3 = "x,y\n0.1,1.0\n0.5,2.0\n0.9,3.5\n"


class TestIngest:
    def test_three_rows(self):
        d = ingest_csv(CSV3, CsvSchema(("x",), "y"))
        assert (d.n, d.m) == (3, 1)
        assert d.delta is None
        np.testing.assert_array_equal(d.Y, [1.0, 2.0, 3.5])

    def test_indicator_column(self):
        text = "x,y,d\n0.1,1.0,1\n0.5,2.0,0\n0.9,3.5,1\n"
        d = ingest_csv(text, CsvSchema(("x",), "y", "d"))
        np.testing.assert_array_equal(d.delta, [1, 0, 1])

    def test_parse_error_names_row_and_column(self):
        text = "x,y\n0.1,1.0\n0.5,abc\n0.9,3.5\n"
        with pytest.raises(DataError, match=r"row 2, column y"):
            ingest_csv(text, CsvSchema(("x",), "y"))

    def test_non_binary_indicator(self):
        with pytest.raises(DataError, match="indicator"):
            ingest_csv("x,y,d\n0.1,1.0,2\n", CsvSchema(("x",), "y", "d"))

    def test_empty_file(self):
        with pytest.raises(DataError, match="empty"):
            ingest_csv("", CsvSchema(("x",), "y"))
        with pytest.raises(DataError, match="empty"):
            ingest_csv("x,y\n", CsvSchema(("x",), "y"))

    def test_unknown_column(self):
        with pytest.raises(DataError, match="not found"):
            ingest_csv(CSV3, CsvSchema(("z",), "y"))

    def test_missing_response_may_be_blank(self):
        d = ingest_csv("x,y,d\n0.1,,0\n0.2,NA,0\n0.3,4,1\n", CsvSchema(("x",), "y", "d"))
        np.testing.assert_array_equal(d.Y, [0.0, 0.0, 4.0])

    def test_non_finite_rejected(self):
        with pytest.raises(DataError, match="not finite"):
            ingest_csv("x,y\n0.1,inf\n", CsvSchema(("x",), "y"))

    def test_file_object(self):
        d = ingest_csv(io.StringIO(CSV3), CsvSchema(("x",), "y"))
        assert d.n == 3

    def test_read_column(self):
        np.testing.assert_array_equal(read_column(CSV3, "x"), [0.1, 0.5, 0.9])


class TestDataset:
    def test_unobserved_responses_are_never_kept(self):
        d = Dataset([0.1, 0.2], [7.0, 9.0], [1, 0])
        assert d.Y[1] == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 1)), np.zeros(2))

    def test_bad_delta(self):
        with pytest.raises(DataError, match="0 and 1"):
            Dataset([0.1, 0.2], [1.0, 2.0], [1, 3])

    def test_immutable(self):
        d = Dataset([0.1, 0.2], [1.0, 2.0])
        with pytest.raises(ValueError):
            d.Y[0] = 5.0


class TestRescale:
    def test_symmetric_range(self):
        d, rmap = rescale_to_unit_cube(Dataset([-1.0, 0.0, 1.0], [1.0, 2.0, 3.0]))
        np.testing.assert_allclose(d.X[:, 0], [0.0, 0.5, 1.0])
        assert rmap.lo == (-1.0,) and rmap.hi == (1.0,)

    def test_identity_range(self):
        X = np.array([0.0, 0.3, 1.0])
        d, rmap = rescale_to_unit_cube(Dataset(X, np.zeros(3)))
        np.testing.assert_array_equal(d.X[:, 0], X)
        assert (rmap.lo, rmap.hi) == ((0.0,), (1.0,))

    def test_constant_covariate(self):
        with pytest.raises(DataError, match="constant covariate"):
            rescale_to_unit_cube(Dataset([5.0, 5.0, 5.0], [1.0, 2.0, 3.0]))

    def test_y_and_delta_unchanged(self):
        src = Dataset([[3.0, 1.0], [4.0, 0.0], [5.0, 2.0]], [1.0, 2.0, 3.0], [1, 0, 1])
        d, _ = rescale_to_unit_cube(src)
        np.testing.assert_array_equal(d.Y, src.Y)
        np.testing.assert_array_equal(d.delta, src.delta)
        np.testing.assert_array_equal(d.X.min(axis=0), [0.0, 0.0])
        np.testing.assert_array_equal(d.X.max(axis=0), [1.0, 1.0])

    @given(arrays(float, (12, 2), elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_invert_round_trip(self, X):
        if np.any(np.ptp(X, axis=0) < 1e-6 * (1 + np.abs(X).max())):
            return
        d, rmap = rescale_to_unit_cube(Dataset(X, np.zeros(len(X))))
        back = rmap.invert(d.X)
        np.testing.assert_allclose(back, X, rtol=1e-12, atol=1e-12 * np.abs(X).max())


class TestCompleteCases:
    def test_filter(self):
        d = complete_cases(Dataset([0.1, 0.2, 0.3], [1.0, 2.0, 3.0], [1, 0, 1]))
        assert d.n == 2 and d.delta is None
        np.testing.assert_array_equal(d.Y, [1.0, 3.0])
        np.testing.assert_array_equal(d.X[:, 0], [0.1, 0.3])

    def test_all_observed(self):
        d = Dataset([0.1, 0.2, 0.3], [1.0, 2.0, 3.0], [1, 1, 1])
        out = complete_cases(d)
        np.testing.assert_array_equal(out.X, d.X)
        np.testing.assert_array_equal(out.Y, d.Y)

    def test_none_observed(self):
        with pytest.raises(DataError, match="no complete cases"):
            complete_cases(Dataset([0.1, 0.2], [1.0, 2.0], [0, 0]))

    @given(st.lists(st.booleans(), min_size=1, max_size=30).filter(any))
    def test_idempotent(self, mask):
        n = len(mask)
        d = Dataset(np.arange(n, dtype=float), np.arange(n, dtype=float) ** 2, np.array(mask, dtype=int))
        once = complete_cases(d)
        twice = complete_cases(Dataset(once.X, once.Y, np.ones(once.n, dtype=int)))
        assert once == twice


finite = st.floats(-1e9, 1e9, allow_nan=False, allow_infinity=False)


@given(
    arrays(float, st.tuples(st.integers(1, 15), st.just(2)), elements=finite),
    st.data(),
)
def test_csv_round_trip_is_a_fixed_point(X, data):
    n = len(X)
    Y = data.draw(arrays(float, n, elements=finite))
    delta = data.draw(arrays(np.int8, n, elements=st.integers(0, 1)))
    schema = CsvSchema(("a", "b"), "y", "d")
    first = ingest_csv(to_csv(Dataset(X, Y, delta), schema), schema)
    second = ingest_csv(to_csv(first, schema), schema)
    assert first == second
    np.testing.assert_array_equal(first.X, X)
