"""Typed tabular container: schema, CSV round trip, encoding, Gower distance."""
import numpy as np
import pytest

from conftest import mixed_dataset, mixed_schema
from sdgflow.errors import (
    CellTypeError,
    HeaderMismatch,
    MissingValue,
    SchemaError,
    UnknownCategory,
)
from sdgflow.tabular import (
    ColumnKind,
    ColumnSpec,
    Schema,
    column_ranges,
    concat_datasets,
    dataset_to_csv_bytes,
    encode,
    encoded_width,
    gower_distance,
    load_csv,
    make_dataset,
    schema_from_json_obj,
    schema_to_json_obj,
    write_csv,
)


# ------------------------------------------------------------------ schema ---

def test_duplicate_column_names_rejected():
    with pytest.raises(SchemaError):
        Schema((ColumnSpec("x", ColumnKind.CONTINUOUS), ColumnSpec("x", ColumnKind.CONTINUOUS)))


def test_categorical_requires_categories():
    with pytest.raises(SchemaError):
        Schema((ColumnSpec("c", ColumnKind.CATEGORICAL),))


def test_duplicate_categories_rejected():
    with pytest.raises(SchemaError):
        Schema((ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "a")),))


def test_bad_bounds_rejected():
    with pytest.raises(SchemaError):
        Schema((ColumnSpec("x", ColumnKind.CONTINUOUS, bounds=(2.0, 1.0)),))


def test_schema_json_round_trip():
    schema = mixed_schema()
    assert schema_from_json_obj(schema_to_json_obj(schema)) == schema


def test_make_dataset_checks_lengths():
    schema = Schema((ColumnSpec("x", ColumnKind.CONTINUOUS), ColumnSpec("y", ColumnKind.CONTINUOUS)))
    with pytest.raises(SchemaError):
        make_dataset(schema, {"x": [1.0, 2.0], "y": [1.0]})


def test_make_dataset_checks_category_codes():
    schema = Schema((ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "b")),))
    with pytest.raises(SchemaError):
        make_dataset(schema, {"c": [0, 2]})


def test_columns_are_immutable():
    ds = mixed_dataset(5)
    with pytest.raises((ValueError, RuntimeError)):
        ds.columns[0][0] = 99.0


# --------------------------------------------------------------------- CSV ---

def test_csv_round_trip_is_bit_exact(tmp_path):
    schema = Schema(
        (
            ColumnSpec("x", ColumnKind.CONTINUOUS),
            ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("low", "high")),
        )
    )
    tricky = [0.1 + 0.2, 1.0 / 3.0, 1e-17, -1.5e300, 0.0, 49.7]
    ds = make_dataset(schema, {"x": tricky, "c": [0, 1, 0, 1, 0, 1]})
    path = tmp_path / "t.csv"
    write_csv(ds, path)
    back = load_csv(path, schema)
    assert np.array_equal(
        back.columns[0].view(np.uint64), ds.columns[0].view(np.uint64)
    ), "continuous values must round-trip to the same 64-bit pattern"
    assert np.array_equal(back.columns[1], ds.columns[1])


def test_csv_quotes_awkward_labels(tmp_path):
    schema = Schema(
        (ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("plain", "a,b", 'say "hi"')),)
    )
    ds = make_dataset(schema, {"c": [0, 1, 2, 1]})
    path = tmp_path / "q.csv"
    write_csv(ds, path)
    back = load_csv(path, schema)
    assert np.array_equal(back.columns[0], ds.columns[0])


def test_csv_header_checked(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("x,wrong\n1.0,2.0\n")
    schema = Schema((ColumnSpec("x", ColumnKind.CONTINUOUS), ColumnSpec("y", ColumnKind.CONTINUOUS)))
    with pytest.raises(HeaderMismatch):
        load_csv(path, schema)


def test_csv_bad_number(tmp_path):
    path = tmp_path / "b.csv"
    path.write_text("x\nnot-a-number\n")
    schema = Schema((ColumnSpec("x", ColumnKind.CONTINUOUS),))
    with pytest.raises(CellTypeError):
        load_csv(path, schema)


def test_csv_unknown_category(tmp_path):
    path = tmp_path / "u.csv"
    path.write_text("c\nelsewhere\n")
    schema = Schema((ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("here", "there")),))
    with pytest.raises(UnknownCategory):
        load_csv(path, schema)


def test_csv_missing_value_policies(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("x,c\n1.0,a\n,b\n3.0,a\n")
    schema = Schema(
        (
            ColumnSpec("x", ColumnKind.CONTINUOUS),
            ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "b")),
        )
    )
    with pytest.raises(MissingValue):
        load_csv(path, schema, missing_policy="error")
    ds = load_csv(path, schema, missing_policy="drop_row")
    assert ds.n == 2
    assert ds.columns[0].tolist() == [1.0, 3.0]


def test_csv_bytes_deterministic():
    ds = mixed_dataset(50, seed=3)
    assert dataset_to_csv_bytes(ds) == dataset_to_csv_bytes(ds)


# ------------------------------------------------------------------ encode ---

def test_encoded_width_formula():
    # one 3-level + one 4-level categorical: (3-1) + (4-1) = 5
    schema = Schema(
        (
            ColumnSpec("c3", ColumnKind.CATEGORICAL, categories=("a", "b", "c")),
            ColumnSpec("c4", ColumnKind.CATEGORICAL, categories=("p", "q", "r", "s")),
        )
    )
    assert encoded_width(schema) == 5
    assert encoded_width(mixed_schema()) == 2 + 2 + 1  # 2 continuous + (3-1) + (2-1)


def test_encode_dummy_and_standardize():
    schema = Schema(
        (
            ColumnSpec("x", ColumnKind.CONTINUOUS),
            ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "b", "c")),
        )
    )
    ds = make_dataset(schema, {"x": [0.0, 2.0, 4.0, 6.0], "c": [0, 1, 2, 1]})
    m = encode(ds)
    assert (m.rows, m.cols) == (4, 3)
    assert m.column_map == (("x", "scaled-continuous"), ("c", "b"), ("c", "c"))
    # x has mean 3, population sd sqrt(5)
    sd = np.sqrt(5.0)
    assert np.allclose(m.data[:, 0], (np.array([0.0, 2.0, 4.0, 6.0]) - 3.0) / sd)
    assert m.data[:, 1].tolist() == [0.0, 1.0, 0.0, 1.0]  # indicator for "b"
    assert m.data[:, 2].tolist() == [0.0, 0.0, 1.0, 0.0]  # indicator for "c"
    assert m.degenerate_columns == ()


def test_encode_flags_zero_variance():
    schema = Schema((ColumnSpec("x", ColumnKind.CONTINUOUS),))
    m = encode(make_dataset(schema, {"x": [5.0, 5.0, 5.0]}))
    assert m.degenerate_columns == ("x",)
    assert np.all(m.data == 0.0)


# ------------------------------------------------------------------- Gower ---

def test_gower_hand_case():
    # continuous differs by 5 over range 10 -> 0.5; categorical equal -> 0
    schema = Schema(
        (
            ColumnSpec("x", ColumnKind.CONTINUOUS),
            ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "b")),
        )
    )
    ranges = ((0.0, 10.0), None)
    assert gower_distance([0.0, 1], [5.0, 1], schema, ranges) == pytest.approx(0.25)
    assert gower_distance([0.0, 0], [5.0, 1], schema, ranges) == pytest.approx(0.75)


def test_gower_degenerate_range_counts_zero():
    schema = Schema((ColumnSpec("x", ColumnKind.CONTINUOUS),))
    assert gower_distance([3.0], [9.0], schema, ((4.0, 4.0),)) == 0.0


def test_gower_pseudometric_properties():
    rng = np.random.default_rng(11)
    ds = mixed_dataset(30, seed=1)
    ranges = column_ranges(ds)
    rows = [tuple(col[i] for col in ds.columns) for i in range(ds.n)]
    schema = ds.schema
    for _ in range(200):
        a, b, c = (rows[i] for i in rng.integers(0, len(rows), 3))
        dab = gower_distance(a, b, schema, ranges)
        dba = gower_distance(b, a, schema, ranges)
        assert dab == pytest.approx(dba)
        assert 0.0 <= dab <= 1.0
        assert gower_distance(a, a, schema, ranges) == 0.0
        assert dab <= gower_distance(a, c, schema, ranges) + gower_distance(c, b, schema, ranges) + 1e-12


def test_column_ranges_bounds_win():
    schema = Schema(
        (
            ColumnSpec("x", ColumnKind.CONTINUOUS, bounds=(0.0, 100.0)),
            ColumnSpec("y", ColumnKind.CONTINUOUS),
            ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "b")),
        )
    )
    ds = make_dataset(schema, {"x": [10.0, 20.0], "y": [1.0, 4.0], "c": [0, 1]})
    assert column_ranges(ds) == ((0.0, 100.0), (1.0, 4.0), None)


# ------------------------------------------------------------------ concat ---

def test_concat_stacks_rows():
    a = mixed_dataset(4, seed=0)
    b = mixed_dataset(6, seed=1)
    both = concat_datasets(a, b)
    assert both.n == 10
    assert np.array_equal(both.columns[0][:4], a.columns[0])
    assert np.array_equal(both.columns[0][4:], b.columns[0])


def test_concat_requires_same_schema():
    a = mixed_dataset(3)
    b = make_dataset(
        Schema((ColumnSpec("x", ColumnKind.CONTINUOUS),)), {"x": [1.0]}
    )
    with pytest.raises(SchemaError):
        concat_datasets(a, b)
