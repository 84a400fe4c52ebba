import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalcheck.core import (
    Dataset,
    PairStructure,
    PosteriorDraws,
    PotentialOutcomeTable,
    dataset_validate,
    load_dataset_csv,
    purpose_rng,
    select_observed,
    write_dataset_csv,
)


def _dataset(a, y=None, **kwargs):
    a = np.asarray(a)
    n = a.shape[0]
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    x = np.linspace(0.0, 1.0, 2 * n).reshape(n, 2)
    return Dataset(covariates=x, assignments=a, observed_outcomes=y, **kwargs)


def test_validate_well_formed():
    report = dataset_validate(_dataset([0, 1, 0, 1]))
    assert report.ok
    assert report.issues == ()


def test_validate_empty_control_arm():
    report = dataset_validate(_dataset([1, 1, 1, 1]))
    assert not report.ok
    assert any("control arm empty" in issue for issue in report.issues)


def test_validate_empty_treatment_arm():
    report = dataset_validate(_dataset([0, 0, 0]))
    assert any("treatment arm empty" in issue for issue in report.issues)


def test_validate_nonfinite_outcome_names_row():
    report = dataset_validate(_dataset([0, 1, 0, 1], y=[0.0, 1.0, np.nan, 2.0]))
    assert not report.ok
    assert any("row 2" in issue for issue in report.issues)


def test_validate_assignment_outside_binary():
    report = dataset_validate(_dataset([0, 2, 1]))
    assert any("not in {0,1}" in issue for issue in report.issues)


def test_validate_nonpositive_offset():
    report = dataset_validate(_dataset([0, 1, 0], offsets=[1.0, 0.0, 2.0]))
    assert any("non-positive offset at row 1" in issue for issue in report.issues)


def test_validate_constant_covariate_column():
    data = Dataset(
        covariates=np.column_stack([np.ones(4), np.arange(4.0)]),
        assignments=[0, 1, 0, 1],
        observed_outcomes=np.zeros(4),
    )
    report = dataset_validate(data)
    assert any("constant covariate column 0" in issue for issue in report.issues)


def test_select_observed_basic():
    table = PotentialOutcomeTable(y0=[1.0, 2.0], y1=[3.0, 4.0])
    assert select_observed(table, [0, 1]).tolist() == [1.0, 4.0]


def test_select_observed_all_control_is_y0():
    table = PotentialOutcomeTable(y0=[5.0, 6.0, 7.0], y1=[8.0, 9.0, 10.0])
    assert select_observed(table, [0, 0, 0]).tolist() == [5.0, 6.0, 7.0]


def test_select_observed_degenerate_equal_arms():
    table = PotentialOutcomeTable(y0=[5.0] * 3, y1=[5.0] * 3)
    assert select_observed(table, [1, 0, 1]).tolist() == [5.0, 5.0, 5.0]


def test_select_observed_length_mismatch():
    table = PotentialOutcomeTable(y0=[1.0, 2.0], y1=[3.0, 4.0])
    with pytest.raises(ValueError):
        select_observed(table, [0, 1, 0])


@given(
    st.lists(
        st.tuples(
            st.floats(-50, 50, allow_nan=False),
            st.floats(-50, 50, allow_nan=False),
            st.integers(0, 1),
        ),
        min_size=1,
        max_size=40,
    )
)
@settings(max_examples=60, deadline=None)
def test_select_observed_complement_recovers_table(rows):
    y0 = np.array([r[0] for r in rows])
    y1 = np.array([r[1] for r in rows])
    a = np.array([r[2] for r in rows])
    table = PotentialOutcomeTable(y0=y0, y1=y1)
    chosen = select_observed(table, a)
    complement = select_observed(table, 1 - a)
    # the two selections partition the table exactly
    assert np.array_equal(np.where(a == 1, chosen, complement), y1)
    assert np.array_equal(np.where(a == 0, chosen, complement), y0)


def test_posterior_draws_row_count_enforced():
    with pytest.raises(ValueError):
        PosteriorDraws(phi_draws=np.zeros((5, 2)), theta_draws=np.zeros((4, 3)), draw_count=5)


def test_core_arrays_frozen(small_dataset):
    with pytest.raises(ValueError):
        small_dataset.covariates[0, 0] = 99.0


def test_purpose_rng_streams_differ_and_reproduce():
    a1 = purpose_rng(123, "generation").random(4)
    a2 = purpose_rng(123, "generation").random(4)
    b = purpose_rng(123, "replication").random(4)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    with pytest.raises(ValueError):
        purpose_rng(1, "nope")


def test_csv_round_trip(tmp_path, count_dataset):
    path = tmp_path / "data.csv"
    write_dataset_csv(count_dataset, path)
    loaded = load_dataset_csv(path)
    assert np.array_equal(loaded.assignments, count_dataset.assignments)
    assert np.allclose(loaded.observed_outcomes, count_dataset.observed_outcomes)
    assert np.allclose(loaded.covariates, count_dataset.covariates)
    assert np.allclose(loaded.offsets, count_dataset.offsets)
    assert loaded.covariate_names == ("senior", "roach1")


def test_csv_round_trip_pairs(tmp_path, paired_dataset):
    path = tmp_path / "pairs.csv"
    write_dataset_csv(paired_dataset, path)
    loaded = load_dataset_csv(path)
    assert loaded.pair_structure is not None
    assert np.array_equal(loaded.pair_structure.pair_ids, paired_dataset.pair_structure.pair_ids)
    assert np.array_equal(loaded.pair_structure.grades, paired_dataset.pair_structure.grades)


def test_csv_missing_cell_is_error(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,y,x1\n0,1.5,\n")
    with pytest.raises(ValueError, match="missing value"):
        load_dataset_csv(path)


def test_csv_requires_header_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,x1\n0,1.5\n")
    with pytest.raises(ValueError, match="missing required column"):
        load_dataset_csv(path)


def test_csv_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,y,x1\n0,oops,1.0\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_dataset_csv(path)
