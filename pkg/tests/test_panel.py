"""Panel container, CSV grammar, and response-rate table."""

from __future__ import annotations

import io
import math

import numpy as np
import pytest

from didmiss import (
    ColumnMapping,
    InputError,
    PanelDataset,
    compute_rates,
    load_panel,
    save_panel,
)

from _helpers import make_panel


# -- loading the nine-unit example table ------------------------------------


def test_toy_loads_expected_shape(toy):
    assert len(toy) == 9
    assert toy.unit_ids == tuple(str(i) for i in range(1, 10))
    assert toy.d.tolist() == [0, 0, 1, 0, 1, 1, 1, 1, 1]
    # w1 is an auxiliary *variable*: its presence becomes the indicator.
    assert toy.n_aux == 1
    assert toy.aux[:, 0].tolist() == [1, 1, 1, 0, 1, 1, 0, 0, 0]
    assert toy.n_covariates == 0


def test_toy_missingness_masks(toy):
    assert toy.r1.tolist() == [1, 0, 0, 1, 1, 1, 1, 1, 1]
    assert toy.r2.tolist() == [1, 1, 1, 1, 1, 0, 1, 0, 0]
    assert toy.complete_case.tolist() == [1, 0, 0, 1, 1, 0, 1, 0, 0]


def test_toy_delta_y_nan_where_either_missing(toy):
    dy = toy.delta_y
    assert dy[0] == 1.0 and dy[3] == 1.0 and dy[4] == 2.0 and dy[6] == 1.0
    assert all(math.isnan(dy[i]) for i in (1, 2, 5, 7, 8))


def test_toy_rates_match_hand_counts(toy):
    rates = compute_rates(toy)
    assert rates.n == (3, 6)
    assert rates.p_r1 == (2 / 3, 5 / 6)
    assert rates.p_r2 == (1.0, 0.5)
    assert rates.p_r2_given_r1 == (1.0, 2 / 5)
    # Treated, first-wave respondents split by the auxiliary indicator:
    # aux=0 holds units 7,8,9 (one responds), aux=1 holds units 5,6 (one responds).
    assert rates.p_r2_given_aux[1][0] == (1 / 3, 1 / 2)
    assert rates.p_r2_given_aux[0][0] == (1.0, 1.0)


def test_counting_identity(toy):
    rates = compute_rates(toy)
    for d in (0, 1):
        arm = toy.d == d
        assert int((toy.r1[arm] & toy.r2[arm]).sum()) <= int(toy.r2[arm].sum())
        assert rates.p_r2_given_r1[d] * rates.p_r1[d] <= rates.p_r2[d] + 1e-12


def test_no_missingness_means_unit_rates():
    data = make_panel([0, 0, 1, 1], [1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0])
    rates = compute_rates(data)
    assert rates.p_r1 == (1.0, 1.0)
    assert rates.p_r2 == (1.0, 1.0)
    assert rates.p_r2_given_r1 == (1.0, 1.0)


def test_rates_flag_empty_denominators_as_none():
    # No first-wave respondents among controls: the conditional has no denominator.
    data = make_panel([0, 0, 1], [np.nan, np.nan, 1.0], [1.0, 2.0, 2.0])
    rates = compute_rates(data)
    assert rates.p_r2_given_r1[0] is None
    assert rates.p_r2_given_r1[1] == 1.0


def test_rates_invariant_to_duplication(toy):
    doubled = PanelDataset(
        np.concatenate([toy.d, toy.d]),
        np.concatenate([toy.y1, toy.y1]),
        np.concatenate([toy.y2, toy.y2]),
        aux=np.concatenate([toy.aux, toy.aux]),
    )
    a, b = compute_rates(toy), compute_rates(doubled)
    assert a.p_r1 == b.p_r1
    assert a.p_r2 == b.p_r2
    assert a.p_r2_given_r1 == b.p_r2_given_r1
    assert a.p_r2_given_aux == b.p_r2_given_aux
    assert b.n == (6, 12)


# -- CSV grammar -------------------------------------------------------------


def test_missing_tokens_case_insensitive():
    data = load_panel(b"id,d,y1,y2\n1,0,na,1\n2,0,,2\n3,1,NA,Na\n4,1,1,2\n")
    assert data.r1.tolist() == [0, 0, 0, 1]
    assert data.r2.tolist() == [1, 1, 0, 1]


def test_unparseable_numeric_is_an_error_not_missing():
    with pytest.raises(InputError, match="unparseable numeric"):
        load_panel(b"id,d,y1,y2\n1,0,oops,1\n2,1,1,2\n")


def test_header_detection_requires_core_columns():
    with pytest.raises(InputError, match="y2"):
        load_panel(b"id,d,y1\n1,0,1\n")


def test_detect_numbered_columns():
    mapping = ColumnMapping.detect(["id", "d", "y1", "y2", "aux2", "aux1", "x1", "w1"])
    assert mapping.aux_indicators == ("aux1", "aux2")
    assert mapping.aux_variables == ("w1",)
    assert mapping.covariates == ("x1",)


def test_aux_indicator_column_must_be_binary():
    with pytest.raises(InputError, match="0/1"):
        load_panel(b"id,d,y1,y2,aux1\n1,0,1,1,2\n2,1,1,2,0\n")


def test_covariate_column_must_be_nonnegative_integer():
    with pytest.raises(InputError, match="integer"):
        load_panel(b"id,d,y1,y2,x1\n1,0,1,1,1.5\n2,1,1,2,0\n")
    with pytest.raises(InputError, match="non-negative"):
        load_panel(b"id,d,y1,y2,x1\n1,0,1,1,-1\n2,1,1,2,0\n")


def test_treatment_must_be_binary_token():
    with pytest.raises(InputError, match="treatment must be 0 or 1"):
        load_panel(b"id,d,y1,y2\n1,2,1,1\n2,0,1,2\n")


def test_ragged_row_is_malformed():
    with pytest.raises(InputError, match="row 3 has 3 cells"):
        load_panel(b"id,d,y1,y2\n1,0,1,1\n2,1,2\n")


def test_duplicate_header_rejected():
    with pytest.raises(InputError, match="duplicate column"):
        load_panel(b"id,d,y1,y1\n1,0,1,1\n")


def test_missing_file_is_input_error(tmp_path):
    with pytest.raises(InputError, match="no such file"):
        load_panel(tmp_path / "absent.csv")


def test_empty_input_rejected():
    with pytest.raises(InputError, match="empty dataset"):
        load_panel(b"id,d,y1,y2\n")


def test_custom_schema_names():
    data = load_panel(
        b"unit,arm,pre,post\nA,0,1,2\nB,1,2,4\n",
        schema=ColumnMapping(id="unit", treatment="arm", y1="pre", y2="post"),
    )
    assert data.unit_ids == ("A", "B")
    assert data.y2.tolist() == [2.0, 4.0]


def test_declared_column_must_exist():
    with pytest.raises(InputError, match="declared column"):
        load_panel(
            b"id,d,y1,y2\n1,0,1,2\n2,1,2,4\n",
            schema=ColumnMapping(aux_indicators=("aux9",)),
        )


def test_round_trip_preserves_records(toy):
    buffer = io.StringIO()
    save_panel(toy, buffer)
    reloaded = load_panel(buffer.getvalue().encode())
    assert reloaded.records == toy.records
    assert reloaded.unit_ids == toy.unit_ids


def test_save_format_uses_na_and_numbered_columns():
    data = make_panel(
        [0, 1], [1.0, np.nan], [np.nan, 2.5], aux=[[1], [0]], x=[[3], [0]]
    )
    buffer = io.StringIO()
    save_panel(data, buffer)
    lines = buffer.getvalue().strip().splitlines()
    assert lines[0] == "id,d,y1,y2,aux1,x1"
    assert lines[1] == "1,0,1.0,NA,1,3"
    assert lines[2] == "2,1,NA,2.5,0,0"


# -- container validation -----------------------------------------------------


def test_arrays_are_read_only(toy):
    with pytest.raises(ValueError):
        toy.y1[0] = 99.0
    with pytest.raises(ValueError):
        toy.d[0] = 1


def test_both_arms_required():
    with pytest.raises(InputError, match="single-arm"):
        make_panel([1, 1], [1.0, 2.0], [2.0, 3.0])


def test_bad_treatment_value_rejected():
    with pytest.raises(InputError, match="treatment must be 0 or 1"):
        make_panel([0, 3], [1.0, 2.0], [2.0, 3.0])


def test_shape_mismatch_rejected():
    with pytest.raises(InputError, match="expected"):
        make_panel([0, 1], [1.0], [2.0, 3.0])


def test_aux_values_validated():
    with pytest.raises(InputError, match="0/1"):
        make_panel([0, 1], [1.0, 2.0], [2.0, 3.0], aux=[[2], [0]])


def test_support_containment_enforced():
    with pytest.raises(InputError, match="outside the declared support"):
        make_panel([0, 1], [0.0, 5.0], [1.0, 1.0], outcome_support=(0.0, 2.0))
    with pytest.raises(InputError, match="out of order"):
        make_panel([0, 1], [1.0, 1.0], [1.0, 1.0], outcome_support=(2.0, 0.0))


def test_with_support_revalidates(toy):
    widened = toy.with_support(-10.0, 10.0)
    assert widened.outcome_support == (-10.0, 10.0)
    assert toy.outcome_support is None
    with pytest.raises(InputError, match="outside the declared support"):
        toy.with_support(0.0, 2.0)


def test_missing_outcomes_do_not_trip_support_check():
    data = make_panel([0, 1], [np.nan, 0.5], [0.25, np.nan], outcome_support=(0.0, 1.0))
    assert data.outcome_support == (0.0, 1.0)


def test_from_records_round_trip(toy):
    rebuilt = PanelDataset.from_records(toy.records)
    assert rebuilt.records == toy.records
    assert np.array_equal(rebuilt.aux, toy.aux)


def test_record_view_fields(toy):
    rec = toy.records[5]  # unit 6: observed pre, missing post
    assert rec.unit_id == "6"
    assert rec.d == 1
    assert rec.y1 == 3.0 and rec.y2 is None
    assert rec.r1 == 1 and rec.r2 == 0
    assert not rec.is_complete_case
    assert toy.records[4].is_complete_case
