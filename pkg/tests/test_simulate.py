"""Latent-strata panel simulator, its oracle, and the oracle-side analyses."""

from __future__ import annotations

import io

import numpy as np
import pytest

from didmiss import (
    AuxModel,
    Cell,
    DgpSpec,
    EstimatorError,
    InputError,
    OracleRecord,
    PRESET_KINDS,
    R1Model,
    STRATUM_LABELS,
    STRATUM_PAIRS,
    check_trend_mixture,
    decompose_att,
    did_complete_case,
    load_oracle,
    make_preset,
    naive_did_all,
    save_oracle,
    simulate_panel,
    strip_missingness,
)


def plain_spec(**overrides) -> DgpSpec:
    base = dict(
        n=2_000,
        seed=0,
        joint_sd=((0.20, 0.15, 0.05, 0.10), (0.25, 0.15, 0.02, 0.08)),
        trend=(0.4, 0.9, 0.1, 0.6),
        baseline=((5.0, 5.2), (4.0, 4.1), (4.5, 4.4), (3.0, 3.1)),
        effect=(1.0, 1.5, 0.5, 0.8),
        noise_sd=0.5,
    )
    base.update(overrides)
    return DgpSpec(**base)


# -- spec validation ----------------------------------------------------------


def test_spec_validates_probability_table():
    with pytest.raises(InputError, match="sums to"):
        plain_spec(joint_sd=((0.5, 0.0, 0.0, 0.0), (0.4, 0.0, 0.0, 0.0)))
    with pytest.raises(InputError, match="nonnegative"):
        plain_spec(joint_sd=((0.6, -0.1, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0)))
    with pytest.raises(InputError, match="arm 1 has zero probability"):
        plain_spec(joint_sd=((1.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0)))


def test_spec_validates_shapes():
    with pytest.raises(InputError, match="sample size"):
        plain_spec(n=0)
    with pytest.raises(InputError, match="trend"):
        plain_spec(trend=(0.1, 0.2))
    with pytest.raises(InputError, match="baseline"):
        plain_spec(baseline=((0.0, 0.0),))
    with pytest.raises(InputError, match="noise"):
        plain_spec(noise_sd=-1.0)


def test_model_layers_validated():
    with pytest.raises(InputError, match="first-wave response model"):
        R1Model(kind="sometimes")
    with pytest.raises(InputError, match="rate"):
        R1Model(kind="mcar", rate=0.0)
    with pytest.raises(InputError, match="auxiliary model"):
        AuxModel(kind="magic")
    with pytest.raises(InputError, match="probability"):
        AuxModel(p=1.5)
    with pytest.raises(InputError, match="pattern auxiliary models require"):
        plain_spec(aux_models=(AuxModel(kind="pattern"),))


def test_cell_layer_must_aggregate_to_joint_table():
    cells = (
        Cell(
            label="only",
            share=(1.0, 1.0),
            strata=((0.5, 0.3, 0.1, 0.1), (0.5, 0.3, 0.1, 0.1)),
        ),
    )
    with pytest.raises(InputError, match="inconsistent with the cell layer"):
        plain_spec(covariate_model=cells)


def test_cell_strata_rows_must_be_distributions():
    with pytest.raises(InputError, match="sum to"):
        Cell(label="bad", share=(1.0, 1.0), strata=((0.5, 0.5, 0.1, 0.0), (1.0, 0.0, 0.0, 0.0)))


# -- panel generation -----------------------------------------------------------


def test_same_seed_reproduces_bitwise():
    a_data, a_oracle, a_truth = simulate_panel(plain_spec())
    b_data, b_oracle, b_truth = simulate_panel(plain_spec())
    assert np.array_equal(a_data.y1, b_data.y1, equal_nan=True)
    assert np.array_equal(a_data.y2, b_data.y2, equal_nan=True)
    assert np.array_equal(a_data.d, b_data.d)
    assert np.array_equal(a_oracle.s, b_oracle.s)
    assert a_truth == b_truth


def test_seed_changes_the_draw():
    a, _, _ = simulate_panel(plain_spec())
    b, _, _ = simulate_panel(plain_spec(seed=1))
    assert not np.array_equal(a.y1, b.y1, equal_nan=True)


def test_observable_view_consistent_with_oracle():
    data, oracle, truth = simulate_panel(plain_spec())
    assert len(data) == len(oracle) == 2_000
    assert np.array_equal(data.d, oracle.d)
    # Realized response follows the stratum of each unit and its arm.
    expected_r2 = np.where(oracle.d == 1, oracle.r2_1, oracle.r2_0).astype(bool)
    assert np.array_equal(data.r2, expected_r2)
    assert np.array_equal(data.y1[data.r1], oracle.y1_true[data.r1])
    assert np.isnan(data.y1[~data.r1]).all()
    realized = np.where(oracle.d == 1, oracle.y2_1, oracle.y2_0)
    assert np.array_equal(data.y2[data.r2], realized[data.r2])
    # Ground truth aggregates the latent columns.
    treated = oracle.d == 1
    assert truth.att == pytest.approx(
        float((oracle.y2_1 - oracle.y2_0)[treated].mean()), abs=1e-12
    )
    always = treated & (oracle.r2_1 == 1) & (oracle.r2_0 == 1)
    assert truth.att_ar == pytest.approx(
        float((oracle.y2_1 - oracle.y2_0)[always].mean()), abs=1e-12
    )
    for d in (0, 1):
        assert sum(truth.pi_table[d].values()) == pytest.approx(1.0, abs=1e-12)


def test_stratum_shares_concentrate_at_design_values():
    spec = plain_spec(n=60_000)
    _, oracle, _ = simulate_panel(spec)
    for d in (0, 1):
        arm = oracle.d == d
        for code in range(4):
            share = float((oracle.s[arm] == code).mean())
            assert share == pytest.approx(spec.pi(d)[code], abs=0.01)


def test_mcar_first_wave_rate():
    spec = plain_spec(n=40_000, r1_model=R1Model("mcar", rate=0.85))
    data, _, _ = simulate_panel(spec)
    assert float(data.r1.mean()) == pytest.approx(0.85, abs=0.01)
    full, _, _ = simulate_panel(plain_spec(n=500))
    assert full.r1.all()


def test_independent_aux_rate():
    spec = plain_spec(n=40_000, aux_models=(AuxModel(p=0.3), AuxModel(p=0.9)))
    data, _, _ = simulate_panel(spec)
    assert data.n_aux == 2
    assert float(data.aux[:, 0].mean()) == pytest.approx(0.3, abs=0.01)
    assert float(data.aux[:, 1].mean()) == pytest.approx(0.9, abs=0.01)


def test_oracle_panel_indexing():
    _, oracle, _ = simulate_panel(plain_spec(n=50))
    rec = oracle[0]
    assert isinstance(rec, OracleRecord)
    assert oracle[-1].unit_id == "50"
    with pytest.raises(IndexError):
        oracle[50]
    with pytest.raises(TypeError, match="integer"):
        oracle[0:2]
    assert len(oracle.records) == 50


def test_oracle_record_rejects_inconsistency():
    with pytest.raises(ValueError, match="potential responses"):
        OracleRecord(
            unit_id="1", d=1, y1=0.0, y2=1.0, aux=(), x=None, s="AR",
            y1_true=0.0, y2_1=1.0, y2_0=0.5, r1=1, r2=1, r2_1=1, r2_0=0,
        )
    with pytest.raises(ValueError, match="selected potential outcome"):
        OracleRecord(
            unit_id="1", d=1, y1=0.0, y2=9.0, aux=(), x=None, s="AR",
            y1_true=0.0, y2_1=1.0, y2_0=0.5, r1=1, r2=1, r2_1=1, r2_0=1,
        )


# -- oracle CSV round trip ---------------------------------------------------------


def test_oracle_round_trip():
    _, oracle, _ = simulate_panel(plain_spec(n=200, aux_models=(AuxModel(p=0.5),)))
    buffer = io.StringIO()
    save_oracle(oracle, buffer)
    assert load_oracle(buffer.getvalue().encode()) == oracle.records


def test_tampered_oracle_fails_loudly():
    _, oracle, _ = simulate_panel(plain_spec(n=50))
    buffer = io.StringIO()
    save_oracle(oracle, buffer)
    lines = buffer.getvalue().splitlines()
    # Flip the stratum label of the first data row to one that contradicts
    # its observed outcome: never-respondents cannot show y2, always-
    # respondents must.
    header = lines[0].split(",")
    row = lines[1].split(",")
    row[header.index("s")] = "AR" if row[header.index("y2")] == "NA" else "NR"
    lines[1] = ",".join(row)
    with pytest.raises(InputError, match="inconsistent oracle record in row 2"):
        load_oracle("\n".join(lines).encode())


def test_oracle_csv_requires_latent_columns():
    with pytest.raises(InputError, match="missing required columns"):
        load_oracle(b"id,d,y1,y2\n1,0,0.0,1.0\n")
    with pytest.raises(InputError, match="unknown stratum label"):
        load_oracle(
            b"id,d,y1,y2,s,y1_true,y2_1,y2_0\n1,0,0.0,1.0,XX,0.0,1.0,1.0\n"
        )
    with pytest.raises(InputError, match="must not be missing"):
        load_oracle(
            b"id,d,y1,y2,s,y1_true,y2_1,y2_0\n1,0,0.0,1.0,AR,0.0,NA,1.0\n"
        )


# -- oracle-side analyses -------------------------------------------------------


def oracle_rows(rows) -> list[OracleRecord]:
    """Rows of (d, stratum label, y1_true, y2_0, y2_1) -> consistent records."""
    records = []
    for i, (d, label, y1t, y20, y21) in enumerate(rows):
        pair = STRATUM_PAIRS[STRATUM_LABELS.index(label)]
        r2 = pair[0] if d == 1 else pair[1]
        records.append(
            OracleRecord(
                unit_id=str(i + 1),
                d=d,
                y1=y1t,
                y2=(y21 if d == 1 else y20) if r2 else None,
                aux=(),
                x=None,
                s=label,
                y1_true=y1t,
                y2_1=y21,
                y2_0=y20,
                r1=1,
                r2=r2,
                r2_1=pair[0],
                r2_0=pair[1],
            )
        )
    return records


def test_decomposition_identity_on_simulated_data():
    _, oracle, truth = simulate_panel(plain_spec(n=30_000))
    dec = decompose_att(oracle)
    assert dec.total == pytest.approx(sum(dec.terms), abs=1e-12)
    assert dec.att == pytest.approx(truth.att, abs=1e-12)
    assert abs(dec.deviation) <= 6.0 * dec.se + 1e-12
    assert dec.labels[0].startswith("treated before-after")
    assert sum(dec.treated_shares.values()) == pytest.approx(1.0, abs=1e-12)


def test_decomposition_zero_share_means_zero_term():
    _, oracle, _ = simulate_panel(make_preset("monotone", n=5_000, seed=1))
    dec = decompose_att(oracle)
    assert dec.treated_shares[(0, 1)] == 0.0
    assert dec.terms[4] == 0.0


def test_decomposition_needs_control_units_for_respondent_strata():
    rows = [(1, "AR", 0.0, 0.5, 1.5)] * 3 + [(0, "NR", 0.0, 0.5, 1.5)] * 3
    with pytest.raises(EstimatorError, match="no control units in stratum AR"):
        decompose_att(oracle_rows(rows))


def test_decomposition_needs_both_arms():
    rows = [(1, "AR", 0.0, 0.5, 1.5)] * 4
    with pytest.raises(EstimatorError, match="both arms"):
        decompose_att(oracle_rows(rows))


def test_decomposition_flags_unshared_trends():
    spec = plain_spec(n=40_000, arm_trend_delta=(1.0, 1.0, 1.0, 1.0))
    _, oracle, _ = simulate_panel(spec)
    with pytest.raises(RuntimeError, match="does not share trends"):
        decompose_att(oracle)


def test_trend_mixture_identity_holds_exactly():
    _, oracle, _ = simulate_panel(plain_spec(n=20_000))
    report = check_trend_mixture(oracle)
    assert report.mixture_residual <= 1e-9
    for d in (0, 1):
        assert report.direct[d] == pytest.approx(report.mixture[d], abs=1e-9)
        assert sum(report.stratum_shares[d].values()) == pytest.approx(1.0, abs=1e-12)


def test_trend_gap_reflects_composition_not_trends():
    # Identical per-stratum trends (0 for always, 1 for if-treated) but very
    # different stratum mixes: treated 90/10, control 50/50. The arm-level
    # untreated trends then differ by -0.4 even though every stratum's trend
    # is shared.
    spec = DgpSpec(
        n=10_000,
        seed=3,
        joint_sd=((0.25, 0.25, 0.0, 0.0), (0.45, 0.05, 0.0, 0.0)),
        trend=(0.0, 1.0, 0.0, 0.0),
        baseline=((0.0, 0.0),) * 4,
        effect=(1.0, 1.0, 1.0, 1.0),
        noise_sd=0.3,
    )
    _, oracle, _ = simulate_panel(spec)
    report = check_trend_mixture(oracle)
    assert report.pt_gap == pytest.approx(-0.4, abs=4 * report.pt_gap_se)
    assert report.pt_gap_se < 0.05


# -- collapse: removing missingness --------------------------------------------


def test_strip_missingness_removes_all_missingness():
    spec = make_preset("mnar-baseline", n=3_000, seed=2)
    stripped = strip_missingness(spec)
    data, oracle, truth = simulate_panel(stripped)
    assert data.r1.all() and data.r2.all()
    assert naive_did_all(data).point == did_complete_case(data).point
    original_truth = simulate_panel(spec)[2]
    assert truth.att_population == pytest.approx(original_truth.att_population, abs=1e-12)
    # Stripping removes response-driven selection, not the arms' different
    # stratum mixes: the full-data DID equals the ATT plus the trend-mix gap.
    mix_gap = sum(
        (spec.pi(1)[s] - spec.pi(0)[s]) * spec.trend[s] for s in range(4)
    )
    assert truth.cc_population == pytest.approx(
        original_truth.att_population + mix_gap, abs=1e-12
    )


# -- presets ---------------------------------------------------------------------


def test_presets_construct_and_carry_planted_truths():
    planted = {
        "zero-bias": (1.0, 0.0),
        "homogeneous-bias": (1.0, 0.25),
        "multi-iv": (1.0, None),
        "pi": (1.0, 0.2),
        "mnar-baseline": (1.01, 47 / 140),
        "monotone": (1.06, None),
        "no-monotone": (0.98, None),
    }
    assert set(PRESET_KINDS) == set(planted)
    for kind, (att, cc_bias) in planted.items():
        spec = make_preset(kind, n=500, seed=4)
        assert spec.n == 500 and spec.seed == 4
        _, _, truth = simulate_panel(spec)
        assert truth.att_population == pytest.approx(att, abs=1e-9), kind
        if cc_bias is not None:
            assert truth.cc_bias == pytest.approx(cc_bias, abs=1e-9), kind


def test_bound_presets_plant_unit_att_among_always_respondents():
    for kind in ("monotone", "no-monotone"):
        _, _, truth = simulate_panel(make_preset(kind, n=500, seed=0))
        assert truth.att_ar_population == pytest.approx(1.0, abs=1e-9)


def test_unknown_preset_rejected():
    with pytest.raises(InputError, match="unknown preset"):
        make_preset("bogus")
