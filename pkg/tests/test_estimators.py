"""Complete-case DID, the naive benchmark, and the bootstrap driver."""

from __future__ import annotations

import numpy as np
import pytest

from didmiss import (
    BootstrapConfig,
    Estimate,
    EstimatorError,
    InputError,
    Interval,
    bootstrap_ci,
    did_complete_case,
    naive_did_all,
)

from _helpers import block_panel, make_panel


# -- complete-case DID --------------------------------------------------------


def test_cc_did_on_toy_table(toy):
    est = did_complete_case(toy)
    # Treated complete cases 5,7 average a change of 1.5; controls 1,4 average 1.
    assert est.point == 0.5
    assert est.n_used == 4
    assert est.se is None and est.ci is None


def test_cc_did_ignores_incomplete_rows():
    base = make_panel([0, 0, 1, 1], [0.0, 1.0, 0.0, 1.0], [1.0, 2.0, 3.0, 4.0])
    with_noise = make_panel(
        [0, 0, 1, 1, 0, 1],
        [0.0, 1.0, 0.0, 1.0, np.nan, 7.0],
        [1.0, 2.0, 3.0, 4.0, 9.0, np.nan],
    )
    assert did_complete_case(with_noise).point == did_complete_case(base).point


def test_cc_did_refuses_armwise_empty_complete_cases():
    data = make_panel([0, 0, 1], [1.0, np.nan, 1.0], [np.nan, 2.0, 2.0])
    with pytest.raises(EstimatorError, match="no complete cases in arm 0"):
        did_complete_case(data)


# -- naive full-sample benchmark ----------------------------------------------


def test_naive_equals_cc_without_missingness():
    data = make_panel([0, 1, 0, 1], [1.0, 2.0, 3.0, 4.0], [1.5, 4.0, 3.25, 7.0])
    assert naive_did_all(data).point == did_complete_case(data).point
    assert naive_did_all(data).n_used == 4


def test_naive_refuses_missing_outcomes(toy):
    with pytest.raises(EstimatorError, match="missing outcomes"):
        naive_did_all(toy)


# -- estimate container ---------------------------------------------------------


def test_estimate_validation():
    with pytest.raises(ValueError, match="se"):
        Estimate(point=1.0, n_used=2, se=-0.5)
    with pytest.raises(ValueError, match="ci_level"):
        Estimate(point=1.0, n_used=2, ci=Interval(0.0, 2.0))
    with pytest.raises(ValueError, match="does not contain"):
        Estimate(point=5.0, n_used=2, ci=Interval(0.0, 2.0), ci_level=0.95)


def test_bootstrap_config_validation():
    with pytest.raises(InputError, match="replicates"):
        BootstrapConfig(replicates=0, seed=1)
    with pytest.raises(InputError, match="level"):
        BootstrapConfig(replicates=10, seed=1, level=1.0)


# -- bootstrap ------------------------------------------------------------------


@pytest.fixture()
def medium_panel():
    rng = np.random.default_rng(1234)
    n = 400
    d = (rng.random(n) < 0.5).astype(np.int8)
    y1 = rng.normal(0.0, 1.0, n)
    y2 = y1 + 0.3 + d * 1.0 + rng.normal(0.0, 1.0, n)
    y2[rng.random(n) < 0.2] = np.nan
    return make_panel(d, y1, y2)


def test_bootstrap_is_deterministic(medium_panel):
    cfg = BootstrapConfig(replicates=60, seed=7)
    a = bootstrap_ci(medium_panel, "cc-did", cfg)
    b = bootstrap_ci(medium_panel, "cc-did", cfg)
    assert a == b
    assert a.ci is not None and a.ci.lo <= a.point <= a.ci.hi
    assert a.ci_level == 0.95 and a.se is not None and a.se > 0


def test_bootstrap_seed_changes_interval(medium_panel):
    a = bootstrap_ci(medium_panel, "cc-did", BootstrapConfig(replicates=60, seed=7))
    b = bootstrap_ci(medium_panel, "cc-did", BootstrapConfig(replicates=60, seed=8))
    assert a.point == b.point
    assert a.ci != b.ci


def test_bootstrap_thread_count_does_not_change_result(medium_panel, monkeypatch):
    cfg = BootstrapConfig(replicates=40, seed=3)
    sequential = bootstrap_ci(medium_panel, "cc-did", cfg)
    monkeypatch.setenv("DIDMISS_THREADS", "4")
    threaded = bootstrap_ci(medium_panel, "cc-did", cfg)
    assert sequential == threaded


def test_bootstrap_accepts_callable(medium_panel):
    cfg = BootstrapConfig(replicates=20, seed=5)
    by_handle = bootstrap_ci(medium_panel, "cc-did", cfg)
    by_callable = bootstrap_ci(medium_panel, did_complete_case, cfg)
    assert by_handle == by_callable


def test_bootstrap_rejects_interval_estimand(medium_panel):
    with pytest.raises(InputError, match="bootstrap_bounds"):
        bootstrap_ci(medium_panel, "att-ar-bounds", BootstrapConfig(replicates=5, seed=0))


def test_bootstrap_rejects_unknown_handle(medium_panel):
    with pytest.raises(InputError, match="unknown estimator"):
        bootstrap_ci(medium_panel, "nope", BootstrapConfig(replicates=5, seed=0))


def test_bootstrap_counts_failed_replicates():
    # One lonely control complete case: resamples that drop it must fail,
    # be counted, and leave the rest of the interval machinery intact.
    data = block_panel(
        [
            (1, 0, 0.0, 1.0),
            (7, 0, 0.0, None),
            (12, 1, 0.0, 2.0),
        ]
    )
    est = bootstrap_ci(data, "cc-did", BootstrapConfig(replicates=50, seed=11))
    failed = [n for n in est.notes if n.startswith("replicates_failed=")]
    assert failed, est.notes
    assert int(failed[0].split("=")[1]) > 0
    assert est.ci is not None


def test_bootstrap_propagates_majority_failure():
    calls = {"bootstrap": False}

    def fragile(data):
        if calls["bootstrap"]:
            raise EstimatorError("synthetic failure")
        calls["bootstrap"] = True
        return did_complete_case(data)

    data = make_panel([0, 0, 1, 1], [0.0, 0.0, 0.0, 0.0], [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(EstimatorError, match="synthetic failure"):
        bootstrap_ci(data, fragile, BootstrapConfig(replicates=9, seed=0))


def test_bootstrap_widens_interval_to_contain_point():
    state = {"first": True}

    def shifted(data):
        est = did_complete_case(data)
        if state["first"]:
            state["first"] = False
            return Estimate(point=est.point + 100.0, n_used=est.n_used)
        return est

    rng = np.random.default_rng(0)
    data = make_panel(
        np.repeat([0, 1], 50),
        np.zeros(100),
        rng.normal(0.0, 1.0, 100),
    )
    est = bootstrap_ci(data, shifted, BootstrapConfig(replicates=30, seed=2))
    assert "ci_widened" in est.notes
    assert est.ci is not None and est.ci.hi == est.point
