"""Shared fixtures for the didmiss test suite."""

from __future__ import annotations

from pathlib import Path

import pytest

from didmiss import PanelDataset, RateTable, load_panel

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def toy_path() -> Path:
    """Nine-unit example table with missing outcomes and one auxiliary variable."""
    return DATA_DIR / "toy.csv"


@pytest.fixture()
def toy(toy_path: Path) -> PanelDataset:
    return load_panel(toy_path)


@pytest.fixture(scope="session")
def survey_rates() -> RateTable:
    """Two-wave survey response rates with the treated arm going more missing.

    Wave-level missingness 42.26%/39.16% pre and 44.87%/45.72% post for
    control/treated gives the response rates below; these rates contradict
    response monotonicity + parallel missingness trends (the implied
    if-treated-respondent share is -0.0225), making them the canonical
    clip-and-flag fixture.
    """
    return RateTable(
        n=(10_000, 10_000),
        p_r1=(0.5774, 0.6084),
        p_r2=(0.5428, 0.5513),
        p_r2_given_r1=(None, None),
        p_r2_given_aux=((), ()),
    )
