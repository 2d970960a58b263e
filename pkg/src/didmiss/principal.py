"""Principal-stratification scores and weighted ATT estimation with covariates.

Units are classified by their joint potential response status
``S = (R2(treated), R2(control))``: always-respondents ``(1, 1)``,
if-treated respondents ``(1, 0)``, and never-respondents ``(0, 0)``
(response monotonicity rules out ``(0, 1)``).  Within covariate cells the
stratum composition is identified from observable response rates, and the
ATT is assembled from stratum-weighted complete-case means under principal
ignorability: outcome *changes* are unrelated to response status once
covariates are held fixed.

Identification of the scores, per covariate value ``x``::

    e11(x) = Pr(R1=1 | D=1, x) + Pr(R2=1 | D=0, x) - Pr(R1=1 | D=0, x)
    e10(x) = Pr(R2=1 | D=1, x) - e11(x)
    e00(x) = 1 - Pr(R2=1 | D=1, x)

``e11`` is clipped into ``[0, Pr(R2=1 | D=1, x)]`` when sampling noise pushes
it outside; every clip is recorded.

The ATT estimator forms, for each stratum ``s`` and arm ``d``, a
self-normalized weighted mean of ``Y2 - Y1`` over the arm's complete cases
with per-record weights::

    h_s(x) = e_s(x) / Pr(complete case | D=d, x)

``e_s`` selects the stratum's covariate profile; the denominator undoes the
over-representation of high-response cells inside the complete-case pool.
Stratum effects are combined with treated-arm stratum shares
``pi_s = mean of e_s(X) over treated records``.  With a single covariate
cell every weight is constant and the estimator reduces to the plain
complete-case difference-in-differences; the same happens under zero
missingness, where ``e11 = 1`` exactly.

Cross-arm covariate composition is taken from each arm's own records, which
is exact when covariates are balanced across arms (as in a randomized or
stratified design); with imbalanced covariates the control-side composition
follows the control arm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bounds import INCONSISTENT_FLAG
from .common import ClipEvent, clip01
from .errors import EstimatorError
from .estimators import Estimate
from .iv import _R1_NOTE
from .panel import PanelDataset

__all__ = [
    "CellScores",
    "PrincipalScoreTable",
    "SCORE_STRATA",
    "att_principal_ignorability",
    "principal_scores",
]

#: Strata whose scores are identified under response monotonicity, keyed by
#: ``(r_treated, r_control)``.
SCORE_STRATA = ((1, 1), (1, 0), (0, 0))

_STRATUM_NAMES = {(1, 1): "always", (1, 0): "if-treated", (0, 0): "never"}


@dataclass(frozen=True)
class CellScores:
    """Principal scores and occupancy for one covariate cell.

    Attributes
    ----------
    e11, e10, e00 : float
        Estimated stratum probabilities at this covariate value, for
        always-respondents, if-treated respondents and never-respondents.
        They are nonnegative and sum to one up to floating-point dust.
    n : tuple of int
        Records in the cell per arm, ``(control, treated)``.
    """

    e11: float
    e10: float
    e00: float
    n: tuple[int, int]

    def score(self, stratum: tuple[int, int]) -> float:
        """Return the score for ``stratum`` given as ``(r_treated, r_control)``."""
        try:
            return {(1, 1): self.e11, (1, 0): self.e10, (0, 0): self.e00}[stratum]
        except KeyError:
            raise KeyError(f"no principal score for stratum {stratum!r}") from None


@dataclass(frozen=True)
class PrincipalScoreTable:
    """Per-cell principal scores with treated-arm stratum shares.

    Attributes
    ----------
    cells : mapping
        Covariate value (a tuple, empty when the data carry no covariates)
        to :class:`CellScores`.
    normalizers : mapping
        Stratum ``(r_treated, r_control)`` to its treated-arm share, the
        mean of the stratum's score over treated records.  These are the
        weights used to assemble the ATT and the normalizers that make the
        stratum weights ``w_s(x) = e_s(x) / normalizer`` average to one over
        treated records.
    clip_events : tuple of ClipEvent
        One entry per score that had to be clipped into its feasible range.
    flags : tuple of str
        Contains ``"model-inconsistent rates"`` when any clip fired.
    """

    cells: Mapping[tuple, CellScores]
    normalizers: Mapping[tuple[int, int], float]
    clip_events: tuple[ClipEvent, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for stratum, share in self.normalizers.items():
            if not -1e-12 <= share <= 1.0 + 1e-12:
                raise ValueError(
                    f"stratum share out of range: {stratum!r} -> {share!r}"
                )


def _cell_index(data: PanelDataset) -> tuple[list[tuple], np.ndarray]:
    """Factorize covariate rows into ``(sorted unique keys, per-record index)``.

    Without covariates the whole sample is one cell keyed by the empty tuple.
    """
    if data.x is None:
        return [()], np.zeros(len(data), dtype=np.intp)
    rows, index = np.unique(data.x, axis=0, return_inverse=True)
    keys = [tuple(int(v) for v in row) for row in rows]
    return keys, index.ravel()


def principal_scores(data: PanelDataset) -> PrincipalScoreTable:
    """Estimate principal-stratum scores within covariate cells.

    Parameters
    ----------
    data : PanelDataset
        Panel with both arms present.  Covariate columns define the cells;
        without covariates the whole sample is a single cell keyed ``()``.

    Returns
    -------
    PrincipalScoreTable

    Raises
    ------
    EstimatorError
        If any covariate cell is empty in one of the arms, so the response
        rates that identify the scores have no denominator.  The message
        lists every offending ``(x, arm)`` pair.
    """
    keys, index = _cell_index(data)
    d = data.d
    r1 = data.r1
    r2 = data.r2

    empty: list[str] = []
    events: list[ClipEvent] = []
    cells: dict[tuple, CellScores] = {}
    for i, key in enumerate(keys):
        in_cell = index == i
        arm = [in_cell & (d == 0), in_cell & (d == 1)]
        n = (int(arm[0].sum()), int(arm[1].sum()))
        if n[0] == 0 or n[1] == 0:
            empty.extend(
                f"(x={key!r}, arm {a})" for a in (0, 1) if n[a] == 0
            )
            continue
        p_r1 = [float(r1[arm[a]].mean()) for a in (0, 1)]
        p_r2 = [float(r2[arm[a]].mean()) for a in (0, 1)]
        raw = p_r1[1] + p_r2[0] - p_r1[0]
        e11 = clip01(raw, f"e11(x={key!r})", events, hi=p_r2[1])
        e10 = p_r2[1] - e11
        e00 = 1.0 - p_r2[1]
        cells[key] = CellScores(e11=e11, e10=e10, e00=e00, n=n)

    if empty:
        raise EstimatorError(
            "empty covariate cell: " + ", ".join(empty)
        )

    treated = d == 1
    n1 = int(treated.sum())
    normalizers: dict[tuple[int, int], float] = {}
    for stratum in SCORE_STRATA:
        total = 0.0
        for i, key in enumerate(keys):
            n_treated_cell = int(((index == i) & treated).sum())
            total += cells[key].score(stratum) * n_treated_cell
        normalizers[stratum] = total / n1 if n1 else 0.0

    flags = (INCONSISTENT_FLAG,) if events else ()
    return PrincipalScoreTable(
        cells=cells,
        normalizers=normalizers,
        clip_events=tuple(events),
        flags=flags,
    )


def att_principal_ignorability(data: PanelDataset) -> Estimate:
    """ATT from stratum-weighted complete-case means under principal ignorability.

    For each identified stratum the treated and control changes are
    estimated by self-normalized weighted means over the respective arm's
    complete cases, with weights ``e_s(x) / Pr(complete case | arm, x)``.
    The ATT is the sum of the stratum contrasts weighted by the treated-arm
    stratum shares; strata with a zero share contribute nothing.

    Parameters
    ----------
    data : PanelDataset

    Returns
    -------
    Estimate
        Point estimate over the complete cases (``n_used`` counts them).
        No analytic standard error is attached; use the bootstrap.

    Raises
    ------
    EstimatorError
        If a covariate cell is empty in one arm, or contains no complete
        cases in one arm so its change cannot be estimated.
    """
    table = principal_scores(data)
    keys, index = _cell_index(data)
    cc = data.complete_case
    d = data.d
    dy = data.delta_y

    # Per-record complete-case probability of the record's own (cell, arm).
    p_cc = np.empty(len(data), dtype=np.float64)
    missing_cc: list[str] = []
    for i, key in enumerate(keys):
        in_cell = index == i
        for arm in (0, 1):
            pool = in_cell & (d == arm)
            n_cc = int((pool & cc).sum())
            if n_cc == 0:
                missing_cc.append(f"(x={key!r}, arm {arm})")
                continue
            p_cc[pool] = n_cc / table.cells[key].n[arm]
    if missing_cc:
        raise EstimatorError(
            "no complete cases in covariate cell: " + ", ".join(missing_cc)
        )

    cell_scores = {
        stratum: np.array([table.cells[k].score(stratum) for k in keys])
        for stratum in SCORE_STRATA
    }
    scores = {stratum: cell_scores[stratum][index] for stratum in SCORE_STRATA}

    point = 0.0
    for stratum in SCORE_STRATA:
        share = table.normalizers[stratum]
        if share == 0.0:
            continue
        h = scores[stratum] / p_cc
        arms = []
        for arm in (1, 0):
            pool = cc & (d == arm)
            w = h[pool]
            arms.append(float(np.sum(w * dy[pool]) / np.sum(w)))
        point += share * (arms[0] - arms[1])

    notes: list[str] = []
    if not bool(data.r1.all()):
        notes.append(_R1_NOTE)
    if table.clip_events:
        notes.append("principal scores clipped")
    return Estimate(
        point=float(point),
        n_used=int(cc.sum()),
        notes=tuple(notes),
    )
