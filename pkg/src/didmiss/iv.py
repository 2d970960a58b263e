"""Point identification of the ATT using auxiliary response indicators as
instruments for outcome missingness.

The complete-case DID is biased by the arm-wise gap between respondents' and
nonrespondents' outcome trends. A baseline response indicator R~ that (i)
shifts the probability of post-period missingness, (ii) does not shift the
outcome trend itself, and (iii) sees the same respondent/nonrespondent trend
gap at both of its levels, identifies that gap from observed data:

    gap_d = - numer_d / denom_d,
    numer_d = E(dY | D=d, R~=1, R1=1, R2=1) - E(dY | D=d, R~=0, R1=1, R2=1),
    denom_d = Pr(R2=0 | D=d, R~=0, R1=1) - Pr(R2=0 | D=d, R~=1, R1=1),

and the corrected estimator is

    att_iv = cc_did + correction_1 - correction_0,
    correction_d = (numer_d / denom_d) * Pr(R2=0 | D=d).

With two instruments the level-(iii) requirement can be traded for "parallel
difference in trends" (both instruments shift the trend by the same amount):
the correction ratio becomes a difference of the two instruments' trend gaps
over a difference of their missingness gaps, which cancels the common direct
trend shift. Everything conditions on R1 = 1; when the first wave is fully
observed the unconditional form is recovered automatically, and under
first-wave missingness the estimand is the ATT among first-wave respondents
(noted on the output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .common import EPS_DENOM
from .errors import EstimatorError, InputError
from .estimators import Estimate, did_complete_case
from .panel import PanelDataset

__all__ = ["IvDiagnostics", "att_iv", "att_iv_multi"]

_R1_NOTE = "estimand: ATT among first-wave respondents (R1 = 1)"


@dataclass(frozen=True)
class IvDiagnostics:
    """Per-arm diagnostics of the instrumented correction.

    denom[d]
        Instrument-strength denominator. Single instrument:
        Pr(R2=0|D=d,R~=0,R1=1) - Pr(R2=0|D=d,R~=1,R1=1). Instrument pair:
        the composite [q2(1)-q2(0)] - [q1(1)-q1(0)] with
        q_k(v) = Pr(R2=0|D=d,R~k=v,R1=1).
    missing_share[d]
        Pr(R2 = 0 | D = d); a zero annihilates arm d's correction exactly.
    bias_correction[d]
        The additive correction attributed to arm d, signed as applied:
        point = cc_did + bias_correction[0] + bias_correction[1].
    trend_gap[d]
        Observed complete-case trend gap across instrument levels (the
        numerator before scaling) — reported as a diagnostic only; the
        homogeneity of the underlying respondent/nonrespondent gap is not
        testable from data.
    """

    denom: tuple[float, float]
    missing_share: tuple[float, float]
    bias_correction: tuple[float, float]
    trend_gap: tuple[float, float]


def _check_aux_index(data: PanelDataset, k: int) -> None:
    if not 0 <= k < data.n_aux:
        raise InputError(
            f"aux index {k} out of range: dataset has {data.n_aux} auxiliary indicator(s)"
        )


def _cell_stats(
    data: PanelDataset, d: int, k: int
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Per instrument level v: (mean dY over complete cases, Pr(R2=0 | R1=1)).

    Raises when a level has no complete cases in this arm.
    """
    arm = data.d == d
    r1 = arm & data.r1
    cc = r1 & data.r2
    aux = data.aux[:, k]
    means: list[float] = []
    q: list[float] = []
    for v in (0, 1):
        cc_cell = cc & (aux == v)
        n_cc = int(cc_cell.sum())
        if n_cc == 0:
            raise EstimatorError(f"empty instrument cell (arm {d}, aux={v}): no complete cases")
        means.append(float((data.y2[cc_cell] - data.y1[cc_cell]).mean()))
        r1_cell = r1 & (aux == v)
        q.append(1.0 - n_cc / int(r1_cell.sum()))
    return (means[0], means[1]), (q[0], q[1])


def _missing_share(data: PanelDataset, d: int) -> float:
    arm = data.d == d
    return float((~data.r2[arm]).sum()) / int(arm.sum())


def att_iv(data: PanelDataset, aux_index: int) -> tuple[Estimate, IvDiagnostics]:
    """Single-instrument corrected DID.

    Per arm: a zero missing share annihilates the correction exactly (no
    instrument checks are needed or made); otherwise both instrument levels
    must contain complete cases and the missingness-gap denominator must
    clear the weak-instrument threshold.
    """
    _check_aux_index(data, aux_index)
    cc = did_complete_case(data)

    denom = [0.0, 0.0]
    share = [0.0, 0.0]
    corr = [0.0, 0.0]
    gap = [0.0, 0.0]
    for d in (0, 1):
        share[d] = _missing_share(data, d)
        if share[d] == 0.0:
            continue
        (m0, m1), (q0, q1) = _cell_stats(data, d, aux_index)
        denom[d] = q0 - q1
        gap[d] = m1 - m0
        if abs(denom[d]) < EPS_DENOM:
            raise EstimatorError(f"weak instrument in arm {d}")
        corr[d] = gap[d] / denom[d] * share[d]

    point = cc.point + corr[1] - corr[0]
    notes = (_R1_NOTE,) if not data.r1.all() else ()
    est = Estimate(point=point, n_used=cc.n_used, notes=notes)
    diag = IvDiagnostics(
        denom=(denom[0], denom[1]),
        missing_share=(share[0], share[1]),
        bias_correction=(-corr[0], corr[1]),
        trend_gap=(gap[0], gap[1]),
    )
    return est, diag


def att_iv_multi(
    data: PanelDataset, aux_pair: tuple[int, int]
) -> tuple[Estimate, IvDiagnostics]:
    """Two-instrument corrected DID under parallel difference in trends.

    correction_d = (numer1 - numer2) / composite * Pr(R2=0|D=d), with
    numer_k the observed complete-case trend gap across instrument k's levels
    and composite = [q2(1)-q2(0)] - [q1(1)-q1(0)]. A common direct trend
    shift carried by both instruments cancels in numer1 - numer2, which is
    what licenses using instruments that individually shift the trend.
    """
    k1, k2 = aux_pair
    _check_aux_index(data, k1)
    _check_aux_index(data, k2)
    cc = did_complete_case(data)

    share = [_missing_share(data, 0), _missing_share(data, 1)]
    denom = [0.0, 0.0]
    corr = [0.0, 0.0]
    gap = [0.0, 0.0]
    if any(s > 0.0 for s in share):
        cc_mask = data.complete_case
        if np.array_equal(data.aux[cc_mask, k1], data.aux[cc_mask, k2]):
            raise EstimatorError(
                "degenerate instrument pair: indicators are identical on complete cases"
            )
    for d in (0, 1):
        if share[d] == 0.0:
            continue
        (m1_0, m1_1), (q1_0, q1_1) = _cell_stats(data, d, k1)
        (m2_0, m2_1), (q2_0, q2_1) = _cell_stats(data, d, k2)
        numer1 = m1_1 - m1_0
        numer2 = m2_1 - m2_0
        denom[d] = (q2_1 - q2_0) - (q1_1 - q1_0)
        gap[d] = numer1 - numer2
        if abs(denom[d]) < EPS_DENOM:
            raise EstimatorError(f"weak instrument in arm {d}")
        corr[d] = gap[d] / denom[d] * share[d]

    point = cc.point + corr[1] - corr[0]
    notes = (_R1_NOTE,) if not data.r1.all() else ()
    est = Estimate(point=point, n_used=cc.n_used, notes=notes)
    diag = IvDiagnostics(
        denom=(denom[0], denom[1]),
        missing_share=(share[0], share[1]),
        bias_correction=(-corr[0], corr[1]),
        trend_gap=(gap[0], gap[1]),
    )
    return est, diag
