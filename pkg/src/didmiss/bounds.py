"""Principal-strata proportions and trimming bounds for the ATT among
always-respondents.

The latent stratum S = (R2(1), R2(0)) classifies units by how treatment
would have affected their post-period response: always-respondents (1,1),
if-treated-respondents (1,0), if-control-respondents (0,1),
never-respondents (0,0). Under parallel trends of missingness the
counterfactual response rates are identified from observed rates; adding
response monotonicity (treatment never destroys response) point-identifies
the treated-arm strata shares, and without it the shares are bounded by
Fréchet inequalities.

The ATT among always-respondents ("ATT-AR") is then partially identified by
fractional trimming: within each arm the always-respondents are a known
share p_d = π_11(d) / Pr(R2=1|D=d) of observed respondents, so their mean
outcome change is bracketed by the bottom-p_d and top-p_d trimmed means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .common import ClipEvent, Interval, clip01
from .errors import DidMissError, EstimatorError, InputError
from .estimators import BootstrapConfig
from .panel import PanelDataset, RateTable, compute_rates

__all__ = [
    "StrataProportions",
    "BoundResult",
    "BoundsBootstrap",
    "strata_proportions_monotone",
    "strata_proportions_bounds",
    "trimmed_mean",
    "att_ar_bounds",
    "bootstrap_bounds",
]

#: Strata keys (r1, r0) = (R2(1), R2(0)).
STRATA = ((1, 1), (1, 0), (0, 1), (0, 0))

#: Flag raised whenever a probability formula needed clipping: the observed
#: rates contradict the assumption set that produced the formula.
INCONSISTENT_FLAG = "model-inconsistent rates"

Mode = Literal["monotone", "no-monotone"]


@dataclass(frozen=True)
class StrataProportions:
    """Interval-valued strata shares per arm with consistency diagnostics.

    pi[d][(r1, r0)] is the share of stratum (r1, r0) in arm d; point-identified
    cells are degenerate intervals. clip_events record every probability that a
    formula pushed outside [0, 1]; any event raises the "model-inconsistent
    rates" flag.
    """

    pi: tuple[Mapping[tuple[int, int], Interval], Mapping[tuple[int, int], Interval]]
    mode: Mode
    clip_events: tuple[ClipEvent, ...] = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for d in (0, 1):
            for key in STRATA:
                iv = self.pi[d][key]
                if iv.lo < -1e-12 or iv.hi > 1 + 1e-12:
                    raise ValueError(f"pi[{d}][{key}] = [{iv.lo}, {iv.hi}] outside [0, 1]")


def _pi_dict(cells: dict[tuple[int, int], Interval]) -> Mapping[tuple[int, int], Interval]:
    missing = [k for k in STRATA if k not in cells]
    if missing:
        raise ValueError(f"strata dictionary missing cells {missing}")
    return dict(cells)


def strata_proportions_monotone(rates: RateTable) -> StrataProportions:
    """Point-identify strata shares assuming response monotonicity and
    parallel trends of missingness.

    Treated arm: pi_11(1) = p_r2[0] - p_r1[0] + p_r1[1];
    pi_10(1) = (p_r2[1] - p_r2[0]) - (p_r1[1] - p_r1[0]); pi_01(1) = 0;
    pi_00(1) by complementation. Control arm: pi_11(0) = p_r2[0],
    pi_01(0) = 0; pi_10(0) and pi_00(0) are not separately identified and are
    reported as the interval [0, 1 - pi_11(0)] each (their sum is pinned).

    Raw values outside [0, 1] (data contradicting the assumptions) are
    clipped, each with a recorded clip event, and flagged — never an error.
    """
    events: list[ClipEvent] = []
    p_r1, p_r2 = rates.p_r1, rates.p_r2

    pi11_1 = clip01(p_r2[0] - p_r1[0] + p_r1[1], "pi_11(1)", events)
    pi10_1 = clip01((p_r2[1] - p_r2[0]) - (p_r1[1] - p_r1[0]), "pi_10(1)", events)
    pi00_1 = clip01(1.0 - pi11_1 - pi10_1, "pi_00(1)", events)
    treated = _pi_dict(
        {
            (1, 1): Interval.point(pi11_1),
            (1, 0): Interval.point(pi10_1),
            (0, 1): Interval.point(0.0),
            (0, 0): Interval.point(pi00_1),
        }
    )

    pi11_0 = clip01(p_r2[0], "pi_11(0)", events)
    rest_0 = 1.0 - pi11_0
    control = _pi_dict(
        {
            (1, 1): Interval.point(pi11_0),
            (1, 0): Interval(0.0, rest_0),
            (0, 1): Interval.point(0.0),
            (0, 0): Interval(0.0, rest_0),
        }
    )

    flags = (INCONSISTENT_FLAG,) if events else ()
    return StrataProportions(
        pi=(control, treated), mode="monotone", clip_events=tuple(events), flags=flags
    )


def _frechet_cells(
    observed: float, counterfactual: float, arm: int
) -> dict[tuple[int, int], Interval]:
    """All four strata intervals from the two marginal response rates.

    For the treated arm the observed margin is Pr(R2(1)=1|D=1) and the
    counterfactual one Pr(R2(0)=1|D=1); for the control arm the roles swap.
    Every cell interval follows from pi_11 in [max(0, c+q-1), min(c, q)] and
    the linear constraints tying the other cells to the margins.
    """
    c = observed if arm == 1 else counterfactual  # Pr(R2(1) = 1 | D = arm)
    q = counterfactual if arm == 1 else observed  # Pr(R2(0) = 1 | D = arm)
    lo11 = max(0.0, c + q - 1.0)
    hi11 = min(c, q)
    return _pi_dict(
        {
            (1, 1): Interval(lo11, hi11),
            (1, 0): Interval(c - hi11, c - lo11),
            (0, 1): Interval(q - hi11, q - lo11),
            (0, 0): Interval(max(0.0, 1.0 - c - q), min(1.0 - c, 1.0 - q)),
        }
    )


def strata_proportions_bounds(rates: RateTable) -> StrataProportions:
    """Bound strata shares without monotonicity.

    Parallel trends of missingness (plus equal response effect across arms)
    identifies the counterfactual response rates
    Pr(R2(0)=1|D=1) = p_r2[0] - p_r1[0] + p_r1[1] and
    Pr(R2(1)=1|D=0) = p_r2[1] - p_r1[1] + p_r1[0] (clipped into [0,1] with
    diagnostics); each arm's strata cells are then Fréchet intervals from its
    observed and counterfactual margins.
    """
    events: list[ClipEvent] = []
    p_r1, p_r2 = rates.p_r1, rates.p_r2

    a1 = clip01(p_r2[0] - p_r1[0] + p_r1[1], "Pr(R2(0)=1|D=1)", events)
    a0 = clip01(p_r2[1] - p_r1[1] + p_r1[0], "Pr(R2(1)=1|D=0)", events)

    treated = _frechet_cells(observed=p_r2[1], counterfactual=a1, arm=1)
    control = _frechet_cells(observed=p_r2[0], counterfactual=a0, arm=0)

    flags = (INCONSISTENT_FLAG,) if events else ()
    return StrataProportions(
        pi=(control, treated), mode="no-monotone", clip_events=tuple(events), flags=flags
    )


def trimmed_mean(
    values: Sequence[float] | np.ndarray,
    keep: float,
    side: Literal["bottom", "top"],
) -> float:
    """Fractionally trimmed mean: average of the most extreme ``keep`` share.

    Sort ascending (stable); the bottom-p trimmed mean retains the lowest
    floor(p*n) values fully and the next value with fractional weight
    p*n - floor(p*n), then takes the weighted mean. side="top" mirrors from
    above. keep = 1 returns the plain mean exactly (same floating-point
    result as numpy.mean on the unsorted input).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        v = v.ravel()
    if v.size == 0:
        raise InputError("trimmed_mean requires nonempty values")
    if not 0.0 < keep <= 1.0:
        raise InputError(f"keep fraction must be in (0, 1], got {keep}")
    if side not in ("bottom", "top"):
        raise InputError(f"side must be 'bottom' or 'top', got {side!r}")
    if keep == 1.0:
        return float(v.mean())
    v = np.sort(v, kind="stable")
    if side == "top":
        v = v[::-1]
    t = keep * v.size
    k = int(np.floor(t))
    frac = t - k
    total = float(v[:k].sum())
    if frac > 0.0 and k < v.size:
        total += frac * float(v[k])
    return total / t


@dataclass(frozen=True)
class BoundResult:
    """Partial-identification interval [lb, ub] for a named estimand.

    trim_share[d] is the fraction of arm-d respondents retained by the
    trimming step; an arm that fell back to declared-support bounds reports
    1.0 here (no trimming was performed) together with support_fallback and a
    recorded event carrying the raw infeasible share.
    """

    estimand: str
    lb: float
    ub: float
    trim_share: tuple[float, float]
    assumptions_used: tuple[str, ...]
    support_fallback: bool = False
    proportions: StrataProportions | None = None
    clip_events: tuple[ClipEvent, ...] = ()
    flags: tuple[str, ...] = ()
    n_used: int = 0

    def __post_init__(self) -> None:
        if self.lb > self.ub:
            raise ValueError(f"bounds out of order: [{self.lb}, {self.ub}]")
        for d in (0, 1):
            if not 0.0 < self.trim_share[d] <= 1.0:
                raise ValueError(f"trim_share[{d}] = {self.trim_share[d]} outside (0, 1]")

    @property
    def interval(self) -> Interval:
        return Interval(self.lb, self.ub)


_MONOTONE_ASSUMPTIONS = (
    "response monotonicity",
    "parallel trends of missingness",
    "always-respondent parallel trends",
)
_NO_MONOTONE_ASSUMPTIONS = (
    "parallel trends of missingness",
    "equal response effect across arms",
    "always-respondent parallel trends",
)


def att_ar_bounds(data: PanelDataset, mode: Mode = "monotone") -> BoundResult:
    """Trimming bounds for the ATT among always-respondents.

    Per arm d, the always-respondents are a keep share
    p_d = pi_11(d) / Pr(R2=1|D=d) of complete cases, so their mean outcome
    change lies between the bottom-p_d and top-p_d trimmed means of the
    arm's complete-case Y2-Y1 values; the estimand interval is
    [LB_1 - UB_0, UB_1 - LB_0]. Monotone mode has p_0 = 1 exactly (the
    control side collapses to its plain mean). No-monotone mode evaluates
    p_d at the lower endpoint of the pi_11(d) interval — the smallest keep
    share, hence the widest (conservative) bounds.

    If an arm's keep share is not positive, trimming cannot bracket the
    stratum mean; the arm then contributes the worst-case interval from the
    declared outcome support, the result is flagged support_fallback, and the
    assembled bounds are intersected with the estimand's logical range
    (a difference of two means on the same support). Without declared support
    this raises an error.
    """
    if mode not in ("monotone", "no-monotone"):
        raise InputError(f"mode must be 'monotone' or 'no-monotone', got {mode!r}")
    deltas = {}
    for d in (0, 1):
        mask = (data.d == d) & data.complete_case
        if not mask.any():
            raise EstimatorError(f"no complete cases in arm {d}")
        deltas[d] = data.y2[mask] - data.y1[mask]

    rates = compute_rates(data)
    props = (
        strata_proportions_monotone(rates)
        if mode == "monotone"
        else strata_proportions_bounds(rates)
    )
    events: list[ClipEvent] = list(props.clip_events)

    lower: dict[int, float] = {}
    upper: dict[int, float] = {}
    shares: dict[int, float] = {}
    fallback = False
    for d in (0, 1):
        pi11 = props.pi[d][(1, 1)].lo  # lower endpoint; degenerate in monotone mode
        rate = rates.p_r2[d]
        share = pi11 / rate if rate > 0.0 else 0.0
        if share > 1.0:
            events.append(ClipEvent(f"trim share arm {d}", raw=share, clipped=1.0))
            share = 1.0
        if share <= 0.0:
            if data.outcome_support is None:
                raise EstimatorError("trimming infeasible and no outcome support declared")
            y_min, y_max = data.outcome_support
            events.append(
                ClipEvent(f"trim share arm {d} (support fallback)", raw=share, clipped=1.0)
            )
            lower[d] = y_min - y_max
            upper[d] = y_max - y_min
            shares[d] = 1.0
            fallback = True
            continue
        lower[d] = trimmed_mean(deltas[d], share, "bottom")
        upper[d] = trimmed_mean(deltas[d], share, "top")
        shares[d] = share

    lb = lower[1] - upper[0]
    ub = upper[1] - lower[0]
    flags = list(props.flags)
    if fallback:
        width = data.outcome_support[1] - data.outcome_support[0]  # type: ignore[index]
        clipped_lb, clipped_ub = max(lb, -width), min(ub, width)
        if (clipped_lb, clipped_ub) != (lb, ub):
            flags.append("bounds intersected with estimand range")
        lb, ub = clipped_lb, clipped_ub

    return BoundResult(
        estimand="ATT-AR",
        lb=float(lb),
        ub=float(ub),
        trim_share=(shares[0], shares[1]),
        assumptions_used=_MONOTONE_ASSUMPTIONS if mode == "monotone" else _NO_MONOTONE_ASSUMPTIONS,
        support_fallback=fallback,
        proportions=props,
        clip_events=tuple(events),
        flags=tuple(flags),
        n_used=int(deltas[0].size + deltas[1].size),
    )


@dataclass(frozen=True)
class BoundsBootstrap:
    """Bootstrap summary for an interval estimand.

    LB and UB are resampled marginally (each replicate re-runs the full
    proportions + trimming pipeline); outer is the conservative envelope
    [percentile-lo of LB, percentile-hi of UB]. This marginal treatment is a
    methodological choice for interval estimands, not a derived property.
    """

    point: BoundResult
    lb_ci: Interval
    ub_ci: Interval
    outer: Interval
    se_lb: float
    se_ub: float
    level: float
    replicates_used: int
    replicates_failed: int


def bootstrap_bounds(
    data: PanelDataset,
    mode: Mode,
    cfg: BootstrapConfig,
) -> BoundsBootstrap:
    """Percentile bootstrap of att_ar_bounds by unit-level resampling.

    Deterministic given cfg.seed (each replicate uses the (seed, index)
    stream); failed replicates are dropped and counted, and propagate only if
    more than half fail.
    """
    point = att_ar_bounds(data, mode)
    n = len(data)
    lbs: list[float] = []
    ubs: list[float] = []
    failures: list[DidMissError] = []
    for rep in range(cfg.replicates):
        rng = np.random.default_rng((cfg.seed, rep))
        idx = rng.integers(0, n, size=n)
        try:
            b = att_ar_bounds(data._take(idx), mode)
        except DidMissError as exc:
            failures.append(exc)
            continue
        lbs.append(b.lb)
        ubs.append(b.ub)
    if len(failures) * 2 > cfg.replicates:
        raise EstimatorError(
            f"{len(failures)}/{cfg.replicates} bootstrap replicates failed; "
            f"last error: {failures[-1]}"
        ) from failures[-1]

    lb_arr = np.asarray(lbs, dtype=np.float64)
    ub_arr = np.asarray(ubs, dtype=np.float64)
    alpha = (1.0 - cfg.level) / 2.0
    qs = [100 * alpha, 100 * (1 - alpha)]
    lb_lo, lb_hi = (float(v) for v in np.percentile(lb_arr, qs))
    ub_lo, ub_hi = (float(v) for v in np.percentile(ub_arr, qs))
    return BoundsBootstrap(
        point=point,
        lb_ci=Interval(lb_lo, lb_hi),
        ub_ci=Interval(ub_lo, ub_hi),
        outer=Interval(min(lb_lo, ub_lo), max(ub_hi, lb_hi)),
        se_lb=float(lb_arr.std(ddof=1)) if lb_arr.size >= 2 else 0.0,
        se_ub=float(ub_arr.std(ddof=1)) if ub_arr.size >= 2 else 0.0,
        level=cfg.level,
        replicates_used=int(lb_arr.size),
        replicates_failed=len(failures),
    )
