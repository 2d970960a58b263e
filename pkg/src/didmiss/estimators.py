"""Complete-case DID, the full-data DID baseline, and the bootstrap.

The complete-case estimator contrasts mean outcome changes across arms among
units with both waves observed:

    ATT_cc = mean(Y2 - Y1 | D = 1, R1 = R2 = 1) - mean(Y2 - Y1 | D = 0, R1 = R2 = 1)

It is unbiased when both the untreated outcome trend and the observed-case
trend are parallel across arms; under outcome-dependent missingness it is
not, which is what the IV corrections, trimming bounds, and principal-score
weighting in the sibling modules are for.

Bootstrap inference resamples units with replacement. Each replicate draws
its random stream from (seed, replicate index), so results are bit-identical
for a given seed regardless of the execution schedule or thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .common import Interval
from .errors import DidMissError, EstimatorError, InputError
from .panel import PanelDataset

__all__ = [
    "Estimate",
    "BootstrapConfig",
    "did_complete_case",
    "naive_did_all",
    "bootstrap_ci",
    "ESTIMATOR_HANDLES",
]

#: Named estimator handles shared with the CLI. "att-ar-bounds" is listed for
#: discoverability but is interval-valued: bootstrap_ci refuses it and points
#: at bounds.bootstrap_bounds instead.
ESTIMATOR_HANDLES = ("cc-did", "iv", "att-ar-bounds", "pi")


@dataclass(frozen=True)
class Estimate:
    """A scalar estimate with optional uncertainty.

    notes carry machine-readable diagnostics ("ci_widened",
    "replicates_failed=3", estimand qualifiers) without disturbing the numeric
    fields.
    """

    point: float
    n_used: int
    se: float | None = None
    ci: Interval | None = None
    ci_level: float | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.se is not None and self.se < 0:
            raise ValueError(f"se must be nonnegative, got {self.se}")
        if self.ci is not None:
            if self.ci_level is None or not 0.0 < self.ci_level < 1.0:
                raise ValueError("ci requires ci_level in (0, 1)")
            if not self.ci.contains(self.point):
                raise ValueError(
                    f"ci [{self.ci.lo}, {self.ci.hi}] does not contain point {self.point}"
                )


@dataclass(frozen=True)
class BootstrapConfig:
    """Unit-resampling bootstrap settings."""

    replicates: int
    seed: int
    level: float = 0.95

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise InputError(f"replicates must be >= 1, got {self.replicates}")
        if not 0.0 < self.level < 1.0:
            raise InputError(f"level must be in (0, 1), got {self.level}")


def _arm_cc_delta(data: PanelDataset, d: int) -> np.ndarray:
    mask = (data.d == d) & data.complete_case
    if not mask.any():
        raise EstimatorError(f"no complete cases in arm {d}")
    return data.y2[mask] - data.y1[mask]


def did_complete_case(data: PanelDataset) -> Estimate:
    """Complete-case difference-in-differences.

    point = mean(Y2-Y1 over treated complete cases)
          - mean(Y2-Y1 over control complete cases);
    n_used counts the complete cases that entered either mean.
    """
    delta1 = _arm_cc_delta(data, 1)
    delta0 = _arm_cc_delta(data, 0)
    return Estimate(
        point=float(delta1.mean() - delta0.mean()),
        n_used=delta1.size + delta0.size,
    )


def naive_did_all(data: PanelDataset) -> Estimate:
    """Full-sample DID of means; requires a dataset without missing outcomes.

    This is the infeasible benchmark: computable only when every outcome is
    observed (oracle-generated data, or the no-missingness baseline).
    """
    if not data.complete_case.all():
        raise EstimatorError("dataset contains missing outcomes")
    for d in (0, 1):
        if not (data.d == d).any():
            raise EstimatorError(f"no units in arm {d}")
    dy = data.y2 - data.y1
    point = float(dy[data.d == 1].mean() - dy[data.d == 0].mean())
    return Estimate(point=point, n_used=len(data))


Estimator = Callable[[PanelDataset], Estimate]


def _resolve_estimator(estimator: Union[str, Estimator]) -> Estimator:
    if callable(estimator):
        return estimator
    if estimator == "cc-did":
        return did_complete_case
    if estimator == "iv":
        from .iv import att_iv

        return lambda d: att_iv(d, aux_index=0)[0]
    if estimator == "pi":
        from .principal import att_principal_ignorability

        return att_principal_ignorability
    if estimator == "att-ar-bounds":
        raise InputError(
            "att-ar-bounds is interval-valued; use bounds.bootstrap_bounds, "
            "which bootstraps LB and UB separately"
        )
    raise InputError(
        f"unknown estimator handle {estimator!r}; expected one of {ESTIMATOR_HANDLES}"
    )


def _n_threads() -> int:
    raw = os.environ.get("DIDMISS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def bootstrap_ci(
    data: PanelDataset,
    estimator: Union[str, Estimator],
    cfg: BootstrapConfig,
) -> Estimate:
    """Percentile-bootstrap CI by unit-level resampling with replacement.

    The returned Estimate carries the full-sample point, the replicate
    standard deviation as se, and the percentile interval at cfg.level,
    minimally widened to contain the point if a pathological resample run
    left it outside (noted as "ci_widened"). Replicates whose estimator run
    fails are dropped and counted; if more than half fail, the last estimator
    error propagates.
    """
    fn = _resolve_estimator(estimator)
    full = fn(data)
    if not isinstance(full, Estimate):
        raise InputError(
            "bootstrap_ci requires a scalar estimator returning Estimate; "
            "interval estimands are handled by bounds.bootstrap_bounds"
        )
    n = len(data)

    def one_replicate(rep: int) -> tuple[float, None] | tuple[None, DidMissError]:
        rng = np.random.default_rng((cfg.seed, rep))
        idx = rng.integers(0, n, size=n)
        try:
            return float(fn(data._take(idx)).point), None
        except DidMissError as exc:
            return None, exc

    threads = _n_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_replicate, range(cfg.replicates)))
    else:
        results = [one_replicate(rep) for rep in range(cfg.replicates)]

    points = np.array([p for p, _ in results if p is not None], dtype=np.float64)
    failures = [e for _, e in results if e is not None]
    if len(failures) * 2 > cfg.replicates:
        raise EstimatorError(
            f"{len(failures)}/{cfg.replicates} bootstrap replicates failed; "
            f"last error: {failures[-1]}"
        ) from failures[-1]

    se = float(points.std(ddof=1)) if points.size >= 2 else 0.0
    alpha = (1.0 - cfg.level) / 2.0
    lo, hi = (float(v) for v in np.percentile(points, [100 * alpha, 100 * (1 - alpha)]))
    notes: list[str] = list(full.notes)
    if failures:
        notes.append(f"replicates_failed={len(failures)}")
    if not lo <= full.point <= hi:
        lo, hi = min(lo, full.point), max(hi, full.point)
        notes.append("ci_widened")
    return Estimate(
        point=full.point,
        n_used=full.n_used,
        se=se,
        ci=Interval(lo, hi),
        ci_level=cfg.level,
        notes=tuple(notes),
    )
