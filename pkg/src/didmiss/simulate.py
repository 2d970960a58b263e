"""Synthetic two-period panels with latent response strata and ground truth.

Each simulated unit carries a latent stratum ``S = (R2(treated), R2(control))``
— the pair of potential second-period response indicators — together with
both potential outcomes.  The observable :class:`~didmiss.panel.PanelDataset`
is produced by masking: the realized arm selects which potential outcome and
response are visible.  The oracle side (latent strata, both potentials) is
returned alongside, so every estimator in the package can be validated
against exact finite-sample truth.

Strata are labelled ``AR`` (always-respondents, ``(1, 1)``), ``ITR``
(if-treated respondents, ``(1, 0)``), ``ICR`` (if-control respondents,
``(0, 1)``) and ``NR`` (never-respondents, ``(0, 0)``).

A :class:`DgpSpec` fixes the joint stratum/treatment table, per-stratum
trends and effects, noise, first-wave response behaviour, auxiliary
indicator generators and an optional discrete cell layer
(``covariate_model``) that modulates strata probabilities and trends —
either latently (instrument constructions) or exposed as a covariate
column.  Stratum trends are shared across arms by construction; arm-specific
deviations must be requested explicitly (``arm_trend_delta`` or per-arm cell
trend shifts) so violations are opt-in and visible in the DgpSpec.

:func:`make_preset` returns ready-made generating processes whose documented
properties (planted complete-case bias, instrument validity, bound coverage
margins, …) are re-verified analytically every time they are built.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.optimize import root

from .errors import EstimatorError, InputError
from .panel import PanelDataset, _as_text

__all__ = [
    "AttDecomposition",
    "AuxModel",
    "Cell",
    "DgpSpec",
    "OraclePanel",
    "OracleRecord",
    "OracleTruth",
    "PRESET_KINDS",
    "R1Model",
    "STRATUM_LABELS",
    "STRATUM_PAIRS",
    "TrendMixtureReport",
    "check_trend_mixture",
    "decompose_att",
    "load_oracle",
    "make_preset",
    "save_oracle",
    "simulate_panel",
    "strip_missingness",
]

#: Stratum order used everywhere: always-, if-treated-, if-control-,
#: never-respondents.
STRATUM_LABELS = ("AR", "ITR", "ICR", "NR")

#: ``(R2(treated), R2(control))`` pair for each stratum, same order.
STRATUM_PAIRS = ((1, 1), (1, 0), (0, 1), (0, 0))

PRESET_KINDS = (
    "zero-bias",
    "homogeneous-bias",
    "multi-iv",
    "pi",
    "mnar-baseline",
    "monotone",
    "no-monotone",
)

_AR, _ITR, _ICR, _NR = range(4)


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class R1Model:
    """First-wave response behaviour.

    ``kind = "always-observed"`` records every first-period outcome;
    ``kind = "mcar"`` drops each independently with probability
    ``1 - rate``, independent of everything else in the draw.
    """

    kind: str = "always-observed"
    rate: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("always-observed", "mcar"):
            raise InputError(
                f"unknown first-wave response model {self.kind!r}; "
                "expected 'always-observed' or 'mcar'"
            )
        if not 0.0 < self.rate <= 1.0:
            raise InputError(f"first-wave response rate must be in (0, 1], got {self.rate!r}")


@dataclass(frozen=True)
class AuxModel:
    """Generator for one auxiliary binary indicator column.

    ``kind = "independent"`` draws a Bernoulli(``p``) coin independent of
    everything else.  ``kind = "pattern"`` reads the value from the unit's
    cell (``Cell.aux_pattern``), letting instruments drive response through
    the cell layer.
    """

    kind: str = "independent"
    p: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("independent", "pattern"):
            raise InputError(
                f"unknown auxiliary model {self.kind!r}; expected 'independent' or 'pattern'"
            )
        if not 0.0 <= self.p <= 1.0:
            raise InputError(f"auxiliary indicator probability must be in [0, 1], got {self.p!r}")


@dataclass(frozen=True)
class Cell:
    """One discrete cell of the optional covariate / latent-group layer.

    Attributes
    ----------
    label : str
        Human-readable tag used in diagnostics.
    share : tuple of float
        ``Pr(cell | D = d)`` as ``(control, treated)``; shares sum to one
        within each arm across cells.
    strata : tuple
        Two 4-tuples ``Pr(S = s | cell, D = d)`` (control first), ordered
        like :data:`STRATUM_LABELS`.
    trend_shift : tuple of float
        Additive shift of the stratum trend for units in this cell, per arm
        ``(control, treated)``; unequal entries are an explicit, opt-in
        departure from shared trends.
    effect_shift : float
        Additive shift of the stratum treatment effect.
    baseline_shift : tuple of float
        Additive shift of the first-period mean, per arm.
    x_label : int or None
        When set, the cell is exported as this value in the dataset's
        covariate column; when None the cell stays latent.  All cells of a
        spec must agree on whether ``x_label`` is set.
    aux_pattern : tuple of int or None
        Values of the ``"pattern"``-kind auxiliary indicators for units in
        this cell, in the order those models appear in ``aux_models``.
    """

    label: str
    share: tuple[float, float]
    strata: tuple[tuple[float, float, float, float], tuple[float, float, float, float]]
    trend_shift: tuple[float, float] = (0.0, 0.0)
    effect_shift: float = 0.0
    baseline_shift: tuple[float, float] = (0.0, 0.0)
    x_label: int | None = None
    aux_pattern: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.share) != 2 or any(s < 0 for s in self.share):
            raise InputError(f"cell {self.label!r}: share must be two nonnegative numbers")
        if len(self.strata) != 2:
            raise InputError(f"cell {self.label!r}: strata must hold one row per arm")
        for arm, row in enumerate(self.strata):
            if len(row) != 4 or any(p < 0 for p in row):
                raise InputError(
                    f"cell {self.label!r}: strata row for arm {arm} must be four "
                    "nonnegative probabilities"
                )
            if abs(sum(row) - 1.0) > 1e-9:
                raise InputError(
                    f"cell {self.label!r}: strata probabilities for arm {arm} sum to "
                    f"{sum(row)!r}, expected 1"
                )


@dataclass(frozen=True)
class DgpSpec:
    """Complete description of one synthetic panel-generating process.

    Attributes
    ----------
    n : int
        Number of units.
    seed : int
        Seed of the single pseudo-random stream; same spec and seed give
        bit-identical output.
    joint_sd : tuple
        Two 4-tuples ``Pr(S = s, D = d)`` (control arm first), ordered like
        :data:`STRATUM_LABELS`; the eight entries sum to one.  When a cell
        layer is present this table must equal the aggregated cell
        probabilities — it is validated, not inferred.
    trend : tuple of float
        ``E[Y2(0) - Y1 | S = s]``, shared across arms.
    baseline : tuple
        Four pairs ``E[Y1 | S = s, D = d]`` as ``(control, treated)``.
    effect : tuple of float
        Treatment effect added to ``Y2(1)`` for stratum ``s``.
    noise_sd : float
        Standard deviation of the independent Gaussian noise added to each
        period's outcome.
    r1_model : R1Model
        First-wave response behaviour.
    aux_models : tuple of AuxModel
        Generators for the auxiliary indicator columns, in column order.
    covariate_model : tuple of Cell
        Optional discrete-cell layer; empty means a single implicit cell
        with stratum probabilities taken from ``joint_sd``.
    arm_trend_delta : tuple of float
        Per-stratum trend added only in the treated arm — zero by default;
        nonzero values are a labelled violation of shared trends.
    """

    n: int
    seed: int
    joint_sd: tuple[tuple[float, float, float, float], tuple[float, float, float, float]]
    trend: tuple[float, float, float, float]
    baseline: tuple[tuple[float, float], ...]
    effect: tuple[float, float, float, float]
    noise_sd: float
    r1_model: R1Model = R1Model()
    aux_models: tuple[AuxModel, ...] = ()
    covariate_model: tuple[Cell, ...] = ()
    arm_trend_delta: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    # -- validation -------------------------------------------------------

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InputError(f"sample size must be at least 1, got {self.n!r}")
        if self.noise_sd < 0:
            raise InputError(f"noise scale must be nonnegative, got {self.noise_sd!r}")
        if len(self.joint_sd) != 2 or any(len(row) != 4 for row in self.joint_sd):
            raise InputError("joint_sd must hold two 4-entry rows (control, treated)")
        flat = [p for row in self.joint_sd for p in row]
        if any(p < -1e-12 for p in flat):
            raise InputError("joint_sd entries must be nonnegative")
        if abs(sum(flat) - 1.0) > 1e-9:
            raise InputError(f"joint_sd sums to {sum(flat)!r}, expected 1")
        for name, row in (("trend", self.trend), ("effect", self.effect),
                          ("arm_trend_delta", self.arm_trend_delta)):
            if len(row) != 4:
                raise InputError(f"{name} must have one entry per stratum, got {len(row)}")
        if len(self.baseline) != 4 or any(len(pair) != 2 for pair in self.baseline):
            raise InputError("baseline must hold four (control, treated) pairs")
        for arm in (0, 1):
            if self.arm_share(arm) <= 0:
                raise InputError(f"arm {arm} has zero probability in joint_sd")
        self._validate_cells()

    def _validate_cells(self) -> None:
        cells = self.covariate_model
        n_pattern = sum(1 for m in self.aux_models if m.kind == "pattern")
        if not cells:
            if n_pattern:
                raise InputError(
                    "pattern auxiliary models require a covariate_model cell layer"
                )
            return
        labelled = [c.x_label is not None for c in cells]
        if any(labelled) and not all(labelled):
            raise InputError("either every cell or no cell may set x_label")
        for arm in (0, 1):
            total = sum(c.share[arm] for c in cells)
            if abs(total - 1.0) > 1e-9:
                raise InputError(f"cell shares for arm {arm} sum to {total!r}, expected 1")
        for c in cells:
            got = 0 if c.aux_pattern is None else len(c.aux_pattern)
            if got != n_pattern:
                raise InputError(
                    f"cell {c.label!r} carries {got} pattern values for "
                    f"{n_pattern} pattern auxiliary models"
                )
        for arm in (0, 1):
            p_arm = self.arm_share(arm)
            for s in range(4):
                implied = p_arm * sum(c.share[arm] * c.strata[arm][s] for c in cells)
                if abs(implied - self.joint_sd[arm][s]) > 1e-9:
                    raise InputError(
                        "joint_sd is inconsistent with the cell layer: "
                        f"Pr(S={STRATUM_LABELS[s]}, D={arm}) aggregates to {implied!r} "
                        f"but joint_sd says {self.joint_sd[arm][s]!r}"
                    )

    # -- derived views ----------------------------------------------------

    def arm_share(self, d: int) -> float:
        """``Pr(D = d)``."""
        return float(sum(self.joint_sd[d]))

    def pi(self, d: int) -> tuple[float, float, float, float]:
        """``Pr(S = s | D = d)`` in :data:`STRATUM_LABELS` order."""
        p = self.arm_share(d)
        return tuple(v / p for v in self.joint_sd[d])

    def cells(self) -> tuple[Cell, ...]:
        """The cell layer, or a single implicit cell built from ``joint_sd``."""
        if self.covariate_model:
            return self.covariate_model
        return (
            Cell(
                label="all",
                share=(1.0, 1.0),
                strata=(self.pi(0), self.pi(1)),
            ),
        )


# ---------------------------------------------------------------------------
# oracle types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleRecord:
    """One unit with its latent stratum and both potential outcomes.

    The observable fields (``y1``, ``y2``, ``r1``, ``r2``) replicate the
    unit's :class:`~didmiss.panel.PanelRecord` view; ``y1_true`` keeps the
    first-period outcome even when survey response hides it.  Consistency
    between the observable view and the latent fields is asserted on
    construction.
    """

    unit_id: str
    d: int
    y1: float | None
    y2: float | None
    aux: tuple[int, ...]
    x: tuple[int, ...] | None
    s: str
    y1_true: float
    y2_1: float
    y2_0: float
    r1: int
    r2: int
    r2_1: int
    r2_0: int

    def __post_init__(self) -> None:
        if self.s not in STRATUM_LABELS:
            raise ValueError(f"unknown stratum label {self.s!r}")
        pair = STRATUM_PAIRS[STRATUM_LABELS.index(self.s)]
        if (self.r2_1, self.r2_0) != pair:
            raise ValueError(
                f"stratum {self.s} implies potential responses {pair}, "
                f"got ({self.r2_1}, {self.r2_0})"
            )
        realized = self.r2_1 if self.d == 1 else self.r2_0
        if self.r2 != realized:
            raise ValueError(f"observed r2={self.r2} but potential response is {realized}")
        expected_y2 = (self.y2_1 if self.d == 1 else self.y2_0) if self.r2 else None
        if (self.y2 is None) != (expected_y2 is None) or (
            self.y2 is not None and self.y2 != expected_y2
        ):
            raise ValueError("observed y2 does not equal the selected potential outcome")
        if self.r1:
            if self.y1 != self.y1_true:
                raise ValueError("observed y1 does not equal the latent first-period outcome")
        elif self.y1 is not None:
            raise ValueError("y1 must be None when r1 = 0")


class OraclePanel:
    """Column-oriented oracle view of one simulated panel.

    Behaves as a read-only sequence of :class:`OracleRecord`; the heavy
    per-record objects are only materialized on access.  All latent arrays
    (stratum codes, both potential outcomes and responses, the unmasked
    first-period outcome) are exposed directly for vectorized checks.
    """

    __slots__ = ("d", "y1_true", "y2_1", "y2_0", "s", "r1", "r2_1", "r2_0", "aux", "x", "_records")

    def __init__(
        self,
        d: np.ndarray,
        y1_true: np.ndarray,
        y2_1: np.ndarray,
        y2_0: np.ndarray,
        s: np.ndarray,
        r1: np.ndarray,
        r2_1: np.ndarray,
        r2_0: np.ndarray,
        aux: np.ndarray,
        x: np.ndarray | None,
    ) -> None:
        self.d = d
        self.y1_true = y1_true
        self.y2_1 = y2_1
        self.y2_0 = y2_0
        self.s = s
        self.r1 = r1
        self.r2_1 = r2_1
        self.r2_0 = r2_0
        self.aux = aux
        self.x = x
        self._records: tuple[OracleRecord, ...] | None = None
        for arr in (d, y1_true, y2_1, y2_0, s, r1, r2_1, r2_0, aux):
            arr.setflags(write=False)
        if x is not None:
            x.setflags(write=False)

    @property
    def r2(self) -> np.ndarray:
        """Realized second-period response."""
        return np.where(self.d == 1, self.r2_1, self.r2_0)

    @property
    def y2(self) -> np.ndarray:
        """Realized second-period outcome, NaN where unobserved."""
        realized = np.where(self.d == 1, self.y2_1, self.y2_0)
        return np.where(self.r2.astype(bool), realized, np.nan)

    def __len__(self) -> int:
        return int(self.d.shape[0])

    def _record(self, i: int) -> OracleRecord:
        r1 = int(self.r1[i])
        d = int(self.d[i])
        r2 = int(self.r2_1[i] if d == 1 else self.r2_0[i])
        y2 = (self.y2_1[i] if d == 1 else self.y2_0[i]) if r2 else None
        return OracleRecord(
            unit_id=str(i + 1),
            d=d,
            y1=float(self.y1_true[i]) if r1 else None,
            y2=float(y2) if r2 else None,
            aux=tuple(int(v) for v in self.aux[i]),
            x=None if self.x is None else tuple(int(v) for v in self.x[i]),
            s=STRATUM_LABELS[int(self.s[i])],
            y1_true=float(self.y1_true[i]),
            y2_1=float(self.y2_1[i]),
            y2_0=float(self.y2_0[i]),
            r1=r1,
            r2=r2,
            r2_1=int(self.r2_1[i]),
            r2_0=int(self.r2_0[i]),
        )

    def __getitem__(self, i: int) -> OracleRecord:
        if not isinstance(i, (int, np.integer)):
            raise TypeError("oracle panels support integer indexing only")
        n = len(self)
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError(f"record index {i} out of range for {n} units")
        return self._record(int(i))

    def __iter__(self):
        return iter(self.records)

    @property
    def records(self) -> tuple[OracleRecord, ...]:
        if self._records is None:
            self._records = tuple(self._record(i) for i in range(len(self)))
        return self._records


@dataclass(frozen=True)
class OracleTruth:
    """Ground truth implied by one simulated panel.

    ``att`` and ``att_ar`` are computed from the generated latent records,
    so they are exact for the sample at hand; the ``*_population`` fields
    and ``cc_bias`` come from closed-form algebra over the DgpSpec's cell and
    stratum tables.

    Attributes
    ----------
    att : float
        Sample mean of ``Y2(1) - Y2(0)`` over treated units.
    att_ar : float
        Same, restricted to treated always-respondents (NaN when none).
    pi_table : tuple of mapping
        Exact ``Pr(S = s | D = d)`` per arm (control first), keyed by the
        ``(r_treated, r_control)`` stratum pair.
    cc_bias : float
        Population complete-case DID minus the population ATT.
    att_population, att_ar_population, cc_population : float
        The corresponding closed-form population values.
    """

    att: float
    att_ar: float
    pi_table: tuple[Mapping[tuple[int, int], float], Mapping[tuple[int, int], float]]
    cc_bias: float
    att_population: float
    att_ar_population: float
    cc_population: float


# ---------------------------------------------------------------------------
# population algebra (shared by the oracle truth and the preset verifiers)
# ---------------------------------------------------------------------------


def _observed_in_arm(s: int, d: int) -> bool:
    """Whether stratum ``s`` responds in period 2 when assigned arm ``d``."""
    return STRATUM_PAIRS[s][0 if d == 1 else 1] == 1


def _cell_tables(spec: DgpSpec):
    """Weights and conditional change means over (cell, stratum, arm).

    Returns ``(cells, weight, mu, effect_term)`` where ``weight[d][c][s]``
    is ``Pr(cell, S = s | D = d)``, ``mu[d][c][s]`` is
    ``E[Y2 - Y1 | cell, S = s, D = d]`` for the realized arm, and
    ``effect_term[c][s]`` the treatment effect for that cell and stratum.
    """
    cells = spec.cells()
    weight = [[[0.0] * 4 for _ in cells] for _ in (0, 1)]
    mu = [[[0.0] * 4 for _ in cells] for _ in (0, 1)]
    effect_term = [[0.0] * 4 for _ in cells]
    for ci, cell in enumerate(cells):
        for s in range(4):
            effect_term[ci][s] = spec.effect[s] + cell.effect_shift
            for d in (0, 1):
                weight[d][ci][s] = cell.share[d] * cell.strata[d][s]
                trend = spec.trend[s] + cell.trend_shift[d]
                if d == 1:
                    trend += spec.arm_trend_delta[s]
                mu[d][ci][s] = trend + (effect_term[ci][s] if d == 1 else 0.0)
    return cells, weight, mu, effect_term


@dataclass(frozen=True)
class _Population:
    att: float
    att_ar: float
    cc: float
    cc_bias: float


def _population(spec: DgpSpec) -> _Population:
    """Closed-form population ATT, always-respondent ATT and complete-case DID."""
    cells, weight, mu, effect_term = _cell_tables(spec)
    att = 0.0
    ar_num = ar_den = 0.0
    cc_value = [math.nan, math.nan]
    for d in (0, 1):
        num = den = 0.0
        for ci in range(len(cells)):
            for s in range(4):
                w = weight[d][ci][s]
                if d == 1:
                    att += w * effect_term[ci][s]
                    if s == _AR:
                        ar_num += w * effect_term[ci][s]
                        ar_den += w
                if _observed_in_arm(s, d):
                    num += w * mu[d][ci][s]
                    den += w
        if den > 0:
            cc_value[d] = num / den
    cc = cc_value[1] - cc_value[0]
    att_ar = ar_num / ar_den if ar_den > 0 else math.nan
    return _Population(att=att, att_ar=att_ar, cc=cc, cc_bias=cc - att)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def simulate_panel(spec: DgpSpec) -> tuple[PanelDataset, OraclePanel, OracleTruth]:
    """Generate one panel plus its oracle and ground truth.

    Draws, in order, from a single generator seeded with ``spec.seed``:
    treatment arm, cell, stratum, first-period noise, second-period noise,
    first-wave response (only under the ``mcar`` model), then each
    ``independent`` auxiliary indicator in declaration order.  Outcomes
    follow ``Y1 = baseline + noise``, ``Y2(0) = Y1 + trend + noise`` and
    ``Y2(1) = Y2(0) + effect``; the observable dataset masks ``Y1``/``Y2``
    by the realized response indicators.

    Parameters
    ----------
    spec : DgpSpec

    Returns
    -------
    (PanelDataset, OraclePanel, OracleTruth)
        The masked observable panel, the latent per-unit oracle (a sequence
        of :class:`OracleRecord`), and the implied ground truth.

    Notes
    -----
    Deterministic: the same spec produces bit-identical arrays.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    cells = spec.cells()
    n_cells = len(cells)

    d = (rng.random(n) < spec.arm_share(1)).astype(np.int8)
    d_idx = d.astype(np.intp)

    shares = np.array([[c.share[arm] for c in cells] for arm in (0, 1)], dtype=np.float64)
    cum_shares = np.cumsum(shares, axis=1)
    u_cell = rng.random(n)
    cell_idx = np.empty(n, dtype=np.intp)
    for arm in (0, 1):
        mask = d == arm
        cell_idx[mask] = np.searchsorted(cum_shares[arm], u_cell[mask], side="right")
    np.minimum(cell_idx, n_cells - 1, out=cell_idx)

    strata = np.array([[c.strata[arm] for arm in (0, 1)] for c in cells], dtype=np.float64)
    cum_strata = np.cumsum(strata, axis=2)
    u_strat = rng.random(n)
    s = (u_strat[:, None] >= cum_strata[cell_idx, d_idx]).sum(axis=1)
    s = np.minimum(s, 3).astype(np.int8)
    s_idx = s.astype(np.intp)

    eps1 = rng.normal(0.0, spec.noise_sd, n)
    eps2 = rng.normal(0.0, spec.noise_sd, n)

    base = np.array(spec.baseline, dtype=np.float64)  # (4, 2) indexed [s][d]
    base_shift = np.array([c.baseline_shift for c in cells], dtype=np.float64)
    y1 = base[s_idx, d_idx] + base_shift[cell_idx, d_idx] + eps1

    trend = np.array(spec.trend, dtype=np.float64)[s_idx]
    trend = trend + np.array([c.trend_shift for c in cells], dtype=np.float64)[cell_idx, d_idx]
    trend = trend + np.array(spec.arm_trend_delta, dtype=np.float64)[s_idx] * (d == 1)
    y2_0 = y1 + trend + eps2
    effect = np.array(spec.effect, dtype=np.float64)[s_idx]
    effect = effect + np.array([c.effect_shift for c in cells], dtype=np.float64)[cell_idx]
    y2_1 = y2_0 + effect

    r2_1 = np.array([pair[0] for pair in STRATUM_PAIRS], dtype=np.int8)[s_idx]
    r2_0 = np.array([pair[1] for pair in STRATUM_PAIRS], dtype=np.int8)[s_idx]

    if spec.r1_model.kind == "mcar":
        r1 = (rng.random(n) < spec.r1_model.rate).astype(np.int8)
    else:
        r1 = np.ones(n, dtype=np.int8)

    aux = np.zeros((n, len(spec.aux_models)), dtype=np.int8)
    pattern_values = [
        np.array([c.aux_pattern[j] for c in cells], dtype=np.int8)
        for j in range(0 if not cells[0].aux_pattern else len(cells[0].aux_pattern))
    ]
    pattern_slot = 0
    for k, model in enumerate(spec.aux_models):
        if model.kind == "independent":
            aux[:, k] = rng.random(n) < model.p
        else:
            aux[:, k] = pattern_values[pattern_slot][cell_idx]
            pattern_slot += 1

    if cells[0].x_label is not None:
        labels = np.array([c.x_label for c in cells], dtype=np.int64)
        x = labels[cell_idx].reshape(n, 1)
    else:
        x = None

    r2 = np.where(d == 1, r2_1, r2_0)
    y2_obs = np.where(r2.astype(bool), np.where(d == 1, y2_1, y2_0), np.nan)
    y1_obs = np.where(r1.astype(bool), y1, np.nan)

    data = PanelDataset(
        d=d,
        y1=y1_obs,
        y2=y2_obs,
        aux=aux,
        x=None if x is None else x.copy(),
        _validate=False,  # well-formed by construction; tiny draws may lack an arm
    )
    oracle = OraclePanel(
        d=d.copy(),
        y1_true=y1,
        y2_1=y2_1,
        y2_0=y2_0,
        s=s,
        r1=r1,
        r2_1=r2_1,
        r2_0=r2_0,
        aux=aux.copy(),
        x=x,
    )

    treated = d == 1
    att = float(np.mean(y2_1[treated] - y2_0[treated]))
    ar_treated = treated & (s == _AR)
    att_ar = (
        float(np.mean(y2_1[ar_treated] - y2_0[ar_treated])) if ar_treated.any() else math.nan
    )
    pop = _population(spec)
    pi_table = tuple(
        {STRATUM_PAIRS[code]: spec.pi(arm)[code] for code in range(4)} for arm in (0, 1)
    )
    truth = OracleTruth(
        att=att,
        att_ar=att_ar,
        pi_table=pi_table,
        cc_bias=pop.cc_bias,
        att_population=pop.att,
        att_ar_population=pop.att_ar,
        cc_population=pop.cc,
    )
    return data, oracle, truth


# ---------------------------------------------------------------------------
# oracle-side identities
# ---------------------------------------------------------------------------


OracleInput = Union[OraclePanel, Iterable[OracleRecord]]


def _as_oracle(records: OracleInput) -> OraclePanel:
    if isinstance(records, OraclePanel):
        return records
    seq = list(records)
    if not seq:
        raise InputError("no oracle records supplied")
    codes = {label: i for i, label in enumerate(STRATUM_LABELS)}
    return OraclePanel(
        d=np.array([r.d for r in seq], dtype=np.int8),
        y1_true=np.array([r.y1_true for r in seq], dtype=np.float64),
        y2_1=np.array([r.y2_1 for r in seq], dtype=np.float64),
        y2_0=np.array([r.y2_0 for r in seq], dtype=np.float64),
        s=np.array([codes[r.s] for r in seq], dtype=np.int8),
        r1=np.array([r.r1 for r in seq], dtype=np.int8),
        r2_1=np.array([r.r2_1 for r in seq], dtype=np.int8),
        r2_0=np.array([r.r2_0 for r in seq], dtype=np.int8),
        aux=np.array([r.aux for r in seq], dtype=np.int8).reshape(len(seq), -1),
        x=None
        if seq[0].x is None
        else np.array([r.x for r in seq], dtype=np.int64).reshape(len(seq), -1),
    )


#: Labels of the five decomposition terms, in reported order.
DECOMPOSITION_LABELS = (
    "treated before-after change among respondents",
    "always-respondents' control-arm trend (subtracted)",
    "if-treated respondents' control-arm trend (subtracted)",
    "never-respondents' direct effect (added)",
    "if-control respondents' direct effect (added)",
)


@dataclass(frozen=True)
class AttDecomposition:
    """Five-term oracle decomposition of the ATT.

    ``terms`` are the signed contributions in :data:`DECOMPOSITION_LABELS`
    order; ``total`` is their sum, ``att`` the sample ATT, ``deviation``
    their difference and ``se`` its Monte-Carlo standard error (driven by
    the cross-arm trend comparison for the two respondent strata).
    """

    terms: tuple[float, float, float, float, float]
    labels: tuple[str, ...]
    total: float
    att: float
    deviation: float
    se: float
    treated_shares: Mapping[tuple[int, int], float]


def decompose_att(records: OracleInput) -> AttDecomposition:
    """Evaluate the five-term ATT decomposition on oracle records.

    The observable first term (the treated arm's before-after change among
    its respondents) is corrected by the control-arm trends of the two
    strata that respond under treatment and augmented by the direct effects
    of the two strata that do not; with trends shared across arms the five
    terms sum to the ATT up to Monte-Carlo noise.

    Parameters
    ----------
    records : OraclePanel or iterable of OracleRecord

    Returns
    -------
    AttDecomposition

    Raises
    ------
    InputError
        If a stratum with positive treated share has no control units, so
        its trend term cannot be evaluated.
    RuntimeError
        If the terms fail to reconstruct the sample ATT within six standard
        errors — the generating spec violated shared trends.
    """
    oracle = _as_oracle(records)
    d = oracle.d
    s = oracle.s
    treated = d == 1
    control = ~treated
    n1 = int(treated.sum())
    if n1 == 0 or int(control.sum()) == 0:
        raise EstimatorError("decomposition requires units in both arms")

    shares = {
        STRATUM_PAIRS[code]: float((treated & (s == code)).sum()) / n1 for code in range(4)
    }
    delta0 = oracle.y2_0 - oracle.y1_true  # untreated change, all units
    direct = oracle.y2_1 - oracle.y2_0

    responds_if_treated = (s == _AR) | (s == _ITR)
    term1 = float(np.mean((oracle.y2_1 - oracle.y1_true)[treated] * responds_if_treated[treated]))

    def _stratum_mean(values: np.ndarray, mask: np.ndarray, code: int, role: str) -> float:
        group = mask & (s == code)
        if not group.any():
            raise EstimatorError(
                f"no {role} units in stratum {STRATUM_LABELS[code]}: "
                "its decomposition term is undefined"
            )
        return float(values[group].mean())

    terms = [term1, 0.0, 0.0, 0.0, 0.0]
    if shares[STRATUM_PAIRS[_AR]] > 0:
        terms[1] = -shares[STRATUM_PAIRS[_AR]] * _stratum_mean(delta0, control, _AR, "control")
    if shares[STRATUM_PAIRS[_ITR]] > 0:
        terms[2] = -shares[STRATUM_PAIRS[_ITR]] * _stratum_mean(delta0, control, _ITR, "control")
    if shares[STRATUM_PAIRS[_NR]] > 0:
        terms[3] = shares[STRATUM_PAIRS[_NR]] * _stratum_mean(direct, treated, _NR, "treated")
    if shares[STRATUM_PAIRS[_ICR]] > 0:
        terms[4] = shares[STRATUM_PAIRS[_ICR]] * _stratum_mean(direct, treated, _ICR, "treated")

    total = float(sum(terms))
    att = float(np.mean(direct[treated]))
    deviation = total - att

    # The deviation equals the share-weighted cross-arm gap in untreated
    # changes over the two treated-respondent strata; its standard error
    # treats the shares as fixed.
    var = 0.0
    for code in (_AR, _ITR):
        share = shares[STRATUM_PAIRS[code]]
        if share == 0:
            continue
        for mask in (treated, control):
            group = mask & (s == code)
            n_g = int(group.sum())
            if n_g < 2:
                raise EstimatorError(
                    f"stratum {STRATUM_LABELS[code]} needs at least two units per arm "
                    "for the decomposition tolerance"
                )
            var += share**2 * float(np.var(delta0[group], ddof=1)) / n_g
    se = math.sqrt(var)

    if abs(deviation) > 6.0 * se + 1e-12:
        raise RuntimeError(
            "decomposition identity violated: terms total "
            f"{total:.6f} vs ATT {att:.6f} (deviation {deviation:.6f}, se {se:.6f}); "
            "the generating process does not share trends across arms"
        )
    return AttDecomposition(
        terms=tuple(terms),
        labels=DECOMPOSITION_LABELS,
        total=total,
        att=att,
        deviation=deviation,
        se=se,
        treated_shares=shares,
    )


@dataclass(frozen=True)
class TrendMixtureReport:
    """Untreated trends per arm, directly and as stratum mixtures.

    ``direct[d]`` is the mean of ``Y2(0) - Y1`` in arm ``d``; ``mixture[d]``
    recomputes it as the stratum-share-weighted mean (the two agree exactly
    up to floating-point regrouping — the mixture identity).  ``pt_gap`` is
    ``direct[1] - direct[0]``: zero in expectation exactly when stratum
    composition and trends line up across arms, even though each stratum's
    trend is shared by construction.
    """

    direct: tuple[float, float]
    mixture: tuple[float, float]
    mixture_residual: float
    stratum_shares: tuple[Mapping[tuple[int, int], float], Mapping[tuple[int, int], float]]
    stratum_trends: tuple[
        Mapping[tuple[int, int], float | None], Mapping[tuple[int, int], float | None]
    ]
    pt_gap: float
    pt_gap_se: float


def check_trend_mixture(records: OracleInput) -> TrendMixtureReport:
    """Compare each arm's untreated trend with its stratum-mixture form.

    The mixture identity (law of total expectation) must hold to rounding;
    the report also carries the cross-arm trend gap and its standard error,
    which reveal when equal per-stratum trends still produce unequal
    arm-level trends because stratum composition differs.

    Raises
    ------
    RuntimeError
        If the mixture identity fails beyond floating-point tolerance.
    """
    oracle = _as_oracle(records)
    delta0 = oracle.y2_0 - oracle.y1_true
    d = oracle.d
    s = oracle.s

    direct: list[float] = []
    mixture: list[float] = []
    shares: list[dict[tuple[int, int], float]] = []
    trends: list[dict[tuple[int, int], float | None]] = []
    for arm in (0, 1):
        mask = d == arm
        n_arm = int(mask.sum())
        if n_arm == 0:
            raise EstimatorError("trend comparison requires units in both arms")
        direct.append(float(delta0[mask].mean()))
        arm_shares: dict[tuple[int, int], float] = {}
        arm_trends: dict[tuple[int, int], float | None] = {}
        mix = 0.0
        for code in range(4):
            group = mask & (s == code)
            n_g = int(group.sum())
            arm_shares[STRATUM_PAIRS[code]] = n_g / n_arm
            if n_g:
                m = float(delta0[group].mean())
                arm_trends[STRATUM_PAIRS[code]] = m
                mix += (n_g / n_arm) * m
            else:
                arm_trends[STRATUM_PAIRS[code]] = None
        mixture.append(mix)
        shares.append(arm_shares)
        trends.append(arm_trends)

    scale = max(1.0, max(abs(v) for v in direct))
    residual = max(abs(direct[arm] - mixture[arm]) for arm in (0, 1))
    if residual > 1e-9 * scale:
        raise RuntimeError(
            f"stratum-mixture identity violated: residual {residual!r} "
            "exceeds floating-point tolerance"
        )

    var = 0.0
    for arm in (0, 1):
        mask = d == arm
        n_arm = int(mask.sum())
        if n_arm >= 2:
            var += float(np.var(delta0[mask], ddof=1)) / n_arm
    return TrendMixtureReport(
        direct=(direct[0], direct[1]),
        mixture=(mixture[0], mixture[1]),
        mixture_residual=residual,
        stratum_shares=(shares[0], shares[1]),
        stratum_trends=(trends[0], trends[1]),
        pt_gap=direct[1] - direct[0],
        pt_gap_se=math.sqrt(var),
    )


# ---------------------------------------------------------------------------
# spec surgery
# ---------------------------------------------------------------------------


def strip_missingness(spec: DgpSpec) -> DgpSpec:
    """Return a spec with the same outcome law but full observation.

    Every (cell, stratum) combination becomes an always-respondent cell that
    keeps its trend, effect and baseline contributions, and first-wave
    response is forced on.  The generated panel therefore follows the same
    outcome distribution as the original with all missingness removed —
    the reference point for collapse identities.
    """
    new_cells: list[Cell] = []
    for cell in spec.cells():
        for code in range(4):
            share = (
                cell.share[0] * cell.strata[0][code],
                cell.share[1] * cell.strata[1][code],
            )
            if share[0] <= 0.0 and share[1] <= 0.0:
                continue
            new_cells.append(
                Cell(
                    label=f"{cell.label}/{STRATUM_LABELS[code]}",
                    share=share,
                    strata=((1.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0)),
                    trend_shift=(
                        cell.trend_shift[0] + spec.trend[code] - spec.trend[_AR],
                        cell.trend_shift[1]
                        + spec.trend[code]
                        + spec.arm_trend_delta[code]
                        - spec.trend[_AR]
                        - spec.arm_trend_delta[_AR],
                    ),
                    effect_shift=cell.effect_shift + spec.effect[code] - spec.effect[_AR],
                    baseline_shift=(
                        cell.baseline_shift[0] + spec.baseline[code][0] - spec.baseline[_AR][0],
                        cell.baseline_shift[1] + spec.baseline[code][1] - spec.baseline[_AR][1],
                    ),
                    x_label=cell.x_label,
                    aux_pattern=cell.aux_pattern,
                )
            )
    p1 = spec.arm_share(1)
    joint = ((1.0 - p1, 0.0, 0.0, 0.0), (p1, 0.0, 0.0, 0.0))
    return replace(
        spec,
        joint_sd=joint,
        covariate_model=tuple(new_cells),
        r1_model=R1Model("always-observed"),
        arm_trend_delta=(0.0, 0.0, 0.0, 0.0),
    )


# ---------------------------------------------------------------------------
# oracle CSV I/O
# ---------------------------------------------------------------------------


def save_oracle(oracle: OraclePanel, dest: str | Path | IO[str]) -> None:
    """Write the per-unit oracle table as CSV.

    Column order: id, d, y1, y2, aux1..auxK, x1..xJ, s, y1_true, y2_1, y2_0;
    missing observable outcomes are written as "NA".  :func:`load_oracle`
    reproduces the records field by field.
    """
    n_aux = int(oracle.aux.shape[1])
    n_x = 0 if oracle.x is None else int(oracle.x.shape[1])
    header = ["id", "d", "y1", "y2"]
    header += [f"aux{k + 1}" for k in range(n_aux)]
    header += [f"x{j + 1}" for j in range(n_x)]
    header += ["s", "y1_true", "y2_1", "y2_0"]

    own = isinstance(dest, (str, Path))
    handle: IO[str] = open(dest, "w", newline="") if own else dest  # type: ignore[assignment]
    try:
        writer = csv.writer(handle)
        writer.writerow(header)
        for rec in oracle.records:
            row = [
                rec.unit_id,
                str(rec.d),
                "NA" if rec.y1 is None else repr(rec.y1),
                "NA" if rec.y2 is None else repr(rec.y2),
            ]
            row += [str(v) for v in rec.aux]
            if rec.x is not None:
                row += [str(v) for v in rec.x]
            row += [rec.s, repr(rec.y1_true), repr(rec.y2_1), repr(rec.y2_0)]
            writer.writerow(row)
    finally:
        if own:
            handle.close()


def load_oracle(source: str | Path | bytes | IO[str] | IO[bytes]) -> tuple[OracleRecord, ...]:
    """Read an oracle table written by :func:`save_oracle`.

    Every record's internal consistency (stratum vs. potential responses,
    observable view vs. latent values) is re-validated on load; a corrupted
    file fails loudly.
    """
    text = _as_text(source)
    try:
        rows = [row for row in csv.reader(io.StringIO(text)) if row]
    except csv.Error as exc:
        raise InputError(f"malformed CSV: {exc}") from exc
    if not rows:
        raise InputError("empty oracle table")
    header = [cell.strip() for cell in rows[0]]
    required = ["id", "d", "y1", "y2", "s", "y1_true", "y2_1", "y2_0"]
    missing = [c for c in required if c not in header]
    if missing:
        raise InputError(f"oracle CSV is missing required columns: {', '.join(missing)}")
    col = {name: i for i, name in enumerate(header)}
    aux_cols = [c for c in header if c.startswith("aux") and c[3:].isdigit()]
    aux_cols.sort(key=lambda c: int(c[3:]))
    x_cols = [c for c in header if c.startswith("x") and c[1:].isdigit()]
    x_cols.sort(key=lambda c: int(c[1:]))

    def opt_float(cell: str, where: str) -> float | None:
        if cell.strip().lower() in ("", "na"):
            return None
        try:
            return float(cell)
        except ValueError:
            raise InputError(f"unparseable numeric value {cell!r} in {where}") from None

    records: list[OracleRecord] = []
    for i, row in enumerate(rows[1:]):
        where = f"row {i + 2}"
        if len(row) != len(header):
            raise InputError(
                f"malformed CSV: {where} has {len(row)} cells, header has {len(header)}"
            )
        s = row[col["s"]].strip()
        if s not in STRATUM_LABELS:
            raise InputError(f"unknown stratum label {s!r} in {where}")
        pair = STRATUM_PAIRS[STRATUM_LABELS.index(s)]
        d_cell = row[col["d"]].strip()
        if d_cell not in ("0", "1"):
            raise InputError(f"treatment must be 0 or 1, got {d_cell!r} ({where})")
        d = int(d_cell)
        y1 = opt_float(row[col["y1"]], where)
        y2 = opt_float(row[col["y2"]], where)
        latent: dict[str, float] = {}
        for name in ("y1_true", "y2_1", "y2_0"):
            value = opt_float(row[col[name]], where)
            if value is None:
                raise InputError(f"latent column {name} must not be missing ({where})")
            latent[name] = value
        try:
            records.append(
                OracleRecord(
                    unit_id=row[col["id"]].strip(),
                    d=d,
                    y1=y1,
                    y2=y2,
                    aux=tuple(int(row[col[c]]) for c in aux_cols),
                    x=tuple(int(row[col[c]]) for c in x_cols) if x_cols else None,
                    s=s,
                    y1_true=latent["y1_true"],
                    y2_1=latent["y2_1"],
                    y2_0=latent["y2_0"],
                    r1=int(y1 is not None),
                    r2=pair[0] if d == 1 else pair[1],
                    r2_1=pair[0],
                    r2_0=pair[1],
                )
            )
        except ValueError as exc:
            raise InputError(f"inconsistent oracle record in {where}: {exc}") from exc
    if not records:
        raise InputError("empty oracle table")
    return tuple(records)


# ---------------------------------------------------------------------------
# instrument algebra over cell layers (population)
# ---------------------------------------------------------------------------


def _pattern_index(spec: DgpSpec, aux_index: int) -> int:
    """Position of auxiliary column ``aux_index`` among the pattern models."""
    model = spec.aux_models[aux_index]
    if model.kind != "pattern":
        raise InputError(
            f"auxiliary column {aux_index} is independent of the response process"
        )
    return sum(1 for m in spec.aux_models[:aux_index] if m.kind == "pattern")


def _iv_population(spec: DgpSpec, aux_index: int) -> dict:
    """Population pieces of the single-instrument correction, per arm.

    Returns per-arm dictionaries with the observed-change split by
    instrument level (``numer``), the missingness-probability contrast
    (``denom``), the marginal missing share, the marginal
    respondent/nonrespondent gap (``gamma``) and the assembled correction
    value; plus the implied estimator value and the complete-case value.
    """
    slot = _pattern_index(spec, aux_index)
    cells, weight, mu, _ = _cell_tables(spec)
    arms = []
    for d in (0, 1):
        level_mass = {0: 0.0, 1: 0.0}
        obs_mass = {0: 0.0, 1: 0.0}
        obs_sum = {0: 0.0, 1: 0.0}
        miss_sum = {0: 0.0, 1: 0.0}
        for ci, cell in enumerate(cells):
            level = cell.aux_pattern[slot]
            for s in range(4):
                w = weight[d][ci][s]
                level_mass[level] += w
                if _observed_in_arm(s, d):
                    obs_mass[level] += w
                    obs_sum[level] += w * mu[d][ci][s]
                else:
                    miss_sum[level] += w * mu[d][ci][s]
        obs_mean = {
            v: obs_sum[v] / obs_mass[v] if obs_mass[v] > 0 else math.nan for v in (0, 1)
        }
        miss_mass = {v: level_mass[v] - obs_mass[v] for v in (0, 1)}
        miss_mean = {
            v: miss_sum[v] / miss_mass[v] if miss_mass[v] > 0 else math.nan for v in (0, 1)
        }
        q = {v: miss_mass[v] / level_mass[v] for v in (0, 1)}
        total = level_mass[0] + level_mass[1]
        obs_total = obs_mass[0] + obs_mass[1]
        marg_obs = (obs_sum[0] + obs_sum[1]) / obs_total
        marg_miss_mass = total - obs_total
        marg_miss = (
            (miss_sum[0] + miss_sum[1]) / marg_miss_mass if marg_miss_mass > 0 else marg_obs
        )
        numer = obs_mean[1] - obs_mean[0]
        denom = q[0] - q[1]
        missing_share = marg_miss_mass / total
        correction = (numer / denom) * missing_share if missing_share > 0 else 0.0
        arms.append(
            {
                "numer": numer,
                "denom": denom,
                "missing_share": missing_share,
                "gamma": marg_obs - marg_miss,
                "correction": correction,
                "cc": marg_obs,
            }
        )
    cc = arms[1]["cc"] - arms[0]["cc"]
    estimate = cc + arms[1]["correction"] - arms[0]["correction"]
    return {"arms": arms, "cc": cc, "estimate": estimate}


def _multi_iv_population(spec: DgpSpec, aux_pair: tuple[int, int]) -> dict:
    """Population value of the paired-instrument correction and estimator."""
    parts = [_iv_population(spec, k) for k in aux_pair]
    cc = parts[0]["cc"]
    corrections = []
    for d in (0, 1):
        numer = parts[0]["arms"][d]["numer"] - parts[1]["arms"][d]["numer"]
        composite = -parts[1]["arms"][d]["denom"] + parts[0]["arms"][d]["denom"]
        # composite = [q2(1) - q2(0)] - [q1(1) - q1(0)] expressed through the
        # per-instrument denominators q(0) - q(1)
        missing = parts[0]["arms"][d]["missing_share"]
        corrections.append((numer / composite) * missing if missing > 0 else 0.0)
    return {
        "cc": cc,
        "corrections": corrections,
        "estimate": cc + corrections[1] - corrections[0],
    }


# ---------------------------------------------------------------------------
# numeric preset solves (cached)
# ---------------------------------------------------------------------------


def _couple(p_treated: float, p_control: float) -> tuple[float, float, float, float]:
    """Comonotone coupling of the two potential response margins.

    Maximizes the always-respondent mass consistent with marginal response
    probabilities ``p_treated = Pr(R2(1) = 1)`` and ``p_control``; the
    resulting table is automatically monotone when ``p_treated >= p_control``.
    """
    ar = min(p_treated, p_control)
    return (ar, p_treated - ar, p_control - ar, 1.0 - max(p_treated, p_control))


def _check_solution(residual: float, what: str) -> None:
    if not residual < 1e-10:
        raise RuntimeError(
            f"preset solve for {what} did not converge (residual {residual!r})"
        )


@lru_cache(maxsize=1)
def _solve_homogeneous_cells() -> tuple[float, float, float]:
    """Arm-1 response table with a constant respondent/nonrespondent gap.

    A latent binary V shifts outcome trends; response probabilities
    ``p(V, aux)`` are solved so that the respondent-minus-nonrespondent
    mean-trend gap is identical across the two instrument groups while the
    response-rate contrast between groups stays at 0.25.  Returns
    ``(p(0, 1), p(1, 1), trend_coefficient)`` with ``p(0, 0) = 0.15`` and
    ``p(1, 0) = 0.75`` held fixed; the trend coefficient scales V so the
    planted complete-case bias is exactly 0.25.
    """

    def v_gap(p_v0: float, p_v1: float) -> float:
        # E[V | respondent] - E[V | nonrespondent] within one instrument group
        obs = p_v1 / (p_v0 + p_v1)
        miss = (1.0 - p_v1) / (2.0 - p_v0 - p_v1)
        return obs - miss

    target = v_gap(0.15, 0.75)

    def equations(q: np.ndarray) -> list[float]:
        p01, p11 = q
        rate_gap = (p01 + p11) / 2.0 - (0.15 + 0.75) / 2.0
        return [rate_gap - 0.25, v_gap(p01, p11) - target]

    sol = root(equations, x0=[0.45, 0.95], tol=1e-13)
    _check_solution(float(np.max(np.abs(equations(sol.x)))), "homogeneous-bias cells")
    p01, p11 = (float(v) for v in sol.x)
    if not (0.0 < p01 < 1.0 and 0.0 < p11 < 1.0):
        raise RuntimeError("homogeneous-bias solve left the probability simplex")
    share_v1_respondents = (0.75 + p11) / (0.15 + p01 + 0.75 + p11)
    b = 0.25 / (share_v1_respondents - 0.5)
    return p01, p11, b


@lru_cache(maxsize=1)
def _solve_multi_instrument() -> tuple[float, float, float, float]:
    """Arm-1 response interaction terms for the paired-instrument preset.

    Both auxiliary indicators shift trends directly by 0.3 (breaking the
    single-instrument construction), while a latent V with unit trend
    coefficient drives selection.  The V-part of the response probability,
    ``v * (h0 + h1*a1 + h2*a2 + h12*a1*a2)``, is solved so that within each
    instrument the respondent/nonrespondent trend gap is level-independent,
    the paired-difference correction is exact in population, and the mean
    V-response gap is 0.30.
    """
    cells = [(v, a1, a2) for v in (0, 1) for a1 in (0, 1) for a2 in (0, 1)]

    def response(h: np.ndarray, v: int, a1: int, a2: int) -> float:
        return 0.30 + 0.20 * a1 - 0.15 * a2 + v * (
            h[0] + h[1] * a1 + h[2] * a2 + h[3] * a1 * a2
        )

    def shift(v: int, a1: int, a2: int) -> float:
        return 1.0 * v + 0.3 * (a1 + a2)

    def equations(h: np.ndarray) -> list[float]:
        p = {c: response(h, *c) for c in cells}

        def group(level_of, level, observed: bool):
            mass = mean_sum = 0.0
            for c in cells:
                if level_of(c) != level:
                    continue
                w = p[c] if observed else 1.0 - p[c]
                mass += w
                mean_sum += w * shift(*c)
            return mass, mean_sum / mass

        def gap(level_of, level) -> float:
            _, obs = group(level_of, level, True)
            _, miss = group(level_of, level, False)
            return obs - miss

        def numer(level_of) -> float:
            _, hi = group(level_of, 1, True)
            _, lo = group(level_of, 0, True)
            return hi - lo

        def q(level_of, level) -> float:
            mass, _ = group(level_of, level, True)
            return 1.0 - mass / 4.0  # four equal-weight cells per level

        def a1_of(c):
            return c[1]

        def a2_of(c):
            return c[2]
        obs_mass = sum(p[c] for c in cells)
        marg_obs = sum(p[c] * shift(*c) for c in cells) / obs_mass
        marg_miss = sum((1 - p[c]) * shift(*c) for c in cells) / (8.0 - obs_mass)
        gamma = marg_obs - marg_miss
        composite = (q(a2_of, 1) - q(a2_of, 0)) - (q(a1_of, 1) - q(a1_of, 0))
        mean_v_gap = h[0] + (h[1] + h[2]) / 2.0 + h[3] / 4.0
        return [
            gap(a1_of, 0) - gap(a1_of, 1),
            gap(a2_of, 0) - gap(a2_of, 1),
            (numer(a1_of) - numer(a2_of)) + gamma * composite,
            mean_v_gap - 0.30,
        ]

    sol = root(
        equations,
        x0=[0.32904874, -0.05795622, -0.08626355, 0.10884955],
        tol=1e-13,
    )
    _check_solution(float(np.max(np.abs(equations(sol.x)))), "paired-instrument cells")
    h = tuple(float(v) for v in sol.x)
    probs = [0.30 + 0.20 * a1 - 0.15 * a2 + v * (h[0] + h[1] * a1 + h[2] * a2 + h[3] * a1 * a2)
             for v in (0, 1) for a1 in (0, 1) for a2 in (0, 1)]
    if min(probs) <= 0.01 or max(probs) >= 0.99:
        raise RuntimeError("paired-instrument solve left the probability simplex")
    return h


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def _aggregate_joint(
    p_treated: float, cells: Sequence[Cell]
) -> tuple[tuple[float, float, float, float], tuple[float, float, float, float]]:
    joint = []
    for arm, p_arm in ((0, 1.0 - p_treated), (1, p_treated)):
        joint.append(
            tuple(
                p_arm * sum(c.share[arm] * c.strata[arm][s] for c in cells) for s in range(4)
            )
        )
    return (joint[0], joint[1])


def _require(condition: bool, kind: str, message: str) -> None:
    if not condition:
        raise RuntimeError(f"preset {kind!r} failed its construction check: {message}")


def _preset_zero_bias(n: int, seed: int) -> DgpSpec:
    cells = []
    for a in (0, 1):
        p = 0.55 + 0.25 * a
        pair = _couple(p, p)
        cells.append(
            Cell(
                label=f"aux={a}",
                share=(0.5, 0.5),
                strata=(pair, pair),
                aux_pattern=(a,),
            )
        )
    return DgpSpec(
        n=n,
        seed=seed,
        joint_sd=_aggregate_joint(0.5, cells),
        trend=(0.4,) * 4,
        baseline=((5.0, 5.0),) * 4,
        effect=(1.0,) * 4,
        noise_sd=0.25,
        r1_model=R1Model("mcar", 0.85),
        aux_models=(AuxModel("pattern"),),
        covariate_model=tuple(cells),
    )


def _verify_zero_bias(spec: DgpSpec) -> None:
    pop = _population(spec)
    iv = _iv_population(spec, 0)
    _require(abs(pop.cc_bias) < 1e-12, "zero-bias", "complete-case bias is not zero")
    _require(abs(pop.att - 1.0) < 1e-12, "zero-bias", "ATT is not 1.0")
    for d in (0, 1):
        _require(
            abs(iv["arms"][d]["denom"]) >= 0.15,
            "zero-bias",
            f"instrument relevance below 0.15 in arm {d}",
        )
        _require(
            abs(iv["arms"][d]["correction"]) < 1e-12,
            "zero-bias",
            f"correction is not null in arm {d}",
        )


def _preset_homogeneous_bias(n: int, seed: int) -> DgpSpec:
    p01, p11, b = _solve_homogeneous_cells()
    treated_response = {(0, 0): 0.15, (1, 0): 0.75, (0, 1): p01, (1, 1): p11}
    cells = []
    for v in (0, 1):
        for a in (0, 1):
            pair = _couple(treated_response[(v, a)], 0.55 + 0.25 * a)
            cells.append(
                Cell(
                    label=f"v={v},aux={a}",
                    share=(0.25, 0.25),
                    strata=(pair, pair),
                    trend_shift=(b * v, b * v),
                    aux_pattern=(a,),
                )
            )
    return DgpSpec(
        n=n,
        seed=seed,
        joint_sd=_aggregate_joint(0.5, cells),
        trend=(0.4,) * 4,
        baseline=((5.0, 5.0),) * 4,
        effect=(1.0,) * 4,
        noise_sd=0.25,
        r1_model=R1Model("mcar", 0.85),
        aux_models=(AuxModel("pattern"),),
        covariate_model=tuple(cells),
    )


def _verify_homogeneous_bias(spec: DgpSpec) -> None:
    kind = "homogeneous-bias"
    p01, p11, b = _solve_homogeneous_cells()
    treated_response = {(0, 0): 0.15, (1, 0): 0.75, (0, 1): p01, (1, 1): p11}
    gaps = []
    for a in (0, 1):
        p_v0, p_v1 = treated_response[(0, a)], treated_response[(1, a)]
        obs = p_v1 / (p_v0 + p_v1)
        miss = (1.0 - p_v1) / (2.0 - p_v0 - p_v1)
        gaps.append(b * (obs - miss))
    _require(abs(gaps[0] - gaps[1]) < 1e-10, kind, "trend gap differs across instrument groups")

    pop = _population(spec)
    iv = _iv_population(spec, 0)
    _require(abs(pop.cc_bias - 0.25) < 1e-9, kind, "planted complete-case bias is not 0.25")
    _require(abs(pop.att - 1.0) < 1e-12, kind, "ATT is not 1.0")
    for d in (0, 1):
        _require(
            abs(iv["arms"][d]["denom"]) >= 0.15,
            kind,
            f"instrument relevance below 0.15 in arm {d}",
        )
    _require(
        abs(iv["arms"][0]["correction"]) < 1e-12, kind, "control arm should need no correction"
    )
    _require(
        abs(iv["estimate"] - pop.att) < 0.05,
        kind,
        "population instrument estimate strays from the ATT",
    )


def _preset_multi_iv(n: int, seed: int) -> DgpSpec:
    h = _solve_multi_instrument()
    cells = []
    for v in (0, 1):
        for a1 in (0, 1):
            for a2 in (0, 1):
                p_treated = 0.30 + 0.20 * a1 - 0.15 * a2 + v * (
                    h[0] + h[1] * a1 + h[2] * a2 + h[3] * a1 * a2
                )
                p_control = 0.60 + 0.15 * a1 - 0.10 * a2
                cells.append(
                    Cell(
                        label=f"v={v},aux=({a1},{a2})",
                        share=(0.125, 0.125),
                        strata=(_couple(p_treated, p_control),) * 2,
                        # treated-arm trends move with V and both indicators;
                        # the control arm stays at their mean, so the
                        # arm-level trend is common while each indicator's
                        # exclusion restriction fails.
                        trend_shift=(0.8, 1.0 * v + 0.3 * (a1 + a2)),
                        aux_pattern=(a1, a2),
                    )
                )
    return DgpSpec(
        n=n,
        seed=seed,
        joint_sd=_aggregate_joint(0.5, cells),
        trend=(0.4,) * 4,
        baseline=((5.0, 5.0),) * 4,
        effect=(1.0,) * 4,
        noise_sd=0.25,
        r1_model=R1Model("mcar", 0.85),
        aux_models=(AuxModel("pattern"), AuxModel("pattern")),
        covariate_model=tuple(cells),
    )


def _verify_multi_iv(spec: DgpSpec) -> None:
    kind = "multi-iv"
    pop = _population(spec)
    _require(abs(pop.att - 1.0) < 1e-12, kind, "ATT is not 1.0")
    single = _iv_population(spec, 0)
    paired = _multi_iv_population(spec, (0, 1))
    _require(
        abs(paired["estimate"] - pop.att) < 1e-9,
        kind,
        "paired-instrument estimator is not exact in population",
    )
    _require(
        abs(single["estimate"] - pop.att) > 0.15,
        kind,
        "single-instrument estimator should be visibly biased",
    )
    # arm-level trends agree across arms even though each indicator shifts
    # them (the per-stratum trend is flat, so the cell layer is all that moves)
    trend_means = [
        sum(cell.share[d] * (spec.trend[_AR] + cell.trend_shift[d]) for cell in spec.covariate_model)
        for d in (0, 1)
    ]
    _require(
        abs(trend_means[0] - trend_means[1]) < 1e-12,
        kind,
        "arm-level trends are not common",
    )


def _preset_pi(n: int, seed: int) -> DgpSpec:
    # Responding shares: treated arm 0.85 / 0.60, control arm 0.80 / 0.10
    # across the two covariate cells; the planted complete-case bias is the
    # respondent-composition contrast times the cell trend difference.
    share_x1_treated_cc = 0.60 / (0.85 + 0.60)
    share_x1_control_cc = 0.10 / (0.80 + 0.10)
    delta = 0.2 / (share_x1_treated_cc - share_x1_control_cc)
    cells = (
        Cell(
            label="x=0",
            share=(0.5, 0.5),
            strata=((0.80, 0.05, 0.0, 0.15), (0.80, 0.05, 0.0, 0.15)),
            x_label=0,
        ),
        Cell(
            label="x=1",
            share=(0.5, 0.5),
            strata=((0.10, 0.10, 0.0, 0.80), (0.10, 0.50, 0.0, 0.40)),
            trend_shift=(delta, delta),
            x_label=1,
        ),
    )
    return DgpSpec(
        n=n,
        seed=seed,
        joint_sd=_aggregate_joint(0.5, cells),
        trend=(0.2,) * 4,
        baseline=((5.0, 5.0),) * 4,
        effect=(1.0,) * 4,
        noise_sd=0.25,
        r1_model=R1Model("always-observed"),
        aux_models=(AuxModel("independent", 0.5),),
        covariate_model=cells,
    )


def _verify_pi(spec: DgpSpec) -> None:
    kind = "pi"
    pop = _population(spec)
    _require(abs(pop.att - 1.0) < 1e-12, kind, "ATT is not 1.0")
    _require(abs(pop.cc_bias - 0.2) < 1e-9, kind, "planted complete-case bias is not 0.2")
    for cell in spec.covariate_model:
        _require(
            cell.strata[0][_ICR] == 0.0 and cell.strata[1][_ICR] == 0.0,
            kind,
            "response must be monotone",
        )
        _require(
            cell.strata[0][_AR] == cell.strata[1][_AR],
            kind,
            "control-response share must match across arms within cells",
        )
        _require(
            cell.share[0] == cell.share[1],
            kind,
            "covariate distribution must be balanced across arms",
        )
    # the stratum-weighted estimator is exact in population: within each
    # cell the treated/control change contrast is the constant effect
    _require(
        all(c.effect_shift == 0.0 for c in spec.covariate_model)
        and len(set(spec.effect)) == 1,
        kind,
        "effects must be constant for the population-exactness argument",
    )


def _preset_mnar_baseline(n: int, seed: int) -> DgpSpec:
    pi_treated = (0.50, 0.20, 0.10, 0.20)
    pi_control = (0.60, 0.10, 0.15, 0.15)
    return DgpSpec(
        n=n,
        seed=seed,
        joint_sd=(
            tuple(0.5 * p for p in pi_control),
            tuple(0.5 * p for p in pi_treated),
        ),
        trend=(0.5, 1.0, 0.2, 0.8),
        baseline=((5.0, 5.0), (4.0, 4.0), (4.5, 4.5), (3.0, 3.0)),
        effect=(1.0, 1.5, 0.5, 0.8),
        noise_sd=0.5,
        r1_model=R1Model("always-observed"),
        aux_models=(AuxModel("independent", 0.5),),
    )


def _verify_mnar_baseline(spec: DgpSpec) -> None:
    kind = "mnar-baseline"
    pop = _population(spec)
    _require(abs(pop.att - 1.01) < 1e-12, kind, "ATT is not 1.01")
    _require(abs(pop.cc_bias - 47.0 / 140.0) < 1e-12, kind, "complete-case bias moved")


def _preset_monotone(n: int, seed: int) -> DgpSpec:
    pi_treated = (0.7, 0.2, 0.0, 0.1)
    pi_control = (0.7, 0.1, 0.0, 0.2)
    return DgpSpec(
        n=n,
        seed=seed,
        joint_sd=(
            tuple(0.5 * p for p in pi_control),
            tuple(0.5 * p for p in pi_treated),
        ),
        trend=(0.3, 0.9, 0.0, 0.6),
        baseline=((5.0, 5.0), (4.2, 4.2), (0.0, 0.0), (3.5, 3.5)),
        effect=(1.0, 1.6, 0.0, 0.4),
        noise_sd=0.5,
        r1_model=R1Model("mcar", 0.9),
        aux_models=(AuxModel("independent", 0.5),),
    )


def _verify_monotone(spec: DgpSpec) -> None:
    kind = "monotone"
    pop = _population(spec)
    _require(spec.pi(0)[_ICR] == 0.0 and spec.pi(1)[_ICR] == 0.0, kind, "if-control mass present")
    _require(abs(pop.att_ar - 1.0) < 1e-12, kind, "always-respondent ATT is not 1.0")
    _require(
        len(set(spec.effect[:2] + spec.effect[3:])) > 1,
        kind,
        "stratum effects should be heterogeneous",
    )


def _preset_no_monotone(n: int, seed: int) -> DgpSpec:
    pi_treated = (0.55, 0.15, 0.10, 0.20)
    pi_control = (0.50, 0.20, 0.15, 0.15)
    return DgpSpec(
        n=n,
        seed=seed,
        joint_sd=(
            tuple(0.5 * p for p in pi_control),
            tuple(0.5 * p for p in pi_treated),
        ),
        trend=(0.4, 1.0, 0.1, 0.7),
        baseline=((5.0, 5.0), (4.0, 4.0), (4.5, 4.5), (3.0, 3.0)),
        effect=(1.0, 1.4, 0.6, 0.8),
        noise_sd=0.5,
        r1_model=R1Model("always-observed"),
        aux_models=(AuxModel("independent", 0.5),),
    )


def _verify_no_monotone(spec: DgpSpec) -> None:
    kind = "no-monotone"
    pop = _population(spec)
    _require(abs(pop.att_ar - 1.0) < 1e-12, kind, "always-respondent ATT is not 1.0")
    pi = {d: spec.pi(d) for d in (0, 1)}
    _require(min(min(pi[0]), min(pi[1])) > 0.0, kind, "all four strata must be populated")
    # identities the interval construction relies on: the control-response
    # margin and the treatment-on-response effect match across arms
    control_resp = {d: pi[d][_AR] + pi[d][_ICR] for d in (0, 1)}
    treated_resp = {d: pi[d][_AR] + pi[d][_ITR] for d in (0, 1)}
    _require(
        abs(control_resp[0] - control_resp[1]) < 1e-12,
        kind,
        "control-response margins differ across arms",
    )
    _require(
        abs(
            (treated_resp[1] - control_resp[1]) - (treated_resp[0] - control_resp[0])
        ) < 1e-12,
        kind,
        "treatment effect on response differs across arms",
    )
    # the true always-respondent share sits inside the population interval
    # with room to spare for sampling noise
    for d in (0, 1):
        counter = control_resp[d] if d == 1 else treated_resp[d]
        own = treated_resp[d] if d == 1 else control_resp[d]
        lo = max(0.0, own + counter - 1.0)
        hi = min(own, counter)
        _require(
            lo + 0.05 <= pi[d][_AR] <= hi - 0.05,
            kind,
            f"true always-respondent share is not interior in arm {d}",
        )


_PRESETS = {
    "zero-bias": (_preset_zero_bias, _verify_zero_bias),
    "homogeneous-bias": (_preset_homogeneous_bias, _verify_homogeneous_bias),
    "multi-iv": (_preset_multi_iv, _verify_multi_iv),
    "pi": (_preset_pi, _verify_pi),
    "mnar-baseline": (_preset_mnar_baseline, _verify_mnar_baseline),
    "monotone": (_preset_monotone, _verify_monotone),
    "no-monotone": (_preset_no_monotone, _verify_no_monotone),
}


def make_preset(kind: str, n: int = 10_000, seed: int = 0) -> DgpSpec:
    """Build one of the documented generating processes.

    Every preset's claimed properties are re-verified analytically on
    construction (planted biases, instrument relevance and exactness,
    monotonicity, interval margins); a failure raises ``RuntimeError``
    because it indicates an internal inconsistency, not bad input.

    Parameters
    ----------
    kind : str
        One of :data:`PRESET_KINDS`:

        ``"zero-bias"``
            Instrument-driven response unrelated to outcome changes; the
            complete-case estimate is already unbiased and the instrument
            correction is null.  ATT 1.0.
        ``"homogeneous-bias"``
            A latent trend shifter drives treated-arm response; the
            respondent/nonrespondent gap is constant across instrument
            groups (solved numerically), response rates differ by 0.25,
            planted complete-case bias 0.25.  ATT 1.0.
        ``"multi-iv"``
            Two auxiliary indicators shift trends directly (each one's
            exclusion restriction fails by 0.3) yet satisfy the paired
            conditions: the paired-difference correction is exact in
            population while the single-instrument estimate is off by more
            than 0.15.  ATT 1.0.
        ``"pi"``
            An exported binary covariate drives both trends and strata;
            response status is unrelated to changes within covariate
            cells.  Planted complete-case bias 0.2.  ATT 1.0.
        ``"mnar-baseline"``
            Stratum composition differs across arms with heterogeneous
            trends and effects; complete-case bias 47/140.  ATT 1.01.
        ``"monotone"``
            No if-control respondents; heterogeneous effects with
            always-respondent ATT 1.0; first wave missing completely at
            random at rate 0.1.
        ``"no-monotone"``
            All four strata populated, with the cross-arm response
            identities the interval construction needs; true
            always-respondent shares are interior to the population
            intervals.  Always-respondent ATT 1.0.

    n, seed : int
        Sample size and random seed stored in the returned DgpSpec.

    Returns
    -------
    DgpSpec
    """
    if kind not in _PRESETS:
        known = ", ".join(PRESET_KINDS)
        raise InputError(f"unknown preset {kind!r}; expected one of: {known}")
    if n < 1:
        raise InputError(f"sample size must be at least 1, got {n!r}")
    builder, verifier = _PRESETS[kind]
    spec = builder(int(n), int(seed))
    verifier(spec)
    return spec
