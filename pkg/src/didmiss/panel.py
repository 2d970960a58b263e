"""Two-period panel data with missing outcomes: ingestion, validation, rates.

The observable unit record is (D, Y1, Y2, R1, R2, auxiliary response
indicators, discrete covariates), where the response indicators are derived
from outcome presence: R_t = 1 exactly when Y_t is observed. Everything
downstream — complete-case DID, IV corrections, strata proportions, trimming
bounds, principal scores — consumes either this dataset type or the
``RateTable`` of empirical response rates computed from it.

Storage is columnar (one numpy array per field) because the estimators and
the bootstrap are vectorized; a record view is materialized lazily for code
that prefers row-wise access.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "PanelRecord",
    "PanelDataset",
    "RateTable",
    "ColumnMapping",
    "load_panel",
    "save_panel",
    "compute_rates",
]

#: Cell contents treated as missing on input (case-insensitive for "na").
_MISSING_TOKENS = {"", "na"}


def _is_missing_token(cell: str) -> bool:
    return cell.strip().lower() in _MISSING_TOKENS


def _parse_optional_float(cell: str, where: str) -> float:
    """Parse a CSV cell into a float or NaN-for-missing; reject junk loudly."""
    if _is_missing_token(cell):
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise InputError(f"unparseable numeric value {cell!r} in {where}") from None


@dataclass(frozen=True)
class PanelRecord:
    """One unit's observable data.

    r1 and r2 are derived, not independent inputs: r_t = 1 exactly when y_t is
    present. Missing outcomes are represented as None.
    """

    unit_id: str
    d: int
    y1: float | None
    y2: float | None
    aux: tuple[int, ...] = ()
    x: tuple[int, ...] | None = None
    r1: int = field(init=False)
    r2: int = field(init=False)

    def __post_init__(self) -> None:
        if self.d not in (0, 1):
            raise InputError(f"treatment must be 0 or 1, got {self.d!r} (unit {self.unit_id})")
        for v in self.aux:
            if v not in (0, 1):
                raise InputError(
                    f"auxiliary indicator must be 0 or 1, got {v!r} (unit {self.unit_id})"
                )
        if self.y1 is not None and math.isnan(self.y1):
            object.__setattr__(self, "y1", None)
        if self.y2 is not None and math.isnan(self.y2):
            object.__setattr__(self, "y2", None)
        object.__setattr__(self, "r1", int(self.y1 is not None))
        object.__setattr__(self, "r2", int(self.y2 is not None))

    @property
    def is_complete_case(self) -> bool:
        return self.r1 == 1 and self.r2 == 1


@dataclass(frozen=True)
class ColumnMapping:
    """Names the CSV columns holding each field.

    aux_indicators are 0/1 columns used directly; aux_variables are auxiliary
    *variable* columns whose response indicator is derived from presence (the
    indicator is 1 exactly when the cell is non-missing). Both may be given;
    indicators come first in the resulting aux vector.
    """

    id: str = "id"
    treatment: str = "d"
    y1: str = "y1"
    y2: str = "y2"
    aux_indicators: tuple[str, ...] = ()
    aux_variables: tuple[str, ...] = ()
    covariates: tuple[str, ...] = ()

    @staticmethod
    def detect(header: Sequence[str]) -> "ColumnMapping":
        """Infer the default mapping: id,d,y1,y2 plus aux1..auxK / w1..wK / x1..xJ."""

        def numbered(prefix: str) -> tuple[str, ...]:
            found: list[tuple[int, str]] = []
            for name in header:
                if name.startswith(prefix) and name[len(prefix) :].isdigit():
                    found.append((int(name[len(prefix) :]), name))
            return tuple(name for _, name in sorted(found))

        required = ("id", "d", "y1", "y2")
        missing = [c for c in required if c not in header]
        if missing:
            raise InputError(f"CSV header is missing required columns: {', '.join(missing)}")
        return ColumnMapping(
            aux_indicators=numbered("aux"),
            aux_variables=numbered("w"),
            covariates=numbered("x"),
        )


class PanelDataset:
    """Validated, immutable two-period panel with missingness.

    Parameters
    ----------
    d, y1, y2
        Per-unit treatment (0/1) and outcomes; missing outcomes are NaN.
    aux
        (n, K) array of binary auxiliary response indicators; K may be 0.
    x
        Optional (n, J) array of small non-negative integer covariate
        categories.
    unit_ids
        Optional opaque identifiers; generated as "1".."n" when omitted.
    outcome_support
        Optional declared closed interval [y_min, y_max]; every observed
        outcome must lie inside it. Required by the trimming bounds' support
        fallback.
    """

    __slots__ = ("d", "y1", "y2", "r1", "r2", "aux", "x", "_unit_ids", "outcome_support", "_records")

    def __init__(
        self,
        d: np.ndarray,
        y1: np.ndarray,
        y2: np.ndarray,
        aux: np.ndarray | None = None,
        x: np.ndarray | None = None,
        unit_ids: tuple[str, ...] | None = None,
        outcome_support: tuple[float, float] | None = None,
        _validate: bool = True,
    ) -> None:
        d = np.asarray(d, dtype=np.int8)
        y1 = np.asarray(y1, dtype=np.float64)
        y2 = np.asarray(y2, dtype=np.float64)
        n = d.shape[0]
        if aux is None:
            aux = np.zeros((n, 0), dtype=np.int8)
        else:
            aux = np.asarray(aux, dtype=np.int8)
            if aux.ndim == 1:
                aux = aux.reshape(n, 1)
        if x is not None:
            x = np.asarray(x, dtype=np.int64)
            if x.ndim == 1:
                x = x.reshape(n, 1)
            if x.shape[1] == 0:
                x = None
        self.d = d
        self.y1 = y1
        self.y2 = y2
        self.r1 = ~np.isnan(y1)
        self.r2 = ~np.isnan(y2)
        self.aux = aux
        self.x = x
        self._unit_ids = unit_ids
        self.outcome_support = (
            (float(outcome_support[0]), float(outcome_support[1]))
            if outcome_support is not None
            else None
        )
        self._records: tuple[PanelRecord, ...] | None = None
        if _validate:
            self._validate()
        for arr in (self.d, self.y1, self.y2, self.aux) + (() if x is None else (self.x,)):
            arr.setflags(write=False)

    # -- validation ------------------------------------------------------

    def _validate(self) -> None:
        n = self.d.shape[0]
        if n == 0:
            raise InputError("empty dataset")
        for name, arr in (("y1", self.y1), ("y2", self.y2)):
            if arr.shape != (n,):
                raise InputError(f"{name} has shape {arr.shape}, expected ({n},)")
        if self.aux.shape[0] != n:
            raise InputError(f"aux has {self.aux.shape[0]} rows, expected {n}")
        if self.x is not None and self.x.shape[0] != n:
            raise InputError(f"x has {self.x.shape[0]} rows, expected {n}")
        bad_d = (self.d != 0) & (self.d != 1)
        if bad_d.any():
            i = int(np.argmax(bad_d))
            raise InputError(f"treatment must be 0 or 1, got {self.d[i]} (row {i + 1})")
        if self.aux.size and not np.isin(self.aux, (0, 1)).all():
            raise InputError("auxiliary indicator columns must contain only 0/1")
        arms = np.bincount(self.d, minlength=2)
        if arms[0] == 0 or arms[1] == 0:
            raise InputError("single-arm dataset: both treated and control units are required")
        if self._unit_ids is not None and len(self._unit_ids) != n:
            raise InputError(f"{len(self._unit_ids)} unit ids for {n} rows")
        if self.outcome_support is not None:
            lo, hi = self.outcome_support
            if not lo <= hi:
                raise InputError(f"outcome support endpoints out of order: [{lo}, {hi}]")
            observed = np.concatenate([self.y1[self.r1], self.y2[self.r2]])
            if observed.size and (observed.min() < lo or observed.max() > hi):
                raise InputError(
                    "observed outcomes fall outside the declared support "
                    f"[{lo}, {hi}]: range [{observed.min()}, {observed.max()}]"
                )

    # -- basic views -----------------------------------------------------

    def __len__(self) -> int:
        return int(self.d.shape[0])

    @property
    def n_aux(self) -> int:
        return int(self.aux.shape[1])

    @property
    def n_covariates(self) -> int:
        return 0 if self.x is None else int(self.x.shape[1])

    @property
    def unit_ids(self) -> tuple[str, ...]:
        if self._unit_ids is None:
            self._unit_ids = tuple(str(i + 1) for i in range(len(self)))
        return self._unit_ids

    @property
    def complete_case(self) -> np.ndarray:
        """Boolean mask: both outcomes observed (R1 = 1 and R2 = 1)."""
        return self.r1 & self.r2

    @property
    def delta_y(self) -> np.ndarray:
        """Y2 - Y1 (NaN wherever either outcome is missing)."""
        return self.y2 - self.y1

    @property
    def records(self) -> tuple[PanelRecord, ...]:
        """Row-wise view; materialized once on first access."""
        if self._records is None:
            ids = self.unit_ids
            xs = self.x
            self._records = tuple(
                PanelRecord(
                    unit_id=ids[i],
                    d=int(self.d[i]),
                    y1=None if np.isnan(self.y1[i]) else float(self.y1[i]),
                    y2=None if np.isnan(self.y2[i]) else float(self.y2[i]),
                    aux=tuple(int(v) for v in self.aux[i]),
                    x=None if xs is None else tuple(int(v) for v in xs[i]),
                )
                for i in range(len(self))
            )
        return self._records

    def __iter__(self) -> Iterator[PanelRecord]:
        return iter(self.records)

    # -- constructors ----------------------------------------------------

    @staticmethod
    def from_records(
        records: Iterable[PanelRecord],
        outcome_support: tuple[float, float] | None = None,
    ) -> "PanelDataset":
        recs = list(records)
        if not recs:
            raise InputError("empty dataset")
        n_aux = len(recs[0].aux)
        n_x = None if recs[0].x is None else len(recs[0].x)
        for r in recs:
            if len(r.aux) != n_aux:
                raise InputError(
                    f"inconsistent aux arity: unit {r.unit_id} has {len(r.aux)}, expected {n_aux}"
                )
            if (r.x is None) != (n_x is None) or (r.x is not None and len(r.x) != n_x):
                raise InputError(
                    f"inconsistent covariate arity: unit {r.unit_id} differs from the first record"
                )
        n = len(recs)
        d = np.fromiter((r.d for r in recs), dtype=np.int8, count=n)
        y1 = np.fromiter(
            (math.nan if r.y1 is None else r.y1 for r in recs), dtype=np.float64, count=n
        )
        y2 = np.fromiter(
            (math.nan if r.y2 is None else r.y2 for r in recs), dtype=np.float64, count=n
        )
        aux = np.array([r.aux for r in recs], dtype=np.int8).reshape(n, n_aux)
        x = None if n_x is None else np.array([r.x for r in recs], dtype=np.int64).reshape(n, n_x)
        return PanelDataset(
            d, y1, y2, aux=aux, x=x,
            unit_ids=tuple(r.unit_id for r in recs),
            outcome_support=outcome_support,
        )

    def _take(self, idx: np.ndarray) -> "PanelDataset":
        """Row-subset without re-validation (bootstrap hot path)."""
        return PanelDataset(
            self.d[idx], self.y1[idx], self.y2[idx],
            aux=self.aux[idx],
            x=None if self.x is None else self.x[idx],
            unit_ids=None,
            outcome_support=self.outcome_support,
            _validate=False,
        )

    def with_support(self, lo: float, hi: float) -> "PanelDataset":
        """Copy of this dataset with a declared outcome support."""
        return PanelDataset(
            self.d, self.y1, self.y2, aux=self.aux, x=self.x,
            unit_ids=self._unit_ids, outcome_support=(lo, hi),
        )


@dataclass(frozen=True)
class RateTable:
    """Empirical response rates by arm; the inputs to every proportion formula.

    Entries are None ("flagged absent") when their denominator subgroup is
    empty — downstream formulas raise targeted errors instead of dividing by
    zero.

    p_r2_given_aux[d][k][v] = Pr(R2 = 1 | D = d, aux_k = v, R1 = 1).
    """

    n: tuple[int, int]
    p_r1: tuple[float, float]
    p_r2: tuple[float, float]
    p_r2_given_r1: tuple[float | None, float | None]
    p_r2_given_aux: tuple[tuple[tuple[float | None, float | None], ...], ...]

    def __post_init__(self) -> None:
        for d in (0, 1):
            if self.n[d] <= 0:
                raise InputError(f"arm {d} has no units")
            for p in (self.p_r1[d], self.p_r2[d]):
                if not 0.0 <= p <= 1.0:
                    raise InputError(f"rate {p} outside [0, 1]")


def compute_rates(data: PanelDataset) -> RateTable:
    """Empirical response-rate table of ``data`` (proportions of counts)."""
    n: list[int] = []
    p_r1: list[float] = []
    p_r2: list[float] = []
    p_cond: list[float | None] = []
    p_aux: list[tuple[tuple[float | None, float | None], ...]] = []
    for d in (0, 1):
        arm = data.d == d
        n_d = int(arm.sum())
        if n_d == 0:
            raise InputError("single-arm dataset: both treated and control units are required")
        r1 = data.r1[arm]
        r2 = data.r2[arm]
        n.append(n_d)
        p_r1.append(float(r1.sum()) / n_d)
        p_r2.append(float(r2.sum()) / n_d)
        n_r1 = int(r1.sum())
        p_cond.append(float((r1 & r2).sum()) / n_r1 if n_r1 > 0 else None)
        per_k: list[tuple[float | None, float | None]] = []
        for k in range(data.n_aux):
            aux_k = data.aux[arm, k]
            levels: list[float | None] = []
            for v in (0, 1):
                cell = r1 & (aux_k == v)
                n_cell = int(cell.sum())
                levels.append(float((r2 & cell).sum()) / n_cell if n_cell > 0 else None)
            per_k.append((levels[0], levels[1]))
        p_aux.append(tuple(per_k))
    return RateTable(
        n=(n[0], n[1]),
        p_r1=(p_r1[0], p_r1[1]),
        p_r2=(p_r2[0], p_r2[1]),
        p_r2_given_r1=(p_cond[0], p_cond[1]),
        p_r2_given_aux=(p_aux[0], p_aux[1]),
    )


# -- CSV I/O ---------------------------------------------------------------


def load_panel(
    source: str | Path | bytes | IO[str] | IO[bytes],
    schema: ColumnMapping | None = None,
    outcome_support: tuple[float, float] | None = None,
) -> PanelDataset:
    """Read a CSV panel (header row required) into a validated PanelDataset.

    Empty cells and the literal "NA" (case-insensitive) denote missing
    outcomes; any other unparseable numeric is a hard error. Auxiliary
    indicator columns must contain only 0/1; auxiliary *variable* columns
    (schema.aux_variables) contribute the indicator 1{cell present} instead.
    """
    text = _as_text(source)
    try:
        rows = list(csv.reader(io.StringIO(text)))
    except csv.Error as exc:
        raise InputError(f"malformed CSV: {exc}") from exc
    rows = [row for row in rows if row]
    if not rows:
        raise InputError("empty dataset")
    header = [cell.strip() for cell in rows[0]]
    if len(set(header)) != len(header):
        raise InputError("malformed CSV: duplicate column names in header")
    mapping = schema if schema is not None else ColumnMapping.detect(header)
    col: dict[str, int] = {name: i for i, name in enumerate(header)}
    for name in (mapping.id, mapping.treatment, mapping.y1, mapping.y2):
        if name not in col:
            raise InputError(f"CSV header is missing required columns: {name}")
    for name in mapping.aux_indicators + mapping.aux_variables + mapping.covariates:
        if name not in col:
            raise InputError(f"CSV header is missing declared column: {name}")

    body = rows[1:]
    if not body:
        raise InputError("empty dataset")
    n = len(body)
    ids: list[str] = []
    d = np.empty(n, dtype=np.int8)
    y1 = np.empty(n, dtype=np.float64)
    y2 = np.empty(n, dtype=np.float64)
    n_aux = len(mapping.aux_indicators) + len(mapping.aux_variables)
    aux = np.zeros((n, n_aux), dtype=np.int8)
    n_x = len(mapping.covariates)
    x = np.zeros((n, n_x), dtype=np.int64) if n_x else None

    for i, row in enumerate(body):
        where = f"row {i + 2}"
        if len(row) != len(header):
            raise InputError(f"malformed CSV: {where} has {len(row)} cells, header has {len(header)}")
        ids.append(row[col[mapping.id]].strip())
        d_cell = row[col[mapping.treatment]].strip()
        if d_cell not in ("0", "1"):
            raise InputError(f"treatment must be 0 or 1, got {d_cell!r} ({where})")
        d[i] = int(d_cell)
        y1[i] = _parse_optional_float(row[col[mapping.y1]], f"{where}, column {mapping.y1}")
        y2[i] = _parse_optional_float(row[col[mapping.y2]], f"{where}, column {mapping.y2}")
        for k, name in enumerate(mapping.aux_indicators):
            cell = row[col[name]].strip()
            if cell not in ("0", "1"):
                raise InputError(
                    f"auxiliary indicator column {name} must contain only 0/1, "
                    f"got {cell!r} ({where})"
                )
            aux[i, k] = int(cell)
        for k, name in enumerate(mapping.aux_variables):
            value = _parse_optional_float(row[col[name]], f"{where}, column {name}")
            aux[i, len(mapping.aux_indicators) + k] = int(not math.isnan(value))
        for j, name in enumerate(mapping.covariates):
            cell = row[col[name]].strip()
            try:
                x[i, j] = int(cell)  # type: ignore[index]
            except ValueError:
                raise InputError(
                    f"covariate column {name} must contain integers, got {cell!r} ({where})"
                ) from None
            if x[i, j] < 0:  # type: ignore[index]
                raise InputError(
                    f"covariate column {name} must be non-negative, got {cell!r} ({where})"
                )

    return PanelDataset(
        d, y1, y2, aux=aux, x=x, unit_ids=tuple(ids), outcome_support=outcome_support
    )


def save_panel(data: PanelDataset, dest: str | Path | IO[str]) -> None:
    """Write ``data`` as CSV with the default column grammar.

    Column order: id, d, y1, y2, aux1..auxK, x1..xJ; missing outcomes are
    written as "NA". loading the output reproduces the dataset field by field.
    """
    header = ["id", "d", "y1", "y2"]
    header += [f"aux{k + 1}" for k in range(data.n_aux)]
    header += [f"x{j + 1}" for j in range(data.n_covariates)]

    def fmt(v: float) -> str:
        return "NA" if np.isnan(v) else repr(float(v))

    own = isinstance(dest, (str, Path))
    handle: IO[str] = open(dest, "w", newline="") if own else dest  # type: ignore[assignment]
    try:
        writer = csv.writer(handle)
        writer.writerow(header)
        ids = data.unit_ids
        for i in range(len(data)):
            row = [ids[i], str(int(data.d[i])), fmt(data.y1[i]), fmt(data.y2[i])]
            row += [str(int(v)) for v in data.aux[i]]
            if data.x is not None:
                row += [str(int(v)) for v in data.x[i]]
            writer.writerow(row)
    finally:
        if own:
            handle.close()


def _as_text(source: str | Path | bytes | IO[str] | IO[bytes]) -> str:
    """str/Path name a file; bytes or a file-like object carry CSV content."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise InputError(f"no such file: {path}")
        return path.read_text()
    if isinstance(source, bytes):
        return source.decode("utf-8")
    raw = source.read()
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw
