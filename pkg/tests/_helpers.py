"""Construction helpers and independent oracles shared by the test modules."""

from __future__ import annotations

import numpy as np

from didmiss import PanelDataset


def make_panel(
    d,
    y1,
    y2,
    aux=None,
    x=None,
    outcome_support=None,
    unit_ids=None,
) -> PanelDataset:
    """Build a PanelDataset from plain Python sequences (NaN marks missing)."""
    return PanelDataset(
        d=np.asarray(d, dtype=np.int8),
        y1=np.asarray(y1, dtype=np.float64),
        y2=np.asarray(y2, dtype=np.float64),
        aux=None if aux is None else np.asarray(aux, dtype=np.int8),
        x=None if x is None else np.asarray(x, dtype=np.int64),
        unit_ids=unit_ids,
        outcome_support=outcome_support,
    )


def brute_trimmed_mean(values, keep: float, side: str) -> float:
    """Independent fractional trimmed mean: explicit per-value weights.

    The i-th most extreme value receives weight min(1, max(0, keep*n - i));
    the result is the weighted mean. Shares no code with the library
    implementation (weights-vector formulation vs. partial-sum formulation).
    """
    v = np.sort(np.asarray(values, dtype=np.float64), kind="stable")
    if side == "top":
        v = v[::-1]
    t = keep * v.size
    w = np.clip(t - np.arange(v.size, dtype=np.float64), 0.0, 1.0)
    return float(np.dot(w, v) / t)


def block_panel(blocks, aux_width: int = 0, outcome_support=None) -> PanelDataset:
    """Expand (count, d, y1, y2[, aux...]) blocks into a PanelDataset.

    Each block repeats a row ``count`` times; y1/y2 may be None for missing.
    Useful for building exact-count fixtures whose rates are round fractions.
    """
    d, y1, y2, aux = [], [], [], []
    for block in blocks:
        count, arm, a, b = block[0], block[1], block[2], block[3]
        rest = list(block[4:]) + [0] * (aux_width - (len(block) - 4))
        for _ in range(count):
            d.append(arm)
            y1.append(np.nan if a is None else a)
            y2.append(np.nan if b is None else b)
            aux.append(rest[:aux_width])
    return make_panel(
        d,
        y1,
        y2,
        aux=aux if aux_width else None,
        outcome_support=outcome_support,
    )
