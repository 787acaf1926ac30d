"""External clustering quality scores: ARI, NMI, ACC and homogeneity.

All scores are computed from the contingency table of the two labelings and
are invariant to permutations of either side's cluster ids. ACC relies on an
optimal one-to-one matching between predicted clusters and true classes
solved as a rectangular linear assignment.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def _check_labels(labels_true, labels_pred) -> tuple[np.ndarray, np.ndarray]:
    lt = np.asarray(labels_true).ravel()
    lp = np.asarray(labels_pred).ravel()
    if lt.size != lp.size:
        raise ValueError(f"label length mismatch: {lt.size} vs {lp.size}")
    if lt.size < 2:
        raise ValueError("need at least 2 labeled points")
    return lt.astype(np.int64), lp.astype(np.int64)


def contingency_table(labels_true, labels_pred) -> np.ndarray:
    """K_true x K_pred matrix of co-occurrence counts."""
    lt, lp = _check_labels(labels_true, labels_pred)
    _, ti = np.unique(lt, return_inverse=True)
    _, pi = np.unique(lp, return_inverse=True)
    table = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(table, (ti, pi), 1)
    return table


def ari(labels_true, labels_pred) -> float:
    """Adjusted Rand index in [-1, 1] via pair counting.

    When the adjustment denominator is zero (both partitions trivial and
    identical) the score is 1 by convention.
    """
    table = contingency_table(labels_true, labels_pred)
    n = table.sum()

    def comb2(v):
        return v * (v - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(np.int64(n))
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(labels_true, labels_pred) -> float:
    """Mutual information normalized by the geometric mean of the entropies."""
    table = contingency_table(labels_true, labels_pred)
    n = table.sum()
    h_true = _entropy(table.sum(axis=1))
    h_pred = _entropy(table.sum(axis=0))
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    if h_true == 0.0 or h_pred == 0.0:
        return 0.0
    nz = table > 0
    p_joint = table[nz] / n
    p_outer = np.outer(table.sum(axis=1), table.sum(axis=0))[nz] / (n * n)
    mi = float((p_joint * np.log(p_joint / p_outer)).sum())
    return mi / np.sqrt(h_true * h_pred)


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Globally optimal min-cost assignment of min(r, c) row/column pairs."""
    cost = np.asarray(cost, dtype=np.float64)
    rows, cols = linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist()))


def acc(labels_true, labels_pred) -> float:
    """Clustering accuracy under the best cluster-to-class matching."""
    table = contingency_table(labels_true, labels_pred)
    matched = sum(table[r, c] for r, c in hungarian(-table.astype(np.float64)))
    return float(matched / table.sum())


def homogeneity(labels_true, labels_pred) -> float:
    """1 - H(true | pred) / H(true); 1.0 when the true labeling is trivial.

    Measures how pure each predicted cluster is in terms of true classes,
    so refining a partition can never lower it.
    """
    table = contingency_table(labels_true, labels_pred)
    n = table.sum()
    h_true = _entropy(table.sum(axis=1))
    if h_true == 0.0:
        return 1.0
    h_cond = 0.0
    for col in table.T:
        col_n = col.sum()
        if col_n > 0:
            h_cond += (col_n / n) * _entropy(col)
    return float(1.0 - h_cond / h_true)
