"""Marginal and joint fidelity metrics between a real and a synthetic table."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..schema import FeatureKind, TableSchema


def _normalize(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    return (x - lo) / span if span > 0 else x - lo


def wasserstein_1d(a, b, normalize_by: tuple[float, float] | None = None) -> float:
    """W1 between two empirical distributions.

    With ``normalize_by=(lo, hi)`` both samples are first min-max scaled with
    that range (the real column's range in :func:`column_wd`).
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("Wasserstein distance needs non-empty samples")
    if normalize_by is not None:
        a, b = _normalize(a, *normalize_by), _normalize(b, *normalize_by)
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    # integral of |F_a - F_b| over the merged support
    allv = np.concatenate([a, b])
    allv.sort(kind="mergesort")
    deltas = np.diff(allv)
    fa = np.searchsorted(a, allv[:-1], side="right") / a.size
    fb = np.searchsorted(b, allv[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * deltas))


def column_wd(real, syn) -> float:
    real = np.asarray(real, dtype=np.float64)
    return wasserstein_1d(real, syn, (float(real.min()), float(real.max())))


def js_divergence(p, q) -> float:
    """Jensen-Shannon divergence (base 2) between the empirical distributions of two
    categorical samples, over the union of observed categories."""
    p, q = list(p), list(q)
    if not p or not q:
        raise ValueError("JS divergence needs non-empty samples")
    cp, cq = Counter(p), Counter(q)
    support = sorted(set(cp) | set(cq), key=repr)
    P = np.array([cp[k] for k in support], dtype=np.float64) / len(p)
    Q = np.array([cq[k] for k in support], dtype=np.float64) / len(q)
    M = 0.5 * (P + Q)

    def kl(X):
        nz = X > 0
        return float(np.sum(X[nz] * np.log2(X[nz] / M[nz])))

    return float(min(max(0.5 * kl(P) + 0.5 * kl(Q), 0.0), 1.0))


def pearson_matrix(X) -> np.ndarray:
    """Pearson correlations of the columns of ``X``; pairs involving a constant
    column are 0 off the diagonal, and the diagonal is 1."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("Pearson matrix needs at least 2 rows")
    C = X - X.mean(axis=0)
    ss = np.sqrt(np.sum(C * C, axis=0))
    ok = ss > 0
    Z = np.zeros_like(C)
    Z[:, ok] = C[:, ok] / ss[ok]
    R = np.clip(Z.T @ Z, -1.0, 1.0)
    np.fill_diagonal(R, 1.0)
    return R


def _codes(x) -> np.ndarray:
    return pd.factorize(pd.Series(list(x), dtype=object), sort=False)[0]


def entropy(x) -> float:
    """Shannon entropy (natural log) of a categorical sample."""
    _, counts = np.unique(_codes(x), return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def conditional_entropy(x, y) -> float:
    """H(X | Y), natural log."""
    cx, cy = _codes(x), _codes(y)
    if cx.size != cy.size:
        raise ValueError("columns differ in length")
    ky = int(cy.max()) + 1
    pairs, jc = np.unique(cx.astype(np.int64) * ky + cy, return_counts=True)
    yc = np.bincount(cy)[pairs % ky]
    return float(-np.sum(jc / cx.size * np.log(jc / yc)))


def theils_u(x, y) -> float:
    """Uncertainty coefficient U(X|Y) = (H(X) - H(X|Y)) / H(X); 1 when X is constant."""
    hx = entropy(x)
    if hx == 0.0:
        return 1.0
    return float(min(max((hx - conditional_entropy(x, y)) / hx, 0.0), 1.0))


def theils_u_matrix(columns: list) -> np.ndarray:
    """Entry (i, j) is U(X_i | X_j)."""
    k = len(columns)
    U = np.ones((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                U[i, j] = theils_u(columns[i], columns[j])
    return U


def correlation_ratio(categories, values) -> float:
    """eta = sqrt(between-category sum of squares / total sum of squares); 0 for a
    constant numerical column."""
    v = np.asarray(values, dtype=np.float64)
    codes = _codes(categories)
    total = np.sum((v - v.mean()) ** 2)
    if total == 0.0:
        return 0.0
    n_c = np.bincount(codes)
    means = np.bincount(codes, weights=v) / n_c
    between = np.sum(n_c * (means - v.mean()) ** 2)
    return float(np.sqrt(min(max(between / total, 0.0), 1.0)))


def correlation_ratio_matrix(cat_columns: list, num_columns: list) -> np.ndarray:
    """Rows: categorical columns; columns: numerical columns."""
    M = np.zeros((len(cat_columns), len(num_columns)))
    for i, c in enumerate(cat_columns):
        for j, v in enumerate(num_columns):
            M[i, j] = correlation_ratio(c, v)
    return M


@dataclass
class CorrelationMatrices:
    pearson: np.ndarray
    theils_u: np.ndarray
    corr_ratio: np.ndarray
    num_names: list
    cat_names: list

    def kinds(self) -> dict[str, np.ndarray]:
        return {"pearson": self.pearson, "theils_u": self.theils_u,
                "corr_ratio": self.corr_ratio}


def split_columns(schema: TableSchema) -> tuple[list[str], list[str]]:
    num = [c.name for c in schema.columns if c.kind.is_numeric]
    cat = [c.name for c in schema.columns
           if c.kind in (FeatureKind.BINARY, FeatureKind.CATEGORICAL)]
    return num, cat


def correlation_matrices(table: pd.DataFrame, schema: TableSchema,
                         exclude: tuple[str, ...] = ()) -> CorrelationMatrices:
    num, cat = split_columns(schema)
    num = [c for c in num if c not in exclude]
    cat = [c for c in cat if c not in exclude]
    X = table[num].to_numpy(dtype=np.float64) if num else np.zeros((len(table), 0))
    pearson = pearson_matrix(X) if num else np.zeros((0, 0))
    cat_cols = [table[c].tolist() for c in cat]
    num_cols = [table[c].to_numpy(dtype=np.float64) for c in num]
    return CorrelationMatrices(
        pearson,
        theils_u_matrix(cat_cols),
        correlation_ratio_matrix(cat_cols, num_cols),
        num, cat,
    )


def corr_l2_diff(real: CorrelationMatrices, syn: CorrelationMatrices) -> dict[str, float]:
    """Frobenius norm of (real - synthetic) for each matrix kind."""
    out = {}
    for kind, R in real.kinds().items():
        S = syn.kinds()[kind]
        if R.shape != S.shape:
            raise ValueError(f"{kind}: shape {R.shape} != {S.shape}")
        out[kind] = float(np.sqrt(np.sum((R - S) ** 2)))
    return out


def marginal_scores(real: pd.DataFrame, syn: pd.DataFrame, schema: TableSchema,
                    exclude: tuple[str, ...] = ()) -> dict[str, dict[str, float]]:
    """Per-column normalized WD (numerical) and JS divergence (discrete)."""
    num, cat = split_columns(schema)
    wd = {c: column_wd(real[c].to_numpy(float), syn[c].to_numpy(float))
          for c in num if c not in exclude}
    js = {c: js_divergence(real[c].tolist(), syn[c].tolist()) for c in cat if c not in exclude}
    return {"wd": wd, "js": js}
