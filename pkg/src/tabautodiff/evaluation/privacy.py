"""Distance to closest record (DCR)."""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from ..schema import TableSchema


def dcr_encode(real: pd.DataFrame, syn: pd.DataFrame, schema: TableSchema | None = None,
               normalize: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Raw numerical values plus unscaled one-hot discrete columns.

    Without a schema, numeric dtypes count as numerical and everything else as
    discrete. ``normalize=True`` min-max scales numericals by the real range.
    """
    if list(real.columns) != list(syn.columns):
        raise ValueError("real and synthetic tables have different columns")
    if schema is not None:
        numeric = {c.name for c in schema.columns if c.kind.is_numeric}
    else:
        numeric = {c for c in real.columns if pd.api.types.is_numeric_dtype(real[c])}
    R, S = [], []
    for col in real.columns:
        if col in numeric:
            r = real[col].to_numpy(np.float64)
            s = syn[col].to_numpy(np.float64)
            if normalize:
                lo, hi = r.min(), r.max()
                span = hi - lo if hi > lo else 1.0
                r, s = (r - lo) / span, (s - lo) / span
            R.append(r[:, None])
            S.append(s[:, None])
        else:
            cats = sorted(set(real[col].tolist()) | set(syn[col].tolist()), key=repr)
            index = {c: i for i, c in enumerate(cats)}
            eye = np.eye(len(cats))
            R.append(eye[[index[v] for v in real[col].tolist()]])
            S.append(eye[[index[v] for v in syn[col].tolist()]])
    return np.hstack(R), np.hstack(S)


def dcr_matrix(R, S) -> np.ndarray:
    """Per synthetic row, the minimum Euclidean distance to any real row."""
    R = np.asarray(R, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if R.shape[0] == 0 or S.shape[0] == 0:
        raise ValueError("DCR needs non-empty tables")
    dist, _ = cKDTree(R).query(S, k=1)
    return np.asarray(dist, dtype=np.float64)


def dcr(real: pd.DataFrame, syn: pd.DataFrame, schema: TableSchema | None = None,
        normalize: bool = False) -> np.ndarray:
    return dcr_matrix(*dcr_encode(real, syn, schema, normalize))


def mean_dcr(real: pd.DataFrame, syn: pd.DataFrame, schema: TableSchema | None = None,
             normalize: bool = False) -> float:
    return float(np.mean(dcr(real, syn, schema, normalize)))

