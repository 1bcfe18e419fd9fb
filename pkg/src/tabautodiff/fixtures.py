"""Small synthetic tables shaped like the benchmark datasets, for tests and demos."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .nn import make_rng

COLORS = ("red", "green", "blue", "yellow")


def mixed_fixture(n_rows: int = 1000, seed: int = 0) -> pd.DataFrame:
    """Two numerical columns, one binary, one categorical (K=4), one mixed-type.

    ``balance`` is exactly 0 in about 30% of rows and exactly 1000 in about 10%;
    the rest is continuous and tied to ``income``.
    """
    rng = make_rng(seed, 101)
    code = rng.choice(4, size=n_rows, p=[0.4, 0.3, 0.2, 0.1])
    age = np.round(30.0 + 6.0 * code + rng.normal(0.0, 8.0, n_rows), 2)
    income = np.round(1500.0 + 45.0 * age + rng.normal(0.0, 300.0, n_rows), 2)
    zi = (income - income.mean()) / income.std()
    p_member = 1.0 / (1.0 + np.exp(-(1.5 * zi + 1.2 * (code - 1.0))))
    member = np.where(rng.random(n_rows) < p_member, "yes", "no")
    u = rng.random(n_rows)
    cont = np.round(income * rng.uniform(0.5, 3.0, n_rows), 2)
    balance = np.where(u < 0.3, 0.0, np.where(u < 0.4, 1000.0, cont))
    return pd.DataFrame({
        "age": age,
        "income": income,
        "member": member,
        "color": np.array(COLORS)[code],
        "balance": balance,
    })


def classification_fixture(n_rows: int = 600, seed: int = 0, n_classes: int = 3) -> pd.DataFrame:
    rng = make_rng(seed, 102)
    y = rng.integers(0, n_classes, n_rows)
    x1 = rng.normal(y * 1.5, 1.0)
    x2 = rng.normal(-y * 0.7, 1.0)
    grp = np.where(rng.random(n_rows) < 0.5 + 0.1 * y, "a", "b")
    return pd.DataFrame({"x1": np.round(x1, 3), "x2": np.round(x2, 3), "grp": grp,
                         "target": np.array([f"c{k}" for k in range(n_classes)])[y]})


def regression_fixture(n_rows: int = 600, seed: int = 0) -> pd.DataFrame:
    rng = make_rng(seed, 103)
    x1 = rng.normal(0.0, 1.0, n_rows)
    x2 = rng.uniform(-2.0, 2.0, n_rows)
    grp = rng.choice(["p", "q", "r"], n_rows)
    shift = np.select([grp == "p", grp == "q"], [1.0, -1.0], 0.0)
    y = 2.0 * x1 - 0.5 * x2 + shift + rng.normal(0.0, 0.3, n_rows)
    return pd.DataFrame({"x1": np.round(x1, 3), "x2": np.round(x2, 3), "grp": grp,
                         "target": np.round(y, 3)})


def write_fixture_csv(path, n_rows: int = 1000, seed: int = 0) -> pd.DataFrame:
    df = mixed_fixture(n_rows, seed)
    df.to_csv(path, index=False)
    return df
