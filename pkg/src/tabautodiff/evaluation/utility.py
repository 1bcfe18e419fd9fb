"""Train-on-synthetic / test-on-real utility with a small set of built-in models."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn.dummy import DummyClassifier
from sklearn.linear_model import LinearRegression, LogisticRegression
from sklearn.metrics import accuracy_score, f1_score, mean_squared_error, r2_score, roc_auc_score
from sklearn.model_selection import train_test_split
from sklearn.neighbors import KNeighborsClassifier
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

log = logging.getLogger(__name__)

BINARY, MULTICLASS, REGRESSION = "binary", "multiclass", "regression"
TASKS = (BINARY, MULTICLASS, REGRESSION)


def logistic_regression(l2: float = 1.0, iterations: int = 1000, seed: int = 0):
    """``l2`` is the penalty strength (sklearn's ``C = 1 / l2``)."""
    return LogisticRegression(C=1.0 / l2, max_iter=iterations, random_state=seed)


def decision_tree(max_depth: int | None = 8, min_leaf: int = 1, seed: int = 0):
    # sklearn rejects max_depth=0; a depth-0 tree is the majority-class predictor
    if max_depth == 0:
        return DummyClassifier(strategy="most_frequent")
    return DecisionTreeClassifier(max_depth=max_depth, min_samples_leaf=min_leaf,
                                  random_state=seed)


def knn(k: int = 5):
    return KNeighborsClassifier(n_neighbors=k)


def linear_regression():
    return LinearRegression()


def tree_regressor(max_depth: int | None = 8, min_leaf: int = 1, seed: int = 0):
    return DecisionTreeRegressor(max_depth=max_depth, min_samples_leaf=min_leaf,
                                 random_state=seed)


CLASSIFIERS = {"logistic_regression": logistic_regression, "decision_tree": decision_tree,
               "knn": knn}
REGRESSORS = {"linear_regression": linear_regression, "tree_regressor": tree_regressor}


def builtin_model(name: str, seed: int = 0):
    if name in ("logistic_regression", "decision_tree", "tree_regressor"):
        return {**CLASSIFIERS, **REGRESSORS}[name](seed=seed)
    if name in CLASSIFIERS:
        return CLASSIFIERS[name]()
    if name in REGRESSORS:
        return REGRESSORS[name]()
    raise KeyError(f"unknown model {name!r}")


@dataclass
class TstrConfig:
    task: str
    split: float = 0.8
    models: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if not 0.0 < self.split < 1.0:
            raise ValueError("split ratio must lie in (0, 1)")
        if not self.models:
            self.models = tuple(REGRESSORS if self.task == REGRESSION else CLASSIFIERS)
        self.models = tuple(self.models)
        pool = REGRESSORS if self.task == REGRESSION else CLASSIFIERS
        bad = [m for m in self.models if m not in pool]
        if bad:
            raise ValueError(f"models {bad} do not fit task {self.task}")


class FeatureEncoder:
    """Standardized numericals (real-train statistics) and one-hot discrete columns
    (categories from the full real table; unseen values encode as all zeros)."""

    def __init__(self, numeric: list[str], discrete: list[str]):
        self.numeric, self.discrete = numeric, discrete

    def fit(self, train: pd.DataFrame, full_real: pd.DataFrame) -> "FeatureEncoder":
        X = train[self.numeric].to_numpy(np.float64)
        self.mean = X.mean(axis=0) if len(X) else np.zeros(len(self.numeric))
        std = X.std(axis=0) if len(X) else np.ones(len(self.numeric))
        self.std = np.where(std > 0, std, 1.0)
        self.cats = {c: sorted(set(full_real[c].tolist()), key=repr) for c in self.discrete}
        return self

    def transform(self, df: pd.DataFrame) -> np.ndarray:
        parts = [(df[self.numeric].to_numpy(np.float64) - self.mean) / self.std]
        for c in self.discrete:
            index = {v: i for i, v in enumerate(self.cats[c])}
            M = np.zeros((len(df), len(index)))
            for r, v in enumerate(df[c].tolist()):
                if v in index:
                    M[r, index[v]] = 1.0
            parts.append(M)
        return np.hstack(parts)


@dataclass
class TstrResult:
    task: str
    real: dict = field(default_factory=dict)       # model -> metrics (trained on real-train)
    synthetic: dict = field(default_factory=dict)  # model -> metrics (trained on synthetic)
    degenerate: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"task": self.task, "real": self.real, "synthetic": self.synthetic,
                "degenerate": self.degenerate}


def _classification_metrics(model, X, y, classes: list) -> tuple[dict, bool]:
    pred = model.predict(X)
    out = {"accuracy": float(accuracy_score(y, pred)),
           "macro_f1": float(f1_score(y, pred, average="macro", zero_division=0))}
    fitted = list(model.classes_)
    if len(fitted) < 2:
        return out, True
    proba = model.predict_proba(X)
    P = np.zeros((len(y), len(classes)))
    for j, c in enumerate(fitted):
        P[:, classes.index(c)] = proba[:, j]
    present = [k for k, c in enumerate(classes) if np.any(y == c) and not np.all(y == c)]
    if len(classes) == 2:
        if len(present) == 2:
            out["auroc"] = float(roc_auc_score(y == classes[1], P[:, 1]))
    elif present:
        out["auroc"] = float(np.mean([roc_auc_score(y == classes[k], P[:, k]) for k in present]))
    return out, False


def _regression_metrics(model, X, y) -> dict:
    pred = model.predict(X)
    return {"r2": float(r2_score(y, pred)),
            "rmse": float(np.sqrt(mean_squared_error(y, pred)))}


def split_real(real: pd.DataFrame, cfg: TstrConfig) -> tuple[pd.DataFrame, pd.DataFrame]:
    """The seeded (train, test) split of the real table used by :func:`tstr_evaluate`."""
    return train_test_split(real, train_size=cfg.split, random_state=cfg.seed, shuffle=True)


def tstr_evaluate(real: pd.DataFrame, syn: pd.DataFrame, target: str, cfg: TstrConfig,
                  numeric: list[str] | None = None) -> TstrResult:
    """Model A fits the real 80% split, model B fits the synthetic table; both are
    scored on the real 20% split.

    ``numeric`` lists the numerical feature columns; by default numeric dtypes.
    """
    if target not in real.columns or target not in syn.columns:
        raise KeyError(f"target column {target!r} not found")
    feats = [c for c in real.columns if c != target]
    if numeric is None:
        numeric = [c for c in feats if pd.api.types.is_numeric_dtype(real[c])]
    numeric = [c for c in feats if c in set(numeric)]
    discrete = [c for c in feats if c not in set(numeric)]
    train, test = split_real(real, cfg)
    enc = FeatureEncoder(numeric, discrete).fit(train, real)
    X_test = enc.transform(test)
    result = TstrResult(cfg.task)
    if cfg.task == REGRESSION:
        y_test = test[target].to_numpy(np.float64)
    else:
        classes = sorted(set(real[target].tolist()), key=repr)
        y_test = test[target].to_numpy()
        unknown = ~syn[target].isin(classes)
        if unknown.any():
            log.warning("dropping %d synthetic rows with unseen target labels", int(unknown.sum()))
            syn = syn[~unknown]
    for source, table in (("real", train), ("synthetic", syn)):
        X = enc.transform(table)
        y = table[target].to_numpy(np.float64 if cfg.task == REGRESSION else None)
        scores = {}
        for name in cfg.models:
            model = builtin_model(name, cfg.seed)
            if cfg.task == REGRESSION:
                model.fit(X, y)
                scores[name] = _regression_metrics(model, X_test, y_test)
                continue
            if len(set(y.tolist())) < 2:
                model = DummyClassifier(strategy="most_frequent")
            elif name == "knn":
                model.set_params(n_neighbors=min(model.n_neighbors, len(y)))
            model.fit(X, y)
            scores[name], degenerate = _classification_metrics(model, X_test, y_test, classes)
            if degenerate:
                result.degenerate.append(f"{source}:{name}")
        getattr(result, source).update(scores)
    return result
