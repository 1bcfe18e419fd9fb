"""Metric battery over (model, replica) grids, rank aggregation and report files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from ..schema import TableSchema, infer_schema
from .fidelity import CorrelationMatrices, correlation_matrices, corr_l2_diff, marginal_scores
from .privacy import mean_dcr
from .utility import REGRESSION, TstrConfig, tstr_evaluate

REPORT_FORMAT = "tabautodiff-report"
REPORT_VERSION = 1
LOWER, HIGHER = "lower-better", "higher-better"


class MissingScoresError(ValueError):
    pass


def rank_aggregate(scores: pd.DataFrame, direction: str = LOWER) -> pd.Series:
    """Average per-dataset rank of each model (rows: models, columns: datasets).

    Rank 1 is the best score; tied models share the mean of their ranks.
    """
    if direction not in (LOWER, HIGHER):
        raise ValueError(f"direction must be {LOWER!r} or {HIGHER!r}")
    values = scores.to_numpy(dtype=np.float64)
    missing = [(scores.index[i], scores.columns[j]) for i, j in zip(*np.nonzero(~np.isfinite(values)))]
    if missing:
        raise MissingScoresError(f"missing scores for (model, dataset) cells: {missing}")
    signed = values if direction == LOWER else -values
    ranks = np.column_stack([rankdata(signed[:, j], method="average")
                             for j in range(values.shape[1])])
    return pd.Series(ranks.mean(axis=1), index=scores.index, name="rank")


def _grid(M: np.ndarray, rows, cols) -> pd.DataFrame:
    return pd.DataFrame(M, index=list(rows), columns=list(cols))


def heatmap_frames(real: CorrelationMatrices, syn: CorrelationMatrices) -> dict[str, pd.DataFrame]:
    """Labeled real, synthetic and real-minus-synthetic grids for each matrix kind."""
    labels = {"pearson": (real.num_names, real.num_names),
              "theils_u": (real.cat_names, real.cat_names),
              "corr_ratio": (real.cat_names, real.num_names)}
    out = {}
    for kind, R in real.kinds().items():
        S = syn.kinds()[kind]
        rows, cols = labels[kind]
        out[f"{kind}_real"] = _grid(R, rows, cols)
        out[f"{kind}_synthetic"] = _grid(S, rows, cols)
        out[f"{kind}_difference"] = _grid(R - S, rows, cols)
    return out


def heatmap_export(real: CorrelationMatrices, syn: CorrelationMatrices, outdir,
                   prefix: str = "") -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, frame in heatmap_frames(real, syn).items():
        p = outdir / f"{prefix}{name}.csv"
        frame.to_csv(p)
        paths.append(p)
    return paths


def read_heatmap(path) -> pd.DataFrame:
    return pd.read_csv(path, index_col=0)


def _mean_dicts(dicts: list[dict]) -> dict:
    """Key-wise mean over replicas, skipping replicas where a key is absent."""
    keys = sorted({k for d in dicts for k in d})
    return {k: float(np.mean([d[k] for d in dicts if k in d])) for k in keys}


def _mean_matrices(ms: list[CorrelationMatrices]) -> CorrelationMatrices:
    first = ms[0]
    return CorrelationMatrices(
        np.mean([m.pearson for m in ms], axis=0), np.mean([m.theils_u for m in ms], axis=0),
        np.mean([m.corr_ratio for m in ms], axis=0), first.num_names, first.cat_names)


@dataclass
class ModelScores:
    wd: dict
    js: dict
    corr_l2: dict
    tstr_real: dict
    tstr_synthetic: dict
    mdcr: float
    degenerate: list = field(default_factory=list)

    @property
    def mean_wd(self) -> float:
        return float(np.mean(list(self.wd.values()))) if self.wd else 0.0

    @property
    def mean_js(self) -> float:
        return float(np.mean(list(self.js.values()))) if self.js else 0.0

    def to_dict(self) -> dict:
        return {"wd": self.wd, "js": self.js, "corr_l2": self.corr_l2,
                "tstr_real": self.tstr_real, "tstr_synthetic": self.tstr_synthetic,
                "mdcr": self.mdcr, "degenerate": self.degenerate}


@dataclass
class EvaluationReport:
    dataset: str
    target: str | None
    task: str | None
    replicas: dict            # model -> replica count
    scores: dict              # model -> ModelScores
    ranks: dict               # "wd" / "js" / "mdcr" -> {model: rank}
    heatmaps: dict = field(default_factory=dict, repr=False)  # model -> frames
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "version": REPORT_VERSION, "dataset": self.dataset,
                "target": self.target, "task": self.task, "replicas": self.replicas,
                "scores": {m: s.to_dict() for m, s in self.scores.items()},
                "ranks": self.ranks, "metadata": self.metadata}

    def table1(self) -> pd.DataFrame:
        rows = [{"model": m, "wd_rank": self.ranks["wd"][m], "js_rank": self.ranks["js"][m],
                 "pearson_l2": s.corr_l2["pearson"], "theils_u_l2": s.corr_l2["theils_u"],
                 "corr_ratio_l2": s.corr_l2["corr_ratio"]} for m, s in self.scores.items()]
        return pd.DataFrame(rows)

    def table2(self) -> pd.DataFrame:
        """Utility averaged over the built-in models; the Identity row trains on real data."""
        rows = []
        first = next(iter(self.scores.values()), None)
        if first is not None and first.tstr_real:
            rows.append({"model": "Identity", **_mean_dicts(list(first.tstr_real.values()))})
        for m, s in self.scores.items():
            if s.tstr_synthetic:
                rows.append({"model": m, **_mean_dicts(list(s.tstr_synthetic.values()))})
        return pd.DataFrame(rows)

    def table3(self) -> pd.DataFrame:
        return pd.DataFrame([{"model": m, "mdcr": s.mdcr, "mdcr_rank": self.ranks["mdcr"][m]}
                             for m, s in self.scores.items()])

    def write(self, outdir) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = [outdir / "report.json"]
        paths[0].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        for name, frame in (("table1", self.table1()), ("table2", self.table2()),
                            ("table3", self.table3())):
            p = outdir / f"{name}.csv"
            frame.to_csv(p, index=False)
            paths.append(p)
        for model, frames in self.heatmaps.items():
            for name, frame in frames.items():
                p = outdir / "heatmaps" / f"{model}_{name}.csv"
                p.parent.mkdir(exist_ok=True)
                frame.to_csv(p)
                paths.append(p)
        return paths


def score_replica(real: pd.DataFrame, syn: pd.DataFrame, schema: TableSchema,
                  real_corr: CorrelationMatrices, target: str | None, tstr: TstrConfig | None,
                  dcr_normalize: bool = False):
    syn = syn[list(real.columns)]
    marg = marginal_scores(real, syn, schema)
    syn_corr = correlation_matrices(syn, schema)
    numeric = [c.name for c in schema.columns if c.kind.is_numeric]
    res = tstr_evaluate(real, syn, target, tstr, numeric) if tstr is not None else None
    return marg, corr_l2_diff(real_corr, syn_corr), syn_corr, res, mean_dcr(real, syn, schema,
                                                                             dcr_normalize)


def evaluate_tables(real: pd.DataFrame, synthetic: dict[str, list[pd.DataFrame]],
                    target: str | None = None, task: str | None = None,
                    schema: TableSchema | None = None, seed: int = 0, dataset: str = "dataset",
                    dcr_normalize: bool = False) -> EvaluationReport:
    """Full metric battery for each model's replicas, averaged per model."""
    if not synthetic:
        raise ValueError("no synthetic tables given")
    schema = schema or infer_schema(real)
    for name, reps in synthetic.items():
        if not reps:
            raise ValueError(f"model {name!r} has no synthetic tables")
        for syn in reps:
            missing = sorted(set(real.columns) - set(syn.columns))
            if missing:
                raise ValueError(f"{name}: synthetic table lacks columns {missing}")
    if target is not None and task is None:
        kind = schema[target].kind
        task = (REGRESSION if kind.is_numeric
                else "binary" if schema[target].cardinality == 2 else "multiclass")
    tstr = TstrConfig(task, seed=seed) if target is not None else None
    real_corr = correlation_matrices(real, schema)
    scores, heatmaps = {}, {}
    for name in sorted(synthetic):
        per = [score_replica(real, s, schema, real_corr, target, tstr, dcr_normalize)
               for s in synthetic[name]]
        tstr_real, tstr_syn, flags = {}, {}, []
        if tstr is not None:
            for model in tstr.models:
                tstr_real[model] = _mean_dicts([p[3].real[model] for p in per])
                tstr_syn[model] = _mean_dicts([p[3].synthetic[model] for p in per])
            flags = sorted({f for p in per for f in p[3].degenerate})
        scores[name] = ModelScores(
            _mean_dicts([p[0]["wd"] for p in per]), _mean_dicts([p[0]["js"] for p in per]),
            _mean_dicts([p[1] for p in per]), tstr_real, tstr_syn,
            float(np.mean([p[4] for p in per])), flags)
        heatmaps[name] = heatmap_frames(real_corr, _mean_matrices([p[2] for p in per]))
    models = list(scores)
    frame = lambda vals: pd.DataFrame({dataset: vals}, index=models)  # noqa: E731
    ranks = {
        "wd": rank_aggregate(frame([scores[m].mean_wd for m in models]), LOWER).to_dict(),
        "js": rank_aggregate(frame([scores[m].mean_js for m in models]), LOWER).to_dict(),
        # a high MDCR rank number means a low MDCR (closer to the real rows)
        "mdcr": rank_aggregate(frame([scores[m].mdcr for m in models]), HIGHER).to_dict(),
    }
    meta = {
        "rank_averaging": "per-dataset mean of per-column values, then ranked",
        "theils_u_orientation": "entry (i, j) is U(X_i | X_j)",
        "wd_normalization": "min-max by the real column range",
        "dcr_space": "normalized" if dcr_normalize else "raw numericals + one-hot",
        "seed": seed,
    }
    return EvaluationReport(dataset, target, task, {m: len(synthetic[m]) for m in models},
                            scores, ranks, heatmaps, meta)


def load_report(path) -> dict:
    d = json.loads(Path(path).read_text())
    if d.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path}: not a {REPORT_FORMAT} document")
    if d.get("version") != REPORT_VERSION:
        raise ValueError(f"{path}: report version {d.get('version')} != {REPORT_VERSION}")
    return d
