"""Feature typing, pre-processing and post-processing of raw tables.

Columns are typed as numerical, binary, categorical or mixed (numerical
with frequently repeated values). ``preprocess`` lays a table out as one
real matrix ``[numerical | binary | categorical]``; ``postprocess`` turns
decoded blocks back into a table with the original columns and values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .scalers import MinMaxScaler, fit_scaler, scaler_from_dict

log = logging.getLogger(__name__)

SCHEMA_FORMAT = "tabautodiff-schema"
SCHEMA_VERSION = 1
MISSING_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "NULL", "null", "None"})
DUMMY_SUFFIX = "__mixed"


class IngestionError(ValueError):
    pass


class UnseenCategoryError(ValueError):
    def __init__(self, column: str, value):
        super().__init__(f"column {column!r}: value {value!r} was not seen when fitting")
        self.column = column
        self.value = value


class FeatureKind(str, Enum):
    NUMERICAL = "numerical"
    BINARY = "binary"
    CATEGORICAL = "categorical"
    MIXED = "mixed"

    @property
    def is_numeric(self) -> bool:
        return self in (FeatureKind.NUMERICAL, FeatureKind.MIXED)


# --------------------------------------------------------------------------
# Ingestion


def _parse_numeric(cells: pd.Series):
    try:
        vals = pd.to_numeric(cells, errors="raise").astype(np.float64)
    except (ValueError, TypeError):
        return None
    return vals


def _finish_numeric(name: str, vals: pd.Series) -> pd.Series:
    if not np.all(np.isfinite(vals.to_numpy())):
        raise IngestionError(f"column {name!r}: contains infinite values")
    arr = vals.to_numpy()
    if np.all(arr == np.round(arr)) and np.all(np.abs(arr) < 2**53):
        return vals.astype(np.int64)
    return vals


def read_csv(path) -> pd.DataFrame:
    """Read a headered UTF-8 CSV.

    A column is numeric when every non-empty cell parses as a number, and
    integer-typed when every value is integral. Rows with a missing cell are
    dropped.
    """
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False,
                          encoding="utf-8")
    except (UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    if raw.shape[1] == 0:
        raise IngestionError(f"{path}: no header row")
    raw = raw.apply(lambda s: s.str.strip())
    missing = raw.isin(MISSING_TOKENS).any(axis=1)
    if missing.any():
        log.warning("%s: dropped %d rows with missing cells", path, int(missing.sum()))
        raw = raw.loc[~missing].reset_index(drop=True)
    out = {}
    for name in raw.columns:
        vals = _parse_numeric(raw[name])
        out[name] = raw[name].astype(object) if vals is None else _finish_numeric(name, vals)
    return pd.DataFrame(out, columns=list(raw.columns))


def coerce_table(df: pd.DataFrame) -> pd.DataFrame:
    """Normalise an in-memory table: text columns as ``object`` of ``str``,
    numeric columns as int64 (integral) or float64. Missing rows are dropped;
    a column mixing text and numbers is rejected."""
    if not isinstance(df, pd.DataFrame):
        raise IngestionError("expected a pandas DataFrame")
    if df.shape[1] == 0:
        raise IngestionError("table has no columns")
    missing = df.isna().any(axis=1)
    if missing.any():
        log.warning("dropped %d rows with missing cells", int(missing.sum()))
        df = df.loc[~missing].reset_index(drop=True)
    out = {}
    for name in df.columns:
        col = df[name]
        if pd.api.types.is_bool_dtype(col):
            out[name] = col.astype(np.int64)
        elif pd.api.types.is_numeric_dtype(col):
            out[name] = _finish_numeric(name, col.astype(np.float64))
        else:
            is_text = col.map(lambda v: isinstance(v, str))
            if is_text.all():
                out[name] = col.astype(object)
            elif not is_text.any():
                vals = _parse_numeric(col)
                if vals is None:
                    raise IngestionError(f"column {name!r}: unsupported cell types")
                out[name] = _finish_numeric(name, vals)
            else:
                raise IngestionError(f"column {name!r}: mixes text and number cells")
    return pd.DataFrame(out, columns=list(df.columns))


def _source_type(col: pd.Series) -> str:
    if col.dtype == object:
        return "text"
    return "int" if pd.api.types.is_integer_dtype(col) else "float"


# --------------------------------------------------------------------------
# Schema


@dataclass
class ColumnSpec:
    name: str
    kind: FeatureKind
    source: str  # "text" | "int" | "float"
    categories: list | None = None
    scaler: object | None = None
    repeated: list | None = None
    repeated_counts: list | None = None
    clamp: tuple[float, float] | None = None

    @property
    def cardinality(self) -> int:
        return len(self.categories) if self.categories is not None else 0

    @property
    def dummy_name(self) -> str:
        return self.name + DUMMY_SUFFIX

    def code_of(self, values) -> np.ndarray:
        lut = {v: i for i, v in enumerate(self.categories)}
        codes = np.empty(len(values), dtype=np.int64)
        for i, v in enumerate(values):
            try:
                codes[i] = lut[v]
            except KeyError:
                raise UnseenCategoryError(self.name, v) from None
        return codes

    def dummy_labels(self, values) -> np.ndarray:
        """0 for ordinary values, k for the k-th repeated value."""
        lut = {v: k + 1 for k, v in enumerate(self.repeated)}
        return np.array([lut.get(float(v), 0) for v in values], dtype=np.int64)

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind.value, "source": self.source}
        if self.categories is not None:
            d["categories"] = list(self.categories)
        if self.scaler is not None:
            d["scaler"] = self.scaler.to_dict()
        if self.repeated is not None:
            d["repeated"] = list(self.repeated)
            d["repeated_counts"] = list(self.repeated_counts)
        if self.clamp is not None:
            d["clamp"] = list(self.clamp)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnSpec":
        return cls(
            name=d["name"],
            kind=FeatureKind(d["kind"]),
            source=d["source"],
            categories=d.get("categories"),
            scaler=scaler_from_dict(d["scaler"]) if "scaler" in d else None,
            repeated=d.get("repeated"),
            repeated_counts=d.get("repeated_counts"),
            clamp=tuple(d["clamp"]) if "clamp" in d else None,
        )


@dataclass(frozen=True)
class Layout:
    """Column order of the processed matrix ``[num | bin | cat]``."""

    num: tuple[str, ...]
    bin: tuple[str, ...]
    cat: tuple[str, ...]
    cat_sizes: tuple[int, ...]

    @property
    def n_num(self) -> int:
        return len(self.num)

    @property
    def n_bin(self) -> int:
        return len(self.bin)

    @property
    def n_cat(self) -> int:
        return len(self.cat)

    @property
    def width(self) -> int:
        return self.n_num + self.n_bin + self.n_cat

    @property
    def num_slice(self) -> slice:
        return slice(0, self.n_num)

    @property
    def bin_slice(self) -> slice:
        return slice(self.n_num, self.n_num + self.n_bin)

    @property
    def cat_slice(self) -> slice:
        return slice(self.n_num + self.n_bin, self.width)


@dataclass
class TableSchema:
    columns: list[ColumnSpec]
    scaler_kind: str = "minmax"
    distinct_threshold: int = 25
    h_percent: float = 1.0
    n_rows: int = 0

    def __post_init__(self):
        self._by_name = {c.name: c for c in self.columns}

    def __getitem__(self, name: str) -> ColumnSpec:
        return self._by_name[name]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def kinds(self) -> dict[str, FeatureKind]:
        return {c.name: c.kind for c in self.columns}

    @property
    def layout(self) -> Layout:
        num = [c for c in self.columns if c.kind.is_numeric]
        bins = [c for c in self.columns if c.kind is FeatureKind.BINARY]
        cats = [c for c in self.columns if c.kind is FeatureKind.CATEGORICAL]
        mixed = [c for c in self.columns if c.kind is FeatureKind.MIXED]
        return Layout(
            num=tuple(c.name for c in num),
            bin=tuple(c.name for c in bins),
            cat=tuple(c.name for c in cats) + tuple(c.dummy_name for c in mixed),
            cat_sizes=tuple(c.cardinality for c in cats) + tuple(len(c.repeated) + 1 for c in mixed),
        )

    def clamp_bounds(self) -> np.ndarray:
        """(n_num, 2) array of processed-scale [min, max] per numerical column."""
        num = [c for c in self.columns if c.kind.is_numeric]
        return np.array([c.clamp for c in num], dtype=np.float64).reshape(len(num), 2)

    def to_dict(self) -> dict:
        return {
            "format": SCHEMA_FORMAT,
            "version": SCHEMA_VERSION,
            "scaler_kind": self.scaler_kind,
            "distinct_threshold": self.distinct_threshold,
            "h_percent": self.h_percent,
            "n_rows": self.n_rows,
            "columns": [c.to_dict() for c in self.columns],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TableSchema":
        from .persist import FormatError, IncompatibleVersionError

        if d.get("format") != SCHEMA_FORMAT:
            raise FormatError("not a schema document")
        if d.get("version") != SCHEMA_VERSION:
            raise IncompatibleVersionError(
                f"schema version {d.get('version')!r}, expected {SCHEMA_VERSION}")
        return cls(
            columns=[ColumnSpec.from_dict(c) for c in d["columns"]],
            scaler_kind=d["scaler_kind"],
            distinct_threshold=d["distinct_threshold"],
            h_percent=d["h_percent"],
            n_rows=d["n_rows"],
        )

    def save(self, path) -> None:
        from .persist import write_json

        write_json(Path(path), self.to_dict())

    @classmethod
    def load(cls, path) -> "TableSchema":
        from .persist import read_json

        return cls.from_dict(read_json(Path(path)))


def _sorted_unique(values: pd.Series) -> list:
    uniq = pd.unique(values)
    if values.dtype == object:
        return sorted(str(v) for v in uniq)
    return sorted(int(v) for v in uniq)


def repeated_values(values, h_percent: float, n_rows: int | None = None):
    """Values occurring in strictly more than ``h_percent`` % of rows (and at
    least twice), most frequent first (ties: ascending value).
    Returns (values, counts)."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size if n_rows is None else n_rows
    uniq, counts = np.unique(v, return_counts=True)
    keep = (counts > h_percent / 100.0 * n) & (counts >= 2)
    uniq, counts = uniq[keep], counts[keep]
    order = np.lexsort((uniq, -counts))
    return [float(x) for x in uniq[order]], [int(c) for c in counts[order]]


def infer_schema(table: pd.DataFrame, distinct_threshold: int = 25, h_percent: float = 1.0,
                 scaler: str = "minmax", n_quantiles: int = 1000) -> TableSchema:
    """Type every column and fit its codec.

    Text columns and integer columns with at most ``distinct_threshold``
    distinct values are discrete (binary when exactly two values). Other
    numeric columns are numerical, and become mixed when some value occurs
    in more than ``h_percent`` % of rows.
    """
    table = coerce_table(table)
    n = len(table)
    if n == 0:
        raise IngestionError("table has no rows")
    columns = []
    for name in table.columns:
        col = table[name]
        source = _source_type(col)
        nunique = col.nunique()
        if source == "text" or (source == "int" and nunique <= distinct_threshold):
            kind = FeatureKind.BINARY if nunique == 2 else FeatureKind.CATEGORICAL
            columns.append(ColumnSpec(name, kind, source, categories=_sorted_unique(col)))
            continue
        vals = col.to_numpy(dtype=np.float64)
        reps, counts = repeated_values(vals, h_percent, n)
        kind = FeatureKind.MIXED if reps else FeatureKind.NUMERICAL
        if scaler == "quantile" and vals.size < 2:
            sc = MinMaxScaler.fit(vals)
        else:
            sc = fit_scaler(scaler, vals, n_quantiles)
        lo, hi = sc.transform(np.array([vals.min(), vals.max()]))
        columns.append(ColumnSpec(
            name, kind, source, scaler=sc,
            repeated=reps if reps else None,
            repeated_counts=counts if reps else None,
            clamp=(float(lo), float(hi)),
        ))
    return TableSchema(columns, scaler, distinct_threshold, h_percent, n)


# --------------------------------------------------------------------------
# Processed / decoded representations


@dataclass
class DecodedBlocks:
    """Decoder output ready for postprocessing: scaled numerical values and
    integer labels for binary and categorical (incl. mixed dummy) columns."""

    num: np.ndarray
    bin: np.ndarray
    cat: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.num.shape[0]


@dataclass
class ProcessedTable:
    matrix: np.ndarray
    layout: Layout
    schema: TableSchema = field(repr=False)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num(self) -> np.ndarray:
        return self.matrix[:, self.layout.num_slice]

    @property
    def bin(self) -> np.ndarray:
        return self.matrix[:, self.layout.bin_slice]

    @property
    def cat_codes(self) -> np.ndarray:
        scale = np.array([max(k - 1, 1) for k in self.layout.cat_sizes], dtype=np.float64)
        return np.rint(self.matrix[:, self.layout.cat_slice] * scale).astype(np.int64)

    def to_decoded(self) -> DecodedBlocks:
        return DecodedBlocks(self.num.copy(), np.rint(self.bin).astype(np.int64), self.cat_codes)


def preprocess(table: pd.DataFrame, schema: TableSchema) -> ProcessedTable:
    table = coerce_table(table)
    if list(table.columns) != schema.names:
        raise IngestionError(
            f"columns {list(table.columns)} do not match schema columns {schema.names}")
    layout = schema.layout
    n = len(table)
    num, bins, cats, dummies = [], [], [], []
    for c in schema.columns:
        col = table[c.name]
        if c.kind.is_numeric:
            if _source_type(col) == "text":
                raise IngestionError(f"column {c.name!r}: expected numbers, found text")
            vals = col.to_numpy(dtype=np.float64)
            num.append(np.clip(c.scaler.transform(vals), *c.clamp))
            if c.kind is FeatureKind.MIXED:
                k = len(c.repeated) + 1
                dummies.append(c.dummy_labels(vals) / (k - 1))
        else:
            values = col.tolist()
            if c.source == "int":
                values = [int(v) for v in values]
            elif c.source == "text":
                values = [str(v) for v in values]
            codes = c.code_of(values)
            if c.kind is FeatureKind.BINARY:
                bins.append(codes.astype(np.float64))
            else:
                k = c.cardinality
                cats.append(codes / (k - 1) if k > 1 else np.zeros(n))
    blocks = num + bins + cats + dummies
    matrix = np.column_stack(blocks) if blocks else np.zeros((n, 0))
    assert matrix.shape[1] == layout.width
    return ProcessedTable(matrix.astype(np.float64), layout, schema)


def postprocess(decoded: DecodedBlocks, schema: TableSchema) -> pd.DataFrame:
    """Invert scaling, map labels back to original values and merge mixed columns."""
    layout = schema.layout
    n = decoded.n_rows
    num_idx = {name: i for i, name in enumerate(layout.num)}
    bin_idx = {name: i for i, name in enumerate(layout.bin)}
    cat_idx = {name: i for i, name in enumerate(layout.cat)}
    out = {}
    for c in schema.columns:
        if c.kind.is_numeric:
            vals = c.scaler.inverse(decoded.num[:, num_idx[c.name]])
            if c.kind is FeatureKind.MIXED:
                labels = np.asarray(decoded.cat[:, cat_idx[c.dummy_name]], dtype=np.int64)
                k = len(c.repeated)
                if np.any(labels > k) or np.any(labels < 0):
                    raise ValueError(
                        f"column {c.name!r}: dummy label outside 0..{k}")
                reps = np.asarray([np.nan, *c.repeated])
                vals = np.where(labels > 0, reps[labels], vals)
            if c.source == "int":
                vals = np.rint(vals).astype(np.int64)
            out[c.name] = vals
        else:
            block = decoded.bin[:, bin_idx[c.name]] if c.kind is FeatureKind.BINARY \
                else decoded.cat[:, cat_idx[c.name]]
            codes = np.asarray(block, dtype=np.int64)
            if np.any(codes < 0) or np.any(codes >= c.cardinality):
                raise ValueError(f"column {c.name!r}: label outside 0..{c.cardinality - 1}")
            cats = np.empty(c.cardinality, dtype=object)
            cats[:] = c.categories
            vals = cats[codes]
            out[c.name] = vals.astype(np.int64) if c.source == "int" else vals
    return pd.DataFrame(out, columns=schema.names, index=pd.RangeIndex(n))
