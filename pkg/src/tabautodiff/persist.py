"""Versioned on-disk container for :class:`~tabautodiff.nn.ParamSet`.

A container is two files sharing a stem: ``<stem>.json`` (format name,
version, tensor names/shapes, free-form metadata) and ``<stem>.bin`` (the
tensors as little-endian float32, concatenated in declaration order).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .nn import ParamSet

FORMAT_NAME = "tabautodiff-paramset"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """Container is malformed (bad manifest, truncated blob, ...)."""


class IncompatibleVersionError(FormatError):
    pass


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_params(stem, params: ParamSet, meta: dict | None = None) -> None:
    stem = Path(stem)
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dtype": "<f4",
        "tensors": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
        "meta": meta or {},
    }
    blob = b"".join(np.ascontiguousarray(v, dtype="<f4").tobytes() for _, v in params.items())
    write_json(stem.with_suffix(".json"), manifest)
    stem.with_suffix(".bin").write_bytes(blob)


def load_params(stem) -> tuple[ParamSet, dict]:
    stem = Path(stem)
    try:
        manifest = read_json(stem.with_suffix(".json"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{stem}.json: unreadable manifest ({exc})") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise FormatError(f"{stem}.json: not a {FORMAT_NAME} manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise IncompatibleVersionError(
            f"{stem}.json: format version {manifest.get('version')!r}, "
            f"this build reads version {FORMAT_VERSION}"
        )
    blob = stem.with_suffix(".bin").read_bytes()
    sizes = [int(np.prod(t["shape"], dtype=np.int64)) for t in manifest["tensors"]]
    if len(blob) != 4 * sum(sizes):
        raise FormatError(
            f"{stem}.bin: expected {4 * sum(sizes)} bytes, found {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    params = ParamSet()
    offset = 0
    for t, n in zip(manifest["tensors"], sizes):
        params[t["name"]] = flat[offset:offset + n].reshape(t["shape"])
        offset += n
    return params, manifest["meta"]
