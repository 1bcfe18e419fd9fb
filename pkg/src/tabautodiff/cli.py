"""Command line entry point: ``tabautodiff {fit,sample,evaluate,manifest}``.

Failures print one JSON object ``{"error": <category>, "message": ...}`` on
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .datasets import manifest
from .persist import FormatError, IncompatibleVersionError
from .schema import IngestionError, UnseenCategoryError

EXIT_CODES = {"config": 2, "ingestion": 3, "format": 4, "version": 5, "validation": 6,
              "io": 7, "internal": 1}


def _category(exc: BaseException) -> str:
    if isinstance(exc, pipeline.ConfigError):
        return "config"
    if isinstance(exc, (IngestionError, UnseenCategoryError)):
        return "ingestion"
    if isinstance(exc, IncompatibleVersionError):
        return "version"
    if isinstance(exc, FormatError):
        return "format"
    if isinstance(exc, (ValueError, KeyError)):
        return "validation"
    if isinstance(exc, OSError):
        return "io"
    return "internal"


def _parse_synthetic(items: list[str]) -> dict[str, list[str]]:
    """``NAME=path`` groups replicas under NAME; a bare path uses its file stem."""
    out: dict[str, list[str]] = {}
    for item in items:
        name, sep, path = item.partition("=")
        if not sep:
            name, path = Path(item).stem, item
        out.setdefault(name, []).append(path)
    return out


def cmd_fit(args) -> int:
    cfg = pipeline.RunConfig.load(args.config).to_dict() if args.config else {}
    for key in ("data", "target", "variant", "seed", "output_dir"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("output_dir", "run")
    out = pipeline.fit(pipeline.RunConfig.from_dict(cfg), overwrite=args.overwrite)
    print(json.dumps({"run_dir": str(out)}))
    return 0


def cmd_sample(args) -> int:
    table = pipeline.sample(args.model_dir, args.n_rows, args.seed, args.out)
    print(json.dumps({"csv": str(args.out), "rows": len(table), "seed": args.seed}))
    return 0


def cmd_evaluate(args) -> int:
    report = pipeline.evaluate(args.real, _parse_synthetic(args.synthetic), args.target,
                               args.output_dir, args.seed, args.task, args.dcr_normalized,
                               args.schema)
    print(json.dumps({"report_dir": str(args.output_dir), "models": list(report.scores)}))
    return 0


def cmd_manifest(args) -> int:
    print(json.dumps(manifest(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tabautodiff",
                                description="Latent diffusion / GAN synthesizer for mixed-type tables")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="train a model on a CSV file")
    f.add_argument("--config", help="JSON file with RunConfig fields")
    f.add_argument("--data", help="training CSV (overrides the config)")
    f.add_argument("--target")
    f.add_argument("--variant", choices=sorted(pipeline.VARIANTS))
    f.add_argument("--seed", type=int)
    f.add_argument("--output-dir", dest="output_dir")
    f.add_argument("--overwrite", action="store_true")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sample", help="write synthetic rows from a trained run")
    s.add_argument("model_dir")
    s.add_argument("--n-rows", dest="n_rows", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("evaluate", help="score synthetic CSVs against the real one")
    e.add_argument("--real", required=True)
    e.add_argument("--synthetic", action="append", required=True, metavar="[NAME=]CSV")
    e.add_argument("--target")
    e.add_argument("--task", choices=["binary", "multiclass", "regression"])
    e.add_argument("--schema", help="schema.json from a run directory")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--dcr-normalized", dest="dcr_normalized", action="store_true")
    e.add_argument("--output-dir", dest="output_dir", required=True)
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("manifest", help="list the benchmark datasets")
    m.set_defaults(func=cmd_manifest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as a JSON error category
        cat = _category(exc)
        print(json.dumps({"error": cat, "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return EXIT_CODES[cat]


if __name__ == "__main__":
    sys.exit(main())
