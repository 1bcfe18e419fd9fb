"""fit / sample / evaluate orchestration and the on-disk run directory.

A run directory holds ``manifest.json`` (resolved config, seeds, loss
curves), ``schema.json``, ``autoencoder.{json,bin}`` and
``generator.{json,bin}`` (a diffusion bundle or a GAN).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import nn
from .autoencoder import HETEROGENEOUS, MED_MSE, AutoencoderModel, AutoencoderSpec, decode, encode
from .autoencoder import train_autoencoder
from .diffusion import DiffusionBundle, SamplerConfig, euler_maruyama_sample, train_diffusion
from .evaluation import evaluate_tables
from .gan import GanModel, GanSpec, gan_sample, train_gan
from .persist import read_json, write_json
from .schema import TableSchema, infer_schema, postprocess, preprocess, read_csv
from .scorenet import ScoreNetSpec
from .sde import SdeConfig

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "tabautodiff-run"
MANIFEST_VERSION = 1

STASY_AUTODIFF = "StasyAutoDiff"
TAB_AUTODIFF = "TabAutoDiff"
MED_AUTODIFF = "MedAutoDiff"
AUTOGAN = "AutoGan"

# variant -> (scaler, autoencoder loss, generator)
VARIANTS = {
    STASY_AUTODIFF: ("minmax", HETEROGENEOUS, "stasy"),
    TAB_AUTODIFF: ("quantile", HETEROGENEOUS, "tab"),
    MED_AUTODIFF: ("minmax", MED_MSE, "tab"),
    AUTOGAN: ("minmax", MED_MSE, "gan"),
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: str = ""
    target: str | None = None
    variant: str = TAB_AUTODIFF
    output_dir: str = "run"
    seed: int = 0
    # None means "take the variant default"
    scaler: str | None = None
    ae_loss: str | None = None
    # schema
    distinct_threshold: int = 25
    h_percent: float = 1.0
    n_quantiles: int = 1000
    # autoencoder
    ae_hidden: int = 250
    ae_enc_blocks: int = 2
    ae_dec_blocks: int = 2
    ae_epochs: int = 1000
    ae_batch_size: int = 256
    ae_lr: float = 1e-3
    ae_lr_final: float = 0.1
    # diffusion
    beta_min: float = 0.1
    beta_max: float = 20.0
    sde_eps: float = 1e-5
    weighting: str = "sigma"
    std_convention: str = "standard"
    diff_steps: int = 20000
    diff_batch_size: int = 256
    diff_lr: float = 1e-3
    ema_decay: float = 0.999
    stasy_widths: list = field(default_factory=lambda: [256, 512, 1024, 512, 256])
    tab_dim: int = 128
    tab_blocks: int = 4
    tab_dropout: float = 0.0
    sampler_steps: int = 1000
    sampler_batch_size: int = 10000
    # GAN
    gan_steps: int = 5000
    gan_batch_size: int = 256
    gan_hidden: int = 128
    gan_blocks: int = 2
    disc_layers: int = 2
    g_lr: float = 2e-4
    d_lr: float = 2e-4
    gan_beta1: float = 0.5
    # evaluation
    replicas: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {sorted(VARIANTS)}, got {self.variant!r}")
        scaler, loss, _ = VARIANTS[self.variant]
        if self.scaler is None:
            self.scaler = scaler
        if self.ae_loss is None:
            self.ae_loss = loss
        if self.scaler not in ("minmax", "quantile"):
            raise ConfigError(f"scaler must be 'minmax' or 'quantile', got {self.scaler!r}")
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        self.stasy_widths = [int(w) for w in self.stasy_widths]

    @property
    def generator(self) -> str:
        return VARIANTS[self.variant][2]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: cannot read config ({exc})") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)

    def sde_config(self) -> SdeConfig:
        return SdeConfig(self.beta_min, self.beta_max, self.sde_eps, 1.0, self.weighting,
                         self.std_convention)

    def score_spec(self, width: int) -> ScoreNetSpec:
        return ScoreNetSpec(self.generator, width, tuple(self.stasy_widths), self.tab_dim,
                            self.tab_blocks, self.tab_dropout)

    def gan_spec(self, width: int) -> GanSpec:
        return GanSpec(width, 0, self.gan_hidden, self.gan_blocks, self.disc_layers, self.g_lr,
                       self.d_lr, self.gan_beta1)


def _curve(losses, points: int = 200) -> list[float]:
    """Loss curve averaged into at most ``points`` buckets for the manifest."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size <= points:
        return [float(v) for v in losses]
    return [float(c.mean()) for c in np.array_split(losses, points)]


def _finish_dir(tmp: Path, out: Path, overwrite: bool) -> None:
    if out.exists():
        if not overwrite:
            raise FileExistsError(f"{out} already exists")
        trash = out.with_name(f".{out.name}.old-{os.getpid()}")
        out.rename(trash)
        tmp.rename(out)
        shutil.rmtree(trash)
    else:
        tmp.rename(out)


def fit(cfg: RunConfig, overwrite: bool = False) -> Path:
    """Train the autoencoder and the latent generator; returns the run directory.

    Everything is built in a sibling temporary directory and renamed into
    place at the end, so a failure leaves nothing behind.
    """
    out = Path(cfg.output_dir)
    if out.exists() and not overwrite:
        raise FileExistsError(f"{out} already exists")
    table = read_csv(cfg.data)
    if cfg.target is not None and cfg.target not in table.columns:
        raise ConfigError(f"target column {cfg.target!r} not in {list(table.columns)}")
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.tmp-", dir=out.parent))
    try:
        schema = infer_schema(table, cfg.distinct_threshold, cfg.h_percent, cfg.scaler,
                              cfg.n_quantiles)
        processed = preprocess(table, schema)
        width = processed.layout.width
        ae_spec = AutoencoderSpec(width, cfg.ae_hidden, cfg.ae_enc_blocks, cfg.ae_dec_blocks,
                                  cfg.ae_loss)
        log.info("training autoencoder: %d rows, width %d", processed.n_rows, width)
        ae, ae_losses = train_autoencoder(processed, ae_spec, cfg.ae_epochs, cfg.ae_batch_size,
                                          nn.make_rng(cfg.seed, 1), cfg.ae_lr,
                                          lr_final=cfg.ae_lr_final)
        latents = encode(ae, processed)
        gen_rng = nn.make_rng(cfg.seed, 2)
        if cfg.generator == "gan":
            log.info("training GAN for %d steps", cfg.gan_steps)
            gen, d_losses, g_losses = train_gan(latents, cfg.gan_spec(width), cfg.gan_steps,
                                                cfg.gan_batch_size, gen_rng, cfg.seed)
            curves = {"discriminator": _curve(d_losses), "generator": _curve(g_losses)}
        else:
            log.info("training %s score network for %d steps", cfg.generator, cfg.diff_steps)
            gen, dsm = train_diffusion(latents, cfg.sde_config(), cfg.score_spec(width),
                                       cfg.diff_steps, cfg.diff_batch_size, gen_rng, cfg.diff_lr,
                                       seed=cfg.seed, ema_decay=cfg.ema_decay)
            curves = {"dsm": _curve(dsm)}
        schema.save(tmp / "schema.json")
        ae.save(tmp / "autoencoder")
        gen.save(tmp / "generator")
        write_json(tmp / "manifest.json", {
            "format": MANIFEST_FORMAT,
            "version": MANIFEST_VERSION,
            "config": cfg.to_dict(),
            "generator": cfg.generator,
            "ae_loss": cfg.ae_loss,
            "seeds": {"autoencoder": [cfg.seed, 1], "generator": [cfg.seed, 2]},
            "n_rows": processed.n_rows,
            "processed_width": width,
            "loss_curves": {"autoencoder": _curve(ae_losses), **curves},
        })
        _finish_dir(tmp, out, overwrite)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out


@dataclass
class LoadedRun:
    path: Path
    manifest: dict
    schema: TableSchema
    autoencoder: AutoencoderModel
    generator: object  # DiffusionBundle | GanModel

    @property
    def config(self) -> RunConfig:
        return RunConfig.from_dict(self.manifest["config"])


def load_run(path) -> LoadedRun:
    path = Path(path)
    missing = [n for n in ("manifest.json", "schema.json", "autoencoder.json", "autoencoder.bin",
                           "generator.json", "generator.bin") if not (path / n).is_file()]
    if missing:
        raise FileNotFoundError(f"{path}: incomplete run directory, missing {missing}")
    manifest = read_json(path / "manifest.json")
    if manifest.get("format") != MANIFEST_FORMAT or manifest.get("version") != MANIFEST_VERSION:
        raise ConfigError(f"{path}/manifest.json: unsupported run manifest")
    gen_kind = read_json(path / "generator.json")["meta"].get("kind")
    gen = GanModel.load(path / "generator") if gen_kind == "gan" else \
        DiffusionBundle.load(path / "generator")
    return LoadedRun(path, manifest, TableSchema.load(path / "schema.json"),
                     AutoencoderModel.load(path / "autoencoder"), gen)


def generate(run: LoadedRun, n_rows: int, seed: int = 0) -> pd.DataFrame:
    """Sample latents, decode and postprocess into a table with the original header."""
    if n_rows < 1:
        raise ValueError("n_rows must be at least 1")
    cfg = run.config
    if isinstance(run.generator, GanModel):
        latents = gan_sample(run.generator, n_rows, seed)
    else:
        sampler = SamplerConfig(cfg.sampler_steps, cfg.sampler_batch_size, seed)
        latents = euler_maruyama_sample(run.generator, n_rows, sampler)
    out = decode(run.autoencoder, latents)
    table = postprocess(out.labels(run.autoencoder.layout), run.schema)
    return table[run.schema.names]


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def sample(model_dir, n_rows: int, seed: int, out_csv) -> pd.DataFrame:
    """Write ``n_rows`` synthetic rows to ``out_csv`` plus a ``.meta.json`` sidecar."""
    if n_rows < 1:
        raise ValueError("n_rows must be at least 1")
    run = load_run(model_dir)
    table = generate(run, n_rows, seed)
    out_csv = Path(out_csv)
    _atomic_write_text(out_csv, table.to_csv(index=False))
    meta = {"model_dir": str(Path(model_dir)), "variant": run.config.variant, "seed": seed,
            "n_rows": n_rows, "columns": list(table.columns)}
    _atomic_write_text(Path(f"{out_csv}.meta.json"),
                       json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return table


def evaluate(real_csv, synthetic: dict[str, list], target: str | None, out_dir,
             seed: int = 0, task: str | None = None, dcr_normalize: bool = False,
             schema_path=None):
    """``synthetic`` maps a model name to its replica CSV paths."""
    real = read_csv(real_csv)
    if target is not None and target not in real.columns:
        raise ConfigError(f"target column {target!r} not in {list(real.columns)}")
    schema = TableSchema.load(schema_path) if schema_path else infer_schema(real)
    tables = {name: [_read_synthetic(p, real) for p in paths] for name, paths in synthetic.items()}
    report = evaluate_tables(real, tables, target, task, schema, seed, Path(real_csv).stem,
                             dcr_normalize)
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.tmp-", dir=out.parent))
    try:
        report.write(tmp)
        _finish_dir(tmp, out, overwrite=True)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return report


def _read_synthetic(path, real: pd.DataFrame) -> pd.DataFrame:
    syn = read_csv(path)
    missing = [c for c in real.columns if c not in syn.columns]
    if missing:
        raise ConfigError(f"{path}: synthetic table lacks columns {missing}")
    return syn[list(real.columns)]
