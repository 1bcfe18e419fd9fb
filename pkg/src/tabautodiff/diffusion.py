"""Score-based diffusion over latent rows: DSM training and reverse-SDE sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn, sde
from .autoencoder import LatentMatrix, standardize_latents
from .nn import ParamSet
from .persist import load_params, save_params
from .scorenet import ScoreNetSpec, make_score_net
from .sde import SdeConfig


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 1000
    batch_size: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("sampler needs at least one step")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")


@dataclass
class DiffusionBundle:
    cfg: SdeConfig
    spec: ScoreNetSpec
    params: ParamSet = field(repr=False)
    latent_mean: np.ndarray
    latent_std: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.net = make_score_net(self.spec)

    @classmethod
    def create(cls, cfg: SdeConfig, spec: ScoreNetSpec, rng, latent_mean=None,
               latent_std=None, seed: int = 0) -> "DiffusionBundle":
        net = make_score_net(spec)
        d = spec.width
        mean = np.zeros(d) if latent_mean is None else np.asarray(latent_mean, float)
        std = np.ones(d) if latent_std is None else np.asarray(latent_std, float)
        return cls(cfg, spec, net.init(rng), mean, std, seed)

    def score(self, x, t, mode: str = "eval", rng=None):
        return self.net.forward(self.params, x, t, mode, rng)

    def save(self, stem) -> None:
        meta = {
            "kind": "diffusion",
            "sde": self.cfg.to_dict(),
            "score_net": self.spec.to_dict(),
            "latent_mean": self.latent_mean.tolist(),
            "latent_std": self.latent_std.tolist(),
            "seed": self.seed,
        }
        save_params(stem, self.params, meta)

    @classmethod
    def load(cls, stem) -> "DiffusionBundle":
        params, meta = load_params(stem)
        return cls(SdeConfig(**meta["sde"]), ScoreNetSpec(**meta["score_net"]), params,
                   np.asarray(meta["latent_mean"], float), np.asarray(meta["latent_std"], float),
                   meta["seed"])


def dsm_loss(bundle: DiffusionBundle, x0, rng: np.random.Generator | None = None,
             t=None, z=None, mode: str = "train"):
    """Denoising score-matching loss on a batch and its parameter gradients.

    ``t`` (one time per row) and ``z`` are drawn from ``rng`` unless given.
    """
    x0 = nn.as_matrix(x0)
    n = x0.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if t is None:
        t = sde.sample_times(bundle.cfg, n, rng)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    if z is None:
        z = rng.standard_normal(x0.shape)
    xt = sde.perturb(bundle.cfg, x0, t, z)
    out, cache = bundle.score(xt, t, mode, rng)
    loss, g_out = sde.dsm_objective(bundle.cfg, out, t, z)
    grads, _ = bundle.net.backward(cache, g_out)
    return loss, grads


def train_diffusion(latents, cfg: SdeConfig | None = None, spec: ScoreNetSpec | None = None,
                    steps: int = 20000, batch_size: int = 256,
                    rng: np.random.Generator | None = None, lr: float = 1e-3,
                    standardize: bool = True, seed: int = 0, ema_decay: float = 0.999):
    """Fit a score network with Adam on the DSM loss.

    ``latents`` may be a raw array, a raw :class:`LatentMatrix` (standardized
    here unless ``standardize=False``) or an already standardized one. The
    returned bundle carries an exponential moving average of the weights
    (``ema_decay=0`` keeps the raw final weights).
    Returns ``(bundle, per_step_losses)``.
    """
    if isinstance(latents, LatentMatrix) and latents.standardized:
        lat = latents
    elif standardize:
        lat = standardize_latents(latents)
    else:
        raw = latents.values if isinstance(latents, LatentMatrix) else nn.as_matrix(latents)
        lat = LatentMatrix(raw, np.zeros(raw.shape[1]), np.ones(raw.shape[1]))
    x = lat.values
    n, d = x.shape
    cfg = cfg or SdeConfig()
    spec = spec or ScoreNetSpec("tab", d)
    if spec.width != d:
        raise ValueError(f"score net width {spec.width} != latent width {d}")
    rng = rng if rng is not None else nn.make_rng(seed)
    bundle = DiffusionBundle.create(cfg, spec, rng, lat.mean, lat.std, seed)
    opt = nn.Adam(lr=lr)
    ema = bundle.params.copy()
    losses = np.empty(steps)
    for step in range(steps):
        idx = rng.integers(0, n, size=min(batch_size, n))
        loss, grads = dsm_loss(bundle, x[idx], rng)
        opt.step(bundle.params, grads)
        losses[step] = loss
        decay = min(ema_decay, (1.0 + step) / (10.0 + step))
        for k, v in bundle.params.items():
            e = ema[k]
            e *= decay
            e += (1.0 - decay) * v
    if ema_decay > 0.0 and steps > 0:
        bundle.params.update(ema)
    bundle.params.round_to_float32()
    return bundle, losses


def euler_maruyama_sample(bundle: DiffusionBundle, n_rows: int,
                          sampler: SamplerConfig | None = None) -> LatentMatrix:
    """Integrate the reverse SDE from t=T down to t=eps in ``steps`` uniform steps.

    Batches use independent streams ``(seed, batch index)``. The final step
    adds no noise. Returns de-standardized latents.
    """
    if n_rows < 1:
        raise ValueError("n_rows must be at least 1")
    sampler = sampler or SamplerConfig()
    cfg = bundle.cfg
    dt = (cfg.T - cfg.eps) / sampler.steps
    out = []
    for b, start in enumerate(range(0, n_rows, sampler.batch_size)):
        m = min(sampler.batch_size, n_rows - start)
        rng = nn.make_rng(sampler.seed, b)
        x = rng.standard_normal((m, bundle.spec.width))
        for i in range(sampler.steps):
            t = cfg.T - i * dt
            score, _ = bundle.score(x, np.full(m, t))
            last = i == sampler.steps - 1
            z = None if last else rng.standard_normal(x.shape)
            x = sde.em_step(cfg, x, t, dt, score, z)
        out.append(x)
    x = np.concatenate(out, axis=0)
    return LatentMatrix(x * bundle.latent_std + bundle.latent_mean)
