"""GAN over autoencoder latents (the AutoGAN baseline).

Generator: linear projection of the noise to the block width, residual
blocks ``x + Linear2(BN(ReLU(Linear1(BN(x)))))``, and a linear output layer.
Discriminator: each row is concatenated with the minibatch mean row and fed
through a ReLU MLP that ends in one logit. The decoder is never touched here.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .autoencoder import LatentMatrix, standardize_latents
from .nn import MlpSpec, ParamSet
from .persist import load_params, save_params


@dataclass(frozen=True)
class GanSpec:
    width: int
    noise_width: int = 0  # 0 -> same as width
    hidden: int = 128
    gen_blocks: int = 2
    disc_layers: int = 2
    g_lr: float = 2e-4
    d_lr: float = 2e-4
    beta1: float = 0.5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.noise_width == 0:
            object.__setattr__(self, "noise_width", self.width)
        if min(self.width, self.noise_width, self.hidden) <= 0:
            raise ValueError("GAN widths must be positive")

    @property
    def disc_spec(self) -> MlpSpec:
        return MlpSpec.stack(2 * self.width, [self.hidden] * self.disc_layers, 1)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GanModel:
    spec: GanSpec
    gen: ParamSet = field(repr=False)
    disc: ParamSet = field(repr=False)
    bn: dict = field(repr=False)  # running stats, name -> array
    seed: int = 0
    latent_mean: np.ndarray | None = None
    latent_std: np.ndarray | None = None

    @classmethod
    def create(cls, spec: GanSpec, rng, seed: int = 0) -> "GanModel":
        g = ParamSet()
        h = spec.hidden
        g["in.weight"], g["in.bias"] = nn.init_linear(spec.noise_width, h, rng)
        bn = {}
        for i in range(spec.gen_blocks):
            for j in (1, 2):
                g[f"block{i}.bn{j}.gamma"] = np.ones(h)
                g[f"block{i}.bn{j}.beta"] = np.zeros(h)
                bn[f"block{i}.bn{j}.mean"] = np.zeros(h)
                bn[f"block{i}.bn{j}.var"] = np.ones(h)
            g[f"block{i}.fc1.weight"], g[f"block{i}.fc1.bias"] = nn.init_linear(h, h, rng, 2.0)
            g[f"block{i}.fc2.weight"], g[f"block{i}.fc2.bias"] = nn.init_linear(h, h, rng)
        g["out.weight"], g["out.bias"] = nn.init_linear(h, spec.width, rng)
        d = nn.init_mlp(spec.disc_spec, rng)
        return cls(spec, g, d, bn, seed, np.zeros(spec.width), np.ones(spec.width))

    def save(self, stem) -> None:
        params = ParamSet()
        params.merge(self.gen, "gen.")
        params.merge(self.disc, "disc.")
        params.merge(ParamSet(self.bn), "bn.")
        meta = {"kind": "gan", "spec": self.spec.to_dict(), "seed": self.seed,
                "latent_mean": self.latent_mean.tolist(),
                "latent_std": self.latent_std.tolist()}
        save_params(stem, params, meta)

    @classmethod
    def load(cls, stem) -> "GanModel":
        params, meta = load_params(stem)
        bn = {k: v.copy() for k, v in params.subset("bn.").items()}
        return cls(GanSpec(**meta["spec"]), params.subset("gen."), params.subset("disc."), bn,
                   meta["seed"], np.asarray(meta["latent_mean"], float),
                   np.asarray(meta["latent_std"], float))


def generator_forward(model: GanModel, z, mode: str = "eval"):
    """Returns ``(fake_latents, cache)``. Train mode uses batch statistics and
    updates the running statistics in place."""
    z = nn.as_matrix(z, "noise")
    spec, g = model.spec, model.gen
    if z.shape[1] != spec.noise_width:
        raise nn.ShapeError(f"noise width {z.shape[1]} != {spec.noise_width}")
    train = mode == "train"
    if train and z.shape[0] < 2:
        raise ValueError("batch normalization in train mode needs at least 2 rows")
    x = nn.linear(g["in.weight"], g["in.bias"], z)
    blocks = []
    for i in range(spec.gen_blocks):
        p = f"block{i}."
        bn = model.bn
        y1, c1 = nn.batchnorm(x, g[p + "bn1.gamma"], g[p + "bn1.beta"], bn[p + "bn1.mean"],
                              bn[p + "bn1.var"], train=train, momentum=spec.bn_momentum)
        u = nn.linear(g[p + "fc1.weight"], g[p + "fc1.bias"], y1)
        r = np.maximum(u, 0.0)
        y2, c2 = nn.batchnorm(r, g[p + "bn2.gamma"], g[p + "bn2.beta"], bn[p + "bn2.mean"],
                              bn[p + "bn2.var"], train=train, momentum=spec.bn_momentum)
        v = nn.linear(g[p + "fc2.weight"], g[p + "fc2.bias"], y2)
        blocks.append((y1, c1, u, c2, y2))
        x = x + v
    out = nn.linear(g["out.weight"], g["out.bias"], x)
    return out, (z, blocks, x, g.version)


def generator_backward(model: GanModel, cache, g_out) -> ParamSet:
    z, blocks, x_last, version = cache
    g = model.gen
    if g.version != version:
        raise nn.StaleCacheError("generator parameters changed since the forward pass")
    grads = {}
    grads["out.weight"], grads["out.bias"], gx = nn.linear_backward(g["out.weight"], x_last, g_out)
    for i in reversed(range(len(blocks))):
        p = f"block{i}."
        y1, c1, u, c2, y2 = blocks[i]
        grads[p + "fc2.weight"], grads[p + "fc2.bias"], gy2 = nn.linear_backward(
            g[p + "fc2.weight"], y2, gx)
        grads[p + "bn2.gamma"], grads[p + "bn2.beta"], gr = nn.batchnorm_backward(c2, gy2)
        gu = gr * (u > 0)
        grads[p + "fc1.weight"], grads[p + "fc1.bias"], gy1 = nn.linear_backward(
            g[p + "fc1.weight"], y1, gu)
        grads[p + "bn1.gamma"], grads[p + "bn1.beta"], gxb = nn.batchnorm_backward(c1, gy1)
        gx = gx + gxb
    grads["in.weight"], grads["in.bias"], _ = nn.linear_backward(g["in.weight"], z, gx)
    return ParamSet({k: grads[k] for k in g})


def discriminator_forward(model: GanModel, latents):
    """Per-row logits of 'real'. Returns ``(logits, cache)``."""
    x = nn.as_matrix(latents)
    if x.shape[0] < 1:
        raise ValueError("discriminator needs at least one row")
    aug = np.concatenate([x, np.broadcast_to(x.mean(axis=0), x.shape)], axis=1)
    return nn.mlp_forward(model.spec.disc_spec, model.disc, aug)


def discriminator_backward(cache, g_logits):
    """Returns ``(param_grads, grad_latents)``, including the path through the batch mean."""
    grads, g_aug = nn.mlp_backward(cache, g_logits)
    d = g_aug.shape[1] // 2
    g_x = g_aug[:, :d] + g_aug[:, d:].mean(axis=0)
    return grads, g_x


def gan_losses(real_logits, fake_logits):
    """Non-saturating BCE losses. Returns ``(d_loss, g_loss)``."""
    d_real, _ = nn.bce_with_logits(real_logits, np.ones_like(real_logits))
    d_fake, _ = nn.bce_with_logits(fake_logits, np.zeros_like(fake_logits))
    g_loss, _ = nn.bce_with_logits(fake_logits, np.ones_like(fake_logits))
    return d_real + d_fake, g_loss


@dataclass
class GanTrainer:
    model: GanModel
    g_opt: nn.Adam
    d_opt: nn.Adam

    @classmethod
    def for_model(cls, model: GanModel) -> "GanTrainer":
        s = model.spec
        return cls(model, nn.Adam(lr=s.g_lr, beta1=s.beta1), nn.Adam(lr=s.d_lr, beta1=s.beta1))


def gan_train_step(trainer: GanTrainer, real, rng: np.random.Generator):
    """One discriminator update followed by one generator update."""
    model = trainer.model
    real = nn.as_matrix(real)
    n = real.shape[0]
    if n < 2:
        raise ValueError("GAN steps need a batch of at least 2 rows")
    # discriminator
    z = rng.standard_normal((n, model.spec.noise_width))
    fake, _ = generator_forward(model, z, "train")
    lr_, c_r = discriminator_forward(model, real)
    lf_, c_f = discriminator_forward(model, fake)
    d_real, g_r = nn.bce_with_logits(lr_, np.ones_like(lr_))
    d_fake, g_f = nn.bce_with_logits(lf_, np.zeros_like(lf_))
    gr, _ = discriminator_backward(c_r, g_r)
    gf, _ = discriminator_backward(c_f, g_f)
    d_grads = ParamSet({k: gr[k] + gf[k] for k in gr})
    trainer.d_opt.step(model.disc, d_grads)
    # generator
    z = rng.standard_normal((n, model.spec.noise_width))
    fake, g_cache = generator_forward(model, z, "train")
    lf_, c_f = discriminator_forward(model, fake)
    g_loss, g_l = nn.bce_with_logits(lf_, np.ones_like(lf_))
    _, g_fake = discriminator_backward(c_f, g_l)
    g_grads = generator_backward(model, g_cache, g_fake)
    trainer.g_opt.step(model.gen, g_grads)
    return d_real + d_fake, g_loss


def train_gan(latents, spec: GanSpec | None = None, steps: int = 5000, batch_size: int = 256,
              rng: np.random.Generator | None = None, seed: int = 0, standardize: bool = True):
    """Returns ``(model, d_losses, g_losses)``."""
    if isinstance(latents, LatentMatrix) and latents.standardized:
        lat = latents
    elif standardize:
        lat = standardize_latents(latents)
    else:
        raw = latents.values if isinstance(latents, LatentMatrix) else nn.as_matrix(latents)
        lat = LatentMatrix(raw, np.zeros(raw.shape[1]), np.ones(raw.shape[1]))
    x = lat.values
    n, d = x.shape
    spec = spec or GanSpec(width=d)
    rng = rng if rng is not None else nn.make_rng(seed)
    model = GanModel.create(spec, rng, seed)
    model.latent_mean, model.latent_std = lat.mean, lat.std
    trainer = GanTrainer.for_model(model)
    d_losses, g_losses = np.empty(steps), np.empty(steps)
    m = max(2, min(batch_size, n))
    for step in range(steps):
        idx = rng.integers(0, n, size=m)
        d_losses[step], g_losses[step] = gan_train_step(trainer, x[idx], rng)
    model.gen.round_to_float32()
    model.disc.round_to_float32()
    for k in model.bn:
        model.bn[k] = model.bn[k].astype(np.float32).astype(np.float64)
    return model, d_losses, g_losses


def gan_sample(model: GanModel, n_rows: int, seed: int = 0) -> LatentMatrix:
    if n_rows < 1:
        raise ValueError("n_rows must be at least 1")
    z = nn.make_rng(seed).standard_normal((n_rows, model.spec.noise_width))
    x, _ = generator_forward(model, z, "eval")
    return LatentMatrix(x * model.latent_std + model.latent_mean)
