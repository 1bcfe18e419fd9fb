"""Autoencoder mapping processed rows to continuous latents and back.

Encoder and decoder are ReLU MLP blocks followed by a linear layer. The
latent width equals the processed width. The decoder head is widened for
categorical variables (one logit per category) under the heterogeneous
loss, or kept at one scalar per variable under the MSE-only variant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .nn import MlpSpec, ParamSet
from .persist import load_params, save_params
from .schema import DecodedBlocks, Layout, ProcessedTable

HETEROGENEOUS = "heterogeneous"
MED_MSE = "med_mse"
LOSS_VARIANTS = (HETEROGENEOUS, MED_MSE)


@dataclass(frozen=True)
class AutoencoderSpec:
    width: int
    hidden: int = 250
    enc_blocks: int = 2
    dec_blocks: int = 2
    loss: str = HETEROGENEOUS

    def __post_init__(self):
        if self.width <= 0 or self.hidden <= 0:
            raise ValueError("autoencoder widths must be positive")
        if self.loss not in LOSS_VARIANTS:
            raise ValueError(f"loss must be one of {LOSS_VARIANTS}")

    def to_dict(self) -> dict:
        return dict(width=self.width, hidden=self.hidden, enc_blocks=self.enc_blocks,
                    dec_blocks=self.dec_blocks, loss=self.loss)


@dataclass
class LatentMatrix:
    """Latent rows. When ``mean``/``std`` are set, ``values`` are standardized."""

    values: np.ndarray
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def standardized(self) -> bool:
        return self.mean is not None

    def raw(self) -> np.ndarray:
        return invert_standardize(self) if self.standardized else self.values


def standardize_latents(latents) -> LatentMatrix:
    x = latents.raw() if isinstance(latents, LatentMatrix) else nn.as_matrix(latents)
    if x.shape[0] < 2:
        raise ValueError("standardization needs at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    return LatentMatrix((x - mean) / std, mean, std)


def invert_standardize(latents: LatentMatrix) -> np.ndarray:
    if not latents.standardized:
        return latents.values
    return latents.values * latents.std + latents.mean


@dataclass
class DecoderOutput:
    """Decoder output split into blocks. ``num`` is clamped; under the
    heterogeneous loss ``bin`` holds logits and ``cat`` a list of per-variable
    logit matrices, under the MSE variant both hold predicted code values."""

    num: np.ndarray
    bin: np.ndarray
    cat: list[np.ndarray]
    loss: str

    def labels(self, layout: Layout) -> DecodedBlocks:
        n = self.num.shape[0]
        if self.loss == HETEROGENEOUS:
            bins = (self.bin >= 0.0).astype(np.int64)
            cats = [np.argmax(z, axis=1) for z in self.cat]
        else:
            bins = (self.bin >= 0.5).astype(np.int64)
            cats = [np.clip(np.rint(v[:, 0] * max(k - 1, 1)), 0, k - 1).astype(np.int64)
                    for v, k in zip(self.cat, layout.cat_sizes)]
        cat = np.column_stack(cats) if cats else np.zeros((n, 0), dtype=np.int64)
        return DecodedBlocks(self.num.copy(), bins.reshape(n, -1), cat)


@dataclass
class AutoencoderModel:
    spec: AutoencoderSpec
    layout: Layout
    clamp: np.ndarray
    params: ParamSet = field(repr=False)

    @property
    def out_width(self) -> int:
        lay = self.layout
        if self.spec.loss == HETEROGENEOUS:
            return lay.n_num + lay.n_bin + sum(lay.cat_sizes)
        return lay.width

    @property
    def enc_spec(self) -> MlpSpec:
        s = self.spec
        return MlpSpec.stack(s.width, [s.hidden] * s.enc_blocks, s.width)

    @property
    def dec_spec(self) -> MlpSpec:
        s = self.spec
        return MlpSpec.stack(s.width, [s.hidden] * s.dec_blocks, self.out_width)

    @classmethod
    def create(cls, spec: AutoencoderSpec, layout: Layout, clamp, rng) -> "AutoencoderModel":
        if spec.width != layout.width:
            raise ValueError(f"latent width {spec.width} != processed width {layout.width}")
        clamp = np.asarray(clamp, dtype=np.float64).reshape(layout.n_num, 2)
        model = cls(spec, layout, clamp, ParamSet())
        model.params.merge(nn.init_mlp(model.enc_spec, rng, "enc."))
        model.params.merge(nn.init_mlp(model.dec_spec, rng, "dec."))
        return model

    # -- raw network passes ----------------------------------------------

    def encoder_forward(self, x, mode="eval"):
        return nn.mlp_forward(self.enc_spec, self.params, x, mode, prefix="enc.")

    def decoder_forward(self, z, mode="eval"):
        return nn.mlp_forward(self.dec_spec, self.params, z, mode, prefix="dec.")

    def split_output(self, out: np.ndarray, clamp: bool = True) -> DecoderOutput:
        lay = self.layout
        num = out[:, :lay.n_num]
        if clamp:
            num = np.clip(num, self.clamp[:, 0], self.clamp[:, 1])
        b0 = lay.n_num
        bins = out[:, b0:b0 + lay.n_bin]
        c0 = b0 + lay.n_bin
        cats = []
        if self.spec.loss == HETEROGENEOUS:
            for k in lay.cat_sizes:
                cats.append(out[:, c0:c0 + k])
                c0 += k
        else:
            cats = [out[:, c0 + j:c0 + j + 1] for j in range(lay.n_cat)]
        return DecoderOutput(num, bins, cats, self.spec.loss)

    # -- persistence -------------------------------------------------------

    def save(self, stem) -> None:
        lay = self.layout
        meta = {
            "kind": "autoencoder",
            "spec": self.spec.to_dict(),
            "layout": {"num": list(lay.num), "bin": list(lay.bin), "cat": list(lay.cat),
                       "cat_sizes": list(lay.cat_sizes)},
            "clamp": self.clamp.tolist(),
        }
        save_params(stem, self.params, meta)

    @classmethod
    def load(cls, stem) -> "AutoencoderModel":
        params, meta = load_params(stem)
        lay = meta["layout"]
        layout = Layout(tuple(lay["num"]), tuple(lay["bin"]), tuple(lay["cat"]),
                        tuple(lay["cat_sizes"]))
        clamp = np.asarray(meta["clamp"], dtype=np.float64).reshape(layout.n_num, 2)
        return cls(AutoencoderSpec(**meta["spec"]), layout, clamp, params)


def _matrix_of(processed) -> np.ndarray:
    return processed.matrix if isinstance(processed, ProcessedTable) else nn.as_matrix(processed)


def encode(model: AutoencoderModel, processed) -> LatentMatrix:
    x = _matrix_of(processed)
    if x.shape[1] != model.spec.width:
        raise nn.ShapeError(f"processed width {x.shape[1]} != model width {model.spec.width}")
    z, _ = model.encoder_forward(x)
    return LatentMatrix(z)


def decode(model: AutoencoderModel, latents) -> DecoderOutput:
    z = latents.raw() if isinstance(latents, LatentMatrix) else nn.as_matrix(latents)
    if z.shape[1] != model.spec.width:
        raise nn.ShapeError(f"latent width {z.shape[1]} != model width {model.spec.width}")
    out, _ = model.decoder_forward(z)
    return model.split_output(out, clamp=True)


def reconstruction_loss(model: AutoencoderModel, processed, out: np.ndarray):
    """Loss of raw (unclamped) decoder output against the processed batch.

    Returns ``(total, grad_out, terms)`` where ``terms`` maps block name to
    its loss value.
    """
    x = _matrix_of(processed)
    lay = model.layout
    if out.shape != (x.shape[0], model.out_width):
        raise nn.ShapeError(f"decoder output shape {out.shape} does not match layout")
    grad = np.zeros_like(out)
    terms = {}
    ns, bs = lay.num_slice, lay.bin_slice
    terms["num"], grad[:, ns] = nn.mse(out[:, ns], x[:, ns])
    if model.spec.loss == HETEROGENEOUS:
        terms["bin"], grad[:, bs] = nn.bce_with_logits(out[:, bs], x[:, bs])
        scale = np.array([max(k - 1, 1) for k in lay.cat_sizes], dtype=np.float64)
        codes = np.rint(x[:, lay.cat_slice] * scale).astype(np.int64)
        c0 = lay.n_num + lay.n_bin
        ce_total = 0.0
        for j, k in enumerate(lay.cat_sizes):
            val, g = nn.ce_with_logits(out[:, c0:c0 + k], codes[:, j])
            grad[:, c0:c0 + k] = g
            ce_total += val
            c0 += k
        terms["cat"] = ce_total
    else:
        terms["bin"], grad[:, bs] = nn.mse(out[:, bs], x[:, bs])
        cs = lay.cat_slice
        terms["cat"], grad[:, cs] = nn.mse(out[:, cs], x[:, cs])
    total = terms["num"] + terms["bin"] + terms["cat"]
    return total, grad, terms


def loss_and_grads(model: AutoencoderModel, batch: np.ndarray):
    z, enc_cache = model.encoder_forward(batch, "train")
    out, dec_cache = model.decoder_forward(z, "train")
    loss, g_out, _ = reconstruction_loss(model, batch, out)
    dec_grads, g_z = nn.mlp_backward(dec_cache, g_out)
    enc_grads, _ = nn.mlp_backward(enc_cache, g_z)
    grads = ParamSet()
    for k in model.params:
        grads._t[k] = enc_grads[k] if k in enc_grads else dec_grads[k]
    return loss, grads


def train_autoencoder(processed: ProcessedTable, spec: AutoencoderSpec | None = None,
                      epochs: int = 1000, batch_size: int = 256,
                      rng: np.random.Generator | None = None, lr: float = 1e-3,
                      optimizer: nn.Adam | None = None, lr_final: float = 0.1):
    """Mini-batch Adam on the reconstruction loss.

    The learning rate follows a cosine from ``lr`` down to ``lr * lr_final``
    over the epochs (``lr_final=1`` keeps it constant).
    Returns ``(model, epoch_losses)``. Parameters are snapped to float32 at
    the end so the saved model reproduces in-memory outputs exactly.
    """
    x = processed.matrix
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty table")
    rng = rng if rng is not None else nn.make_rng(0)
    spec = spec or AutoencoderSpec(width=processed.layout.width)
    model = AutoencoderModel.create(spec, processed.layout,
                                    processed.schema.clamp_bounds(), rng)
    opt = optimizer or nn.Adam(lr=lr)
    losses = []
    for epoch in range(epochs):
        frac = 0.5 * (1.0 + np.cos(np.pi * epoch / max(epochs - 1, 1)))
        opt.lr = lr * (lr_final + (1.0 - lr_final) * frac)
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            loss, grads = loss_and_grads(model, x[idx])
            opt.step(model.params, grads)
            total += loss * idx.size
        losses.append(total / n)
    model.params.round_to_float32()
    return model, losses
