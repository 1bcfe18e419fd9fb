"""Time-dependent score networks S(x, t).

Two architectures:

* ``stasy`` - stacked concat-squash layers. Layer ``i`` computes
  ``H = Linear_i(h) * sigmoid(Linear_gate_i(t) + Linear_bias_i(t))`` and
  ``h <- ELU([H ; h])``, so widths grow by ``d_i`` per layer; a final linear
  maps back to the data width.
* ``tab`` - sinusoidal time embedding passed through Linear-SiLU-Linear, added
  to a linear projection of x, followed by ReLU/dropout MLP blocks and a final
  linear layer.

Both expose ``init``, ``forward`` (returns output and cache) and ``backward``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .nn import MlpSpec, ParamSet

STASY = "stasy"
TAB = "tab"


@dataclass(frozen=True)
class ScoreNetSpec:
    variant: str
    width: int
    stasy_widths: tuple[int, ...] = (256, 512, 1024, 512, 256)
    tab_dim: int = 128
    tab_blocks: int = 4
    tab_dropout: float = 0.0
    time_scale: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "stasy_widths", tuple(int(w) for w in self.stasy_widths))
        if self.variant not in (STASY, TAB):
            raise ValueError(f"unknown score network {self.variant!r}")
        if self.width <= 0 or self.tab_dim <= 0 or any(w <= 0 for w in self.stasy_widths):
            raise ValueError("score network widths must be positive")
        if self.tab_dim % 2:
            raise ValueError("time embedding width must be even")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stasy_widths"] = list(self.stasy_widths)
        return d


def sinusoidal_time_embedding(t, dim: int = 128, scale: float = 1000.0) -> np.ndarray:
    """``[sin(scale t w_k) ; cos(scale t w_k)]`` with ``w_k = 10000^(-k/(dim/2))``."""
    if dim % 2:
        raise ValueError("embedding dim must be even")
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = scale * t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def _times(t, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.broadcast_to(t, (n,)).astype(np.float64) if t.ndim <= 1 else t.reshape(n)


class StasyScoreNet:
    def __init__(self, spec: ScoreNetSpec):
        self.spec = spec

    def hidden_widths(self) -> list[int]:
        widths, w = [], self.spec.width
        for d_i in self.spec.stasy_widths:
            w = d_i + w
            widths.append(w)
        return widths

    def init(self, rng: np.random.Generator) -> ParamSet:
        p = ParamSet()
        w_in = self.spec.width
        for i, d_i in enumerate(self.spec.stasy_widths):
            p[f"layer{i}.weight"], p[f"layer{i}.bias"] = nn.init_linear(w_in, d_i, rng, 2.0)
            p[f"gate{i}.weight"], p[f"gate{i}.bias"] = nn.init_linear(1, d_i, rng)
            p[f"hbias{i}.weight"], p[f"hbias{i}.bias"] = nn.init_linear(1, d_i, rng)
            w_in = d_i + w_in
        p["out.weight"], p["out.bias"] = nn.init_linear(w_in, self.spec.width, rng)
        return p

    def forward(self, params: ParamSet, x, t, mode: str = "eval", rng=None):
        h = nn.as_matrix(x)
        if h.shape[1] != self.spec.width:
            raise nn.ShapeError(f"input width {h.shape[1]} != score net width {self.spec.width}")
        tcol = _times(t, h.shape[0])[:, None]
        layers = []
        for i in range(len(self.spec.stasy_widths)):
            a = nn.linear(params[f"layer{i}.weight"], params[f"layer{i}.bias"], h)
            u = (tcol @ params[f"gate{i}.weight"] + params[f"gate{i}.bias"]
                 + tcol @ params[f"hbias{i}.weight"] + params[f"hbias{i}.bias"])
            s = nn.sigmoid(u)
            c = np.concatenate([a * s, h], axis=1)
            h_next = nn.activate("elu", c)
            layers.append((h, a, s, c, h_next))
            h = h_next
        out = nn.linear(params["out.weight"], params["out.bias"], h)
        return out, (params, params.version, tcol, layers, out.shape)

    def backward(self, cache, g_out) -> tuple[ParamSet, np.ndarray]:
        params, version, tcol, layers, shape = cache
        if params.version != version:
            raise nn.StaleCacheError("parameters changed since the forward pass")
        grads = {}
        h_last = layers[-1][4]
        grads["out.weight"], grads["out.bias"], g = nn.linear_backward(
            params["out.weight"], h_last, np.asarray(g_out, dtype=np.float64))
        for i in reversed(range(len(layers))):
            h, a, s, c, h_next = layers[i]
            gc = nn.activate_backward("elu", c, h_next, g)
            d_i = a.shape[1]
            gH, g_skip = gc[:, :d_i], gc[:, d_i:]
            ga = gH * s
            gu = gH * a * s * (1.0 - s)
            gt_w = tcol.T @ gu
            gu_sum = gu.sum(axis=0)
            grads[f"gate{i}.weight"], grads[f"gate{i}.bias"] = gt_w, gu_sum
            grads[f"hbias{i}.weight"], grads[f"hbias{i}.bias"] = gt_w.copy(), gu_sum.copy()
            grads[f"layer{i}.weight"], grads[f"layer{i}.bias"], gh = nn.linear_backward(
                params[f"layer{i}.weight"], h, ga)
            g = gh + g_skip
        return ParamSet({k: grads[k] for k in params}), g


class TabScoreNet:
    def __init__(self, spec: ScoreNetSpec):
        self.spec = spec
        k = spec.tab_dim
        self.temb_spec = MlpSpec(k, (k, k), ("silu", "identity"))
        self.trunk_spec = MlpSpec(
            k,
            (k,) * spec.tab_blocks + (spec.width,),
            ("relu",) * spec.tab_blocks + ("identity",),
            (spec.tab_dropout,) * spec.tab_blocks + (0.0,),
        )

    def init(self, rng: np.random.Generator) -> ParamSet:
        p = ParamSet()
        p.merge(nn.init_mlp(self.temb_spec, rng, "temb."))
        p["proj.weight"], p["proj.bias"] = nn.init_linear(self.spec.width, self.spec.tab_dim, rng)
        p.merge(nn.init_mlp(self.trunk_spec, rng, "mlp."))
        return p

    def forward(self, params: ParamSet, x, t, mode: str = "eval", rng=None):
        x = nn.as_matrix(x)
        if x.shape[1] != self.spec.width:
            raise nn.ShapeError(f"input width {x.shape[1]} != score net width {self.spec.width}")
        times = _times(t, x.shape[0])
        # one embedding row suffices when every row shares the same time
        shared = times.size > 0 and np.all(times == times[0])
        emb = sinusoidal_time_embedding(times[:1] if shared else times, self.spec.tab_dim,
                                        self.spec.time_scale)
        temb, c_t = nn.mlp_forward(self.temb_spec, params, emb, "eval", prefix="temb.")
        xin = nn.linear(params["proj.weight"], params["proj.bias"], x) + temb
        out, c_m = nn.mlp_forward(self.trunk_spec, params, xin, mode, rng, prefix="mlp.")
        return out, (params, x, c_t, c_m, shared)

    def backward(self, cache, g_out) -> tuple[ParamSet, np.ndarray]:
        params, x, c_t, c_m, shared = cache
        g_trunk, g_in = nn.mlp_backward(c_m, g_out)
        g_temb, _ = nn.mlp_backward(c_t, g_in.sum(axis=0, keepdims=True) if shared else g_in)
        dWp, dbp, gx = nn.linear_backward(params["proj.weight"], x, g_in)
        grads = ParamSet()
        for k in params:
            if k == "proj.weight":
                grads._t[k] = dWp
            elif k == "proj.bias":
                grads._t[k] = dbp
            else:
                grads._t[k] = g_temb[k] if k in g_temb else g_trunk[k]
        return grads, gx


def make_score_net(spec: ScoreNetSpec):
    return StasyScoreNet(spec) if spec.variant == STASY else TabScoreNet(spec)
