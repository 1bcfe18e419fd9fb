"""Minimal dense-network substrate on numpy.

Everything trains in float64. Layers are plain functions that return a cache
for their backward counterpart; :func:`mlp_forward` / :func:`mlp_backward`
compose them into the stacked dense networks used by every model here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("relu", "elu", "silu", "identity", "sigmoid")
_GAIN = {"relu": 2.0, "elu": 2.0, "silu": 2.0, "identity": 1.0, "sigmoid": 1.0}


class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    """Backward was called with a cache from an older parameter version."""


def as_matrix(x, name: str = "input") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject NaN/Inf."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains NaN or Inf")
    return arr


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator; the same (seed, stream) gives the same draws."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *stream])
    return np.random.Generator(np.random.Philox(ss))


# --------------------------------------------------------------------------
# Parameters


class ParamSet:
    """Ordered name -> float64 array mapping.

    ``version`` is bumped on every in-place update so that backward passes can
    detect caches computed against stale weights.
    """

    def __init__(self, tensors: dict[str, np.ndarray] | None = None):
        self._t: dict[str, np.ndarray] = {}
        self.version = 0
        for k, v in (tensors or {}).items():
            self[k] = v

    def __getitem__(self, name: str) -> np.ndarray:
        return self._t[name]

    def __setitem__(self, name: str, value) -> None:
        self._t[name] = np.asarray(value, dtype=np.float64)

    def __contains__(self, name: str) -> bool:
        return name in self._t

    def __iter__(self) -> Iterator[str]:
        return iter(self._t)

    def __len__(self) -> int:
        return len(self._t)

    def items(self):
        return self._t.items()

    def names(self) -> list[str]:
        return list(self._t)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self._t.items()}

    def size(self) -> int:
        return sum(v.size for v in self._t.values())

    def copy(self) -> "ParamSet":
        return ParamSet({k: v.copy() for k, v in self._t.items()})

    def zeros_like(self) -> "ParamSet":
        return ParamSet({k: np.zeros_like(v) for k, v in self._t.items()})

    def update(self, other: "ParamSet") -> None:
        for k, v in other.items():
            self[k] = v
        self.version += 1

    def subset(self, prefix: str) -> "ParamSet":
        """Tensors whose name starts with ``prefix`` (prefix stripped)."""
        n = len(prefix)
        return ParamSet({k[n:]: v for k, v in self._t.items() if k.startswith(prefix)})

    def merge(self, other: "ParamSet", prefix: str = "") -> None:
        for k, v in other.items():
            self._t[prefix + k] = v

    def round_to_float32(self) -> None:
        """Snap every value to the nearest float32 so persisted copies are exact."""
        for k in self._t:
            self._t[k] = self._t[k].astype(np.float32).astype(np.float64)
        self.version += 1

    def allclose(self, other: "ParamSet", **kw) -> bool:
        return self.names() == other.names() and all(
            np.allclose(self[k], other[k], **kw) for k in self
        )

    def equal(self, other: "ParamSet") -> bool:
        return self.names() == other.names() and all(
            np.array_equal(self[k], other[k]) for k in self
        )

    def __repr__(self) -> str:
        return f"ParamSet({len(self)} tensors, {self.size()} values)"


def add_grads(total: ParamSet, part: ParamSet, prefix: str = "") -> None:
    for k, v in part.items():
        name = prefix + k
        if name in total:
            total._t[name] = total[name] + v
        else:
            total._t[name] = v


# --------------------------------------------------------------------------
# Elementary layers


def linear(W: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    if x.shape[1] != W.shape[0]:
        raise ShapeError(f"linear: input width {x.shape[1]} != weight rows {W.shape[0]}")
    return x @ W + b


def linear_backward(W: np.ndarray, x: np.ndarray, gy: np.ndarray):
    """Returns (dW, db, dx)."""
    return x.T @ gy, gy.sum(axis=0), gy @ W.T


_sigmoid = sigmoid = expit


def activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "elu":
        return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
    if name == "silu":
        return z * _sigmoid(z)
    if name == "sigmoid":
        return _sigmoid(z)
    raise ValueError(f"unknown activation {name!r}")


def activate_backward(name: str, z: np.ndarray, a: np.ndarray, ga: np.ndarray) -> np.ndarray:
    if name == "identity":
        return ga
    if name == "relu":
        return ga * (z > 0)
    if name == "elu":
        return ga * np.where(z > 0, 1.0, a + 1.0)
    if name == "silu":
        s = _sigmoid(z)
        return ga * s * (1.0 + z * (1.0 - s))
    if name == "sigmoid":
        return ga * a * (1.0 - a)
    raise ValueError(f"unknown activation {name!r}")


def dropout_mask(shape, rate: float, rng: np.random.Generator | None) -> np.ndarray:
    """Inverted-dropout mask: kept units are scaled by 1/(1-rate)."""
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    return (rng.random(shape) >= rate) / (1.0 - rate)


def batchnorm(x, gamma, beta, running_mean, running_var, *, train: bool,
              momentum: float = 0.1, eps: float = 1e-5):
    """Batch normalization over rows.

    In train mode the running statistics arrays are updated in place
    (unbiased variance, PyTorch convention) and batch statistics are used.
    Returns (y, cache).
    """
    if train:
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        n = x.shape[0]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        unbiased = var * n / (n - 1) if n > 1 else var
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mu, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    return xhat * gamma + beta, (xhat, inv, gamma, train)


def batchnorm_backward(cache, gy):
    """Returns (dgamma, dbeta, dx)."""
    xhat, inv, gamma, train = cache
    dgamma = (gy * xhat).sum(axis=0)
    dbeta = gy.sum(axis=0)
    gxhat = gy * gamma
    if not train:
        return dgamma, dbeta, gxhat * inv
    n = gy.shape[0]
    dx = (inv / n) * (n * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))
    return dgamma, dbeta, dx


# --------------------------------------------------------------------------
# Multilayer perceptron


@dataclass(frozen=True)
class MlpSpec:
    """Dense stack: ``in_width -> widths[0] -> ... -> widths[-1]``.

    ``activations[i]`` and ``dropout[i]`` apply after layer ``i``.
    """

    in_width: int
    widths: tuple[int, ...]
    activations: tuple[str, ...]
    dropout: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        drop = tuple(float(p) for p in self.dropout) or (0.0,) * len(self.widths)
        object.__setattr__(self, "dropout", drop)
        if not self.widths:
            raise ValueError("MlpSpec needs at least one layer")
        if self.in_width <= 0 or any(w <= 0 for w in self.widths):
            raise ValueError("layer widths must be positive")
        if len(self.activations) != len(self.widths) or len(drop) != len(self.widths):
            raise ValueError("one activation and one dropout rate per layer")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        if any(not 0.0 <= p < 1.0 for p in drop):
            raise ValueError("dropout rate must lie in [0, 1)")

    @classmethod
    def stack(cls, in_width: int, hidden: Sequence[int], out_width: int,
              activation: str = "relu", out_activation: str = "identity",
              dropout: float = 0.0) -> "MlpSpec":
        widths = (*hidden, out_width)
        acts = (activation,) * len(hidden) + (out_activation,)
        drops = (dropout,) * len(hidden) + (0.0,)
        return cls(in_width, widths, acts, drops)

    @property
    def out_width(self) -> int:
        return self.widths[-1]

    def fan_ins(self) -> list[int]:
        return [self.in_width, *self.widths[:-1]]

    def to_dict(self) -> dict:
        return {"in_width": self.in_width, "widths": list(self.widths),
                "activations": list(self.activations), "dropout": list(self.dropout)}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(d["in_width"], tuple(d["widths"]), tuple(d["activations"]),
                   tuple(d["dropout"]))


def init_linear(fan_in: int, fan_out: int, rng: np.random.Generator,
                gain: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Kaiming-style uniform weights (variance gain/fan_in), zero bias."""
    bound = np.sqrt(3.0 * gain / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)


def init_mlp(spec: MlpSpec, rng: np.random.Generator, prefix: str = "") -> ParamSet:
    params = ParamSet()
    for i, (fi, fo, act) in enumerate(zip(spec.fan_ins(), spec.widths, spec.activations)):
        W, b = init_linear(fi, fo, rng, _GAIN[act])
        params[f"{prefix}{i}.weight"] = W
        params[f"{prefix}{i}.bias"] = b
    return params


@dataclass
class MlpCache:
    spec: MlpSpec
    params: ParamSet
    version: int
    prefix: str
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    out_shape: tuple = ()


def mlp_forward(spec: MlpSpec, params: ParamSet, x, mode: str = "eval",
                rng: np.random.Generator | None = None, prefix: str = ""):
    """Run the dense stack. Returns ``(output, cache)``."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    h = as_matrix(x)
    if h.shape[1] != spec.in_width:
        raise ShapeError(f"input width {h.shape[1]} != spec in_width {spec.in_width}")
    cache = MlpCache(spec, params, params.version, prefix)
    for i, (act, p) in enumerate(zip(spec.activations, spec.dropout)):
        W, b = params[f"{prefix}{i}.weight"], params[f"{prefix}{i}.bias"]
        cache.inputs.append(h)
        z = linear(W, b, h)
        a = activate(act, z)
        cache.pre.append(z)
        cache.post.append(a)
        if mode == "train" and p > 0.0:
            m = dropout_mask(a.shape, p, rng)
            cache.masks.append(m)
            a = a * m
        else:
            cache.masks.append(None)
        h = a
    cache.out_shape = h.shape
    return h, cache


def mlp_backward(cache: MlpCache, grad_output) -> tuple[ParamSet, np.ndarray]:
    """Reverse-mode gradients of the cached forward map.

    Returns ``(param_grads, grad_input)``; param grads use the same names as
    the forward ParamSet entries (prefix included).
    """
    if cache.params.version != cache.version:
        raise StaleCacheError("parameters changed since the forward pass")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.shape != cache.out_shape:
        raise ShapeError(f"grad_output shape {g.shape} != output shape {cache.out_shape}")
    grads = ParamSet()
    spec, p = cache.spec, cache.prefix
    for i in reversed(range(len(spec.widths))):
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
        g = activate_backward(spec.activations[i], cache.pre[i], cache.post[i], g)
        dW, db, g = linear_backward(cache.params[f"{p}{i}.weight"], cache.inputs[i], g)
        grads._t[f"{p}{i}.weight"] = dW
        grads._t[f"{p}{i}.bias"] = db
    ordered = ParamSet()
    for k in cache.params:
        if k in grads:
            ordered._t[k] = grads[k]
    return ordered, g


# --------------------------------------------------------------------------
# Losses: each returns (value, gradient w.r.t. the first argument)


def mse(pred, target) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    diff = pred - np.asarray(target, dtype=np.float64)
    if diff.size == 0:
        return 0.0, np.zeros_like(pred)
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def bce_with_logits(logit, target) -> tuple[float, np.ndarray]:
    z = np.asarray(logit, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if z.size == 0:
        return 0.0, np.zeros_like(z)
    # max(z,0) - z*y + log(1 + exp(-|z|))
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(loss.mean()), (_sigmoid(z) - y) / z.size


def ce_with_logits(logits, classes) -> tuple[float, np.ndarray]:
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    c = np.atleast_1d(np.asarray(classes))
    n, k = z.shape
    if c.shape != (n,):
        raise ShapeError(f"need one class index per row, got {c.shape} for {n} rows")
    if np.any(c < 0) or np.any(c >= k):
        raise IndexError(f"class index out of range [0, {k})")
    c = c.astype(np.int64)
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - lse
    loss = -logp[np.arange(n), c].mean()
    grad = np.exp(logp)
    grad[np.arange(n), c] -= 1.0
    return float(loss), grad / n


# --------------------------------------------------------------------------
# Optimizer


@dataclass
class Adam:
    """Bias-corrected Adam. Moments are created lazily on the first step."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: ParamSet, grads: ParamSet) -> None:
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name in params:
            if name not in grads:
                continue
            g = grads[name]
            p = params[name]
            if g.shape != p.shape:
                raise ShapeError(f"{name}: grad shape {g.shape} != param shape {p.shape}")
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params._t[name] = p - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        params.version += 1


def adam_step(params: ParamSet, grads: ParamSet, state: Adam) -> ParamSet:
    """Functional form: returns updated params, advancing ``state`` in place."""
    state.step(params, grads)
    return params


# --------------------------------------------------------------------------
# Gradient checking


def numeric_grad(f: Callable[[], float], arr: np.ndarray, h: float = 1e-5,
                 index=None) -> np.ndarray:
    """Central differences of ``f`` w.r.t. entries of ``arr`` (perturbed in place)."""
    out = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = out.reshape(-1)
    idx = range(flat.size) if index is None else index
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * h)
    return out


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """max |a-n| / max(|a|, |n|, floor): relative where gradients are
    non-negligible, absolute against ``floor`` where both are tiny."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def gradcheck(loss_fn: Callable[[], float], params: ParamSet, grads: ParamSet,
              h: float = 1e-5, max_entries: int | None = None,
              rng: np.random.Generator | None = None) -> float:
    """Worst relative error between ``grads`` and central differences of ``loss_fn``.

    ``loss_fn`` must recompute the loss from the current contents of ``params``.
    With ``max_entries`` only a random subset of each tensor is probed.
    """
    worst = 0.0
    for name in grads:
        arr = params[name]
        index = None
        if max_entries is not None and arr.size > max_entries:
            rng = rng or make_rng(0)
            index = rng.choice(arr.size, size=max_entries, replace=False)
        num = numeric_grad(loss_fn, arr, h, index)
        ana = grads[name]
        if index is not None:
            num, ana = num.ravel()[index], ana.ravel()[index]
        worst = max(worst, max_relative_error(ana, num))
    return worst
