"""Variance-preserving SDE with a linear noise schedule.

Forward process ``dx = -1/2 beta(t) x dt + sqrt(beta(t)) dW`` on ``t in [0, T]``
with ``beta(t) = beta_min + (beta_max - beta_min) t``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

SIGMA_WEIGHT = "sigma"
INVERSE_SIGMA_WEIGHT = "inverse_sigma"
STANDARD_VP = "standard"
PAPER_FORMULA = "paper"


@dataclass(frozen=True)
class SdeConfig:
    beta_min: float = 0.1
    beta_max: float = 20.0
    eps: float = 1e-5
    T: float = 1.0
    weighting: str = SIGMA_WEIGHT
    std_convention: str = STANDARD_VP

    def __post_init__(self):
        if not 0.0 < self.eps < self.T:
            raise ValueError("need 0 < eps < T")
        if not self.beta_max > self.beta_min > 0.0:
            raise ValueError("need beta_max > beta_min > 0")
        if self.weighting not in (SIGMA_WEIGHT, INVERSE_SIGMA_WEIGHT):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.std_convention not in (STANDARD_VP, PAPER_FORMULA):
            raise ValueError(f"unknown std convention {self.std_convention!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_t(cfg: SdeConfig, t, lo: float = 0.0):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < lo) or np.any(t > cfg.T):
        raise ValueError(f"t must lie in [{lo}, {cfg.T}]")
    return t


def beta(cfg: SdeConfig, t):
    t = _check_t(cfg, t)
    return cfg.beta_min + (cfg.beta_max - cfg.beta_min) * t


def int_beta(cfg: SdeConfig, t):
    """Closed-form integral of beta from 0 to t."""
    t = _check_t(cfg, t)
    return cfg.beta_min * t + 0.5 * (cfg.beta_max - cfg.beta_min) * t**2


def mean_coef(cfg: SdeConfig, t):
    return np.exp(-0.5 * int_beta(cfg, t))


def marginal_std(cfg: SdeConfig, t):
    """Std of x(t) given x(0).

    ``standard``: sqrt(1 - exp(-int beta)). ``paper``: 1 - exp(-1/2 int beta),
    kept for comparison runs.
    """
    ib = int_beta(cfg, t)
    if cfg.std_convention == STANDARD_VP:
        return np.sqrt(-np.expm1(-ib))
    return -np.expm1(-0.5 * ib)


def drift(cfg: SdeConfig, x, t: float):
    return -0.5 * float(beta(cfg, t)) * np.asarray(x, dtype=np.float64)


def diffusion_coef(cfg: SdeConfig, t):
    return np.sqrt(beta(cfg, t))


def loss_weight(cfg: SdeConfig, t):
    s = marginal_std(cfg, t)
    return s if cfg.weighting == SIGMA_WEIGHT else 1.0 / s


def _per_row(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.broadcast_to(v, (n,))[:, None] if v.ndim else np.full((n, 1), float(v))


def perturb(cfg: SdeConfig, x0, t, z) -> np.ndarray:
    """Sample of the transition kernel: mean_coef(t) x0 + std(t) z.

    ``t`` is a scalar or one time per row.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x0.shape != z.shape:
        raise ValueError(f"x0 shape {x0.shape} != noise shape {z.shape}")
    t = _check_t(cfg, t, lo=cfg.eps)
    n = x0.shape[0]
    return _per_row(mean_coef(cfg, t), n) * x0 + _per_row(marginal_std(cfg, t), n) * z


def sample_times(cfg: SdeConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(cfg.eps, cfg.T, size=n)


def dsm_objective(cfg: SdeConfig, score: np.ndarray, t, z: np.ndarray):
    """Weighted denoising score-matching loss for given score values.

    The conditional score target is ``-z / std(t)``. Returns
    ``(loss, d loss / d score)``; the loss is the batch mean of
    ``lambda(t)^2 * ||score + z/std(t)||^2``.
    """
    n = score.shape[0]
    std = _per_row(marginal_std(cfg, t), n)
    lam2 = _per_row(loss_weight(cfg, t), n) ** 2
    resid = score + z / std
    loss = float(np.mean(lam2[:, 0] * np.sum(resid**2, axis=1)))
    return loss, 2.0 * lam2 * resid / n


def dsm_loss_with_score(cfg: SdeConfig, score_fn, x0, rng=None, t=None, z=None) -> float:
    """DSM loss of an arbitrary score function ``score_fn(x, t)`` (no gradients)."""
    x0 = np.asarray(x0, dtype=np.float64)
    n = x0.shape[0]
    t = sample_times(cfg, n, rng) if t is None else np.broadcast_to(np.asarray(t, float), (n,))
    z = rng.standard_normal(x0.shape) if z is None else z
    xt = perturb(cfg, x0, t, z)
    loss, _ = dsm_objective(cfg, score_fn(xt, t), t, z)
    return loss


def em_step(cfg: SdeConfig, x: np.ndarray, t: float, dt: float, score: np.ndarray,
            z: np.ndarray | None) -> np.ndarray:
    """One reverse-time Euler-Maruyama step from t to t - dt.

    ``x - dt * (f - g^2 S) + g sqrt(dt) z``; with ``z=None`` the noise term
    is dropped.
    """
    g = float(diffusion_coef(cfg, t))
    f = drift(cfg, x, t)
    x_mean = x - dt * (f - g * g * score)
    if z is None:
        return x_mean
    return x_mean + g * np.sqrt(dt) * z
