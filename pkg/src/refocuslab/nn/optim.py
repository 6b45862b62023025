"""Parameter store, Adam, and EMA shadow weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.rng import Rng
from .tensor import NumericError
from .unet import DenoiserArch, denoiser_apply, denoiser_apply_backward, init_params

ADAM_LR_DEFAULT = 4e-4  # toy training reuses the diffusion-model learning rate preset
EMA_RATE_TOY = 1e-3
EMA_RATE_PAPER = 1e-5  # far too slow for desk-scale step counts; kept as a preset


class StaleCacheError(RuntimeError):
    """Backward called with a cache from before a parameter update."""


@dataclass
class ParamStore:
    """Named parameters plus Adam moments, EMA shadows, and a step counter."""

    arch: DenoiserArch
    params: dict
    m: dict
    v: dict
    ema: dict
    step: int = 0
    version: int = 0

    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))


def create_store(arch: DenoiserArch, rng: Rng) -> ParamStore:
    params = init_params(arch, rng)
    return ParamStore(
        arch=arch,
        params=params,
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        ema={k: p.copy() for k, p in params.items()},
    )


def denoiser_forward(store: ParamStore, z_t, cond, t, pos_id=None, use_ema: bool = False):
    """eps_hat plus a cache bound to the current parameter version."""
    params = store.ema if use_ema else store.params
    eps_hat, caches = denoiser_apply(params, store.arch, z_t, cond, t, pos_id)
    return eps_hat, (caches, store.version, use_ema)


def denoiser_backward(store: ParamStore, cache, d_eps: np.ndarray) -> dict:
    caches, version, use_ema = cache
    if version != store.version:
        raise StaleCacheError(
            f"cache from parameter version {version}, store is at {store.version}")
    params = store.ema if use_ema else store.params
    return denoiser_apply_backward(params, store.arch, caches, d_eps)


def adam_step(store: ParamStore, grads: dict, lr: float = ADAM_LR_DEFAULT,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Standard Adam with bias correction; the step counter increments first."""
    store.step += 1
    store.version += 1
    t = store.step
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in store.params.items():
        g = grads.get(name)
        if g is None:
            continue
        g = np.asarray(g, dtype=p.dtype)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def ema_update(store: ParamStore, rate: float = EMA_RATE_TOY) -> None:
    """shadow <- shadow + rate * (param - shadow)."""
    for name, p in store.params.items():
        e = store.ema[name]
        e += rate * (p - e)
