"""Forward noising process: variance-preserving schedule and q_sample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.image import InvariantError

T_DEFAULT = 1000
BETA_START = 1e-4
BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray  # (T,)

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or b.size < 2:
            raise InvariantError("NoiseSchedule needs a 1-D beta array with T >= 2")
        if b.min() <= 0 or b.max() >= 1:
            raise InvariantError("betas must lie in (0, 1)")
        if np.any(np.diff(b) < 0):
            raise InvariantError("betas must be non-decreasing")
        alpha_bar = np.cumprod(1.0 - b)
        if np.any(np.diff(alpha_bar) >= 0):
            raise InvariantError("alpha_bar must be strictly decreasing")
        if alpha_bar[0] <= 0.999:
            raise InvariantError(f"alpha_bar[0] = {alpha_bar[0]:.6f} must exceed 0.999")
        if alpha_bar[-1] >= 0.01:
            raise InvariantError(f"alpha_bar[T-1] = {alpha_bar[-1]:.6f} must be below 0.01")
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "_alpha_bar", alpha_bar)

    @property
    def total_steps(self) -> int:
        return int(self.betas.size)

    @property
    def alpha_bar(self) -> np.ndarray:
        return self._alpha_bar

    @staticmethod
    def linear(total_steps: int = T_DEFAULT, beta_start: float = BETA_START,
               beta_end: float = BETA_END) -> "NoiseSchedule":
        return NoiseSchedule(np.linspace(beta_start, beta_end, total_steps))


def q_sample(z0: np.ndarray, t, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps.

    t is a scalar or an array matching z0's leading (batch) axis.
    """
    z0 = np.asarray(z0)
    eps = np.asarray(eps)
    if z0.shape != eps.shape:
        raise ValueError(f"q_sample: z0 {z0.shape} and eps {eps.shape} shapes differ")
    tt = np.asarray(t, dtype=np.int64)
    if np.any(tt < 0) or np.any(tt >= schedule.total_steps):
        raise ValueError(f"q_sample: t outside [0, {schedule.total_steps})")
    ab = schedule.alpha_bar[tt]
    if tt.ndim > 0:
        extra = (1,) * (z0.ndim - 1)
        ab = ab.reshape((-1,) + extra)
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps
