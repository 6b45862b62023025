"""Tensor conventions and numeric guards for the NN kernel.

Arrays are numpy, batch-first [B, C, H, W], float32 in checkpoints.  Layer
functions are dtype-generic (float64 in gradient-check tests).  Finite
checks are off by default for speed; tests and the trainer's loss guard
switch them on.
"""

from __future__ import annotations

import numpy as np


class NumericError(ArithmeticError):
    """Non-finite value encountered where finiteness is required."""


_FINITE_CHECKS = False


def set_finite_checks(enabled: bool) -> None:
    global _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)


def finite_checks_enabled() -> bool:
    return _FINITE_CHECKS


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if _FINITE_CHECKS and not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in tensor '{name}'")
    return arr


def as_f32(arr) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=np.float32)
