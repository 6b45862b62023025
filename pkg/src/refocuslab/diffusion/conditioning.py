"""Conditioning tensors for the refocusing denoiser.

Three layouts over F frame-shaped slots, all in the model's [-1, 1] value
domain so that an all-zero slot means "no signal" (a black image maps to
-1 and stays distinguishable):

- position_dependent: the input frame sits only at its own slot p, every
  other slot is exactly zero.  This is the mechanism the whole method
  rests on: slot identity tells the model *which* focal position it was
  given.
- replicated: the input frame copied into every slot (the video-model
  convention this work modifies; kept as the ablation path, where a scalar
  position id has to carry the focal position instead).
- unconditional: all slots exactly zero (the guidance null branch).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.image import Image, InvariantError

MODE_POSITION = "position_dependent"
MODE_REPLICATED = "replicated"
MODE_UNCONDITIONAL = "unconditional"
MODES = (MODE_POSITION, MODE_REPLICATED, MODE_UNCONDITIONAL)


@dataclass(frozen=True)
class ConditioningTensor:
    slots: np.ndarray  # (F, C, H, W), model domain
    mode: str
    active_position: int | None = None

    def __post_init__(self):
        s = np.asarray(self.slots, dtype=np.float32)
        if s.ndim != 4:
            raise InvariantError("ConditioningTensor slots must be (F, C, H, W)")
        if self.mode not in MODES:
            raise InvariantError(f"unknown conditioning mode {self.mode!r}")
        f = s.shape[0]
        if self.mode == MODE_POSITION:
            p = self.active_position
            if p is None or not (0 <= p < f):
                raise InvariantError(f"position_dependent needs active_position in [0, {f})")
            others = [i for i in range(f) if i != p]
            if others and np.any(s[others]):
                raise InvariantError("position_dependent: inactive slots must be exactly zero")
        elif self.mode == MODE_REPLICATED:
            if np.any(s != s[0:1]):
                raise InvariantError("replicated: all slots must be equal")
        else:
            if np.any(s):
                raise InvariantError("unconditional: all slots must be exactly zero")
            if self.active_position is not None:
                raise InvariantError("unconditional: active_position must be None")
        object.__setattr__(self, "slots", s)

    @property
    def frame_count(self) -> int:
        return int(self.slots.shape[0])

    def folded(self) -> np.ndarray:
        """(F*C, H, W) channel-folded view for the denoiser."""
        f, c, h, w = self.slots.shape
        return self.slots.reshape(f * c, h, w)

    def zero_slot_count(self) -> int:
        return int(sum(1 for i in range(self.frame_count) if not np.any(self.slots[i])))


def to_model_domain(pixels: np.ndarray) -> np.ndarray:
    """[0,1] pixels -> [-1,1] model values."""
    return (2.0 * np.asarray(pixels, dtype=np.float32) - 1.0).astype(np.float32)


def from_model_domain(values: np.ndarray) -> np.ndarray:
    """[-1,1] model values -> clamped [0,1] pixels."""
    return np.clip((np.asarray(values) + 1.0) / 2.0, 0.0, 1.0).astype(np.float32)


def _frame_chw(frame) -> np.ndarray:
    if isinstance(frame, Image):
        return to_model_domain(frame.data.transpose(2, 0, 1))
    a = np.asarray(frame, dtype=np.float32)
    if a.ndim != 3:
        raise ValueError("conditioning frame must be (C, H, W) or an Image")
    return a


def build_conditioning(frame, p: int, frames: int, mode: str = MODE_POSITION) -> ConditioningTensor:
    """Place a single frame into the F-slot conditioning layout.

    `frame` is an Image (converted to the model domain) or a (C, H, W)
    array already in the model domain; it is used as-is, no feature
    extraction.  `p` names the frame's focal position and must be valid
    even in replicated mode (it feeds the ablation's position id).
    """
    content = _frame_chw(frame)
    if not (0 <= p < frames):
        raise ValueError(f"focal position {p} outside [0, {frames})")
    c, h, w = content.shape
    slots = np.zeros((frames, c, h, w), dtype=np.float32)
    if mode == MODE_POSITION:
        slots[p] = content
        return ConditioningTensor(slots, mode, active_position=p)
    if mode == MODE_REPLICATED:
        slots[:] = content[None]
        return ConditioningTensor(slots, mode, active_position=p)
    if mode == MODE_UNCONDITIONAL:
        return ConditioningTensor(slots, mode, active_position=None)
    raise ValueError(f"unknown conditioning mode {mode!r}")
