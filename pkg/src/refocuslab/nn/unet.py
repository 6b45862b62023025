"""Toy UNet denoiser: folded frame axis, FiLM timestep conditioning.

The stack's frame axis is folded into channels (2-D convolutions over HxW
with F*C*2 input channels for the diffusion net), which keeps frame
identity positional: output channel i always corresponds to the same
(frame, color) slot as input channel i.  Timestep (and optionally a scalar
focal-position id) enters through sinusoidal embeddings and per-block
affine modulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core.rng import Rng
from . import layers as L
from .tensor import check_finite

INPUT_NOISY_PLUS_COND = "noisy_plus_cond"
INPUT_COND_ONLY = "cond_only"


@dataclass(frozen=True)
class DenoiserArch:
    frames: int = 5
    channels: int = 1
    base_width: int = 16
    depth: int = 2
    time_dim: int = 64
    input_kind: str = INPUT_NOISY_PLUS_COND
    position_embed: bool = False

    def __post_init__(self):
        if self.frames < 1 or self.channels not in (1, 3):
            raise ValueError("DenoiserArch: frames >= 1 and channels in {1,3}")
        if self.depth < 1 or self.base_width < 4 or self.time_dim < 8:
            raise ValueError("DenoiserArch: depth >= 1, base_width >= 4, time_dim >= 8")
        if self.input_kind not in (INPUT_NOISY_PLUS_COND, INPUT_COND_ONLY):
            raise ValueError(f"DenoiserArch: unknown input_kind {self.input_kind!r}")

    @property
    def out_channels(self) -> int:
        return self.frames * self.channels

    @property
    def in_channels(self) -> int:
        fc = self.frames * self.channels
        return 2 * fc if self.input_kind == INPUT_NOISY_PLUS_COND else fc

    def widths(self) -> list:
        return [self.base_width * min(lvl + 1, 4) for lvl in range(self.depth + 1)]

    def to_dict(self) -> dict:
        return {
            "frames": self.frames, "channels": self.channels, "base_width": self.base_width,
            "depth": self.depth, "time_dim": self.time_dim, "input_kind": self.input_kind,
            "position_embed": self.position_embed,
        }

    @staticmethod
    def from_dict(doc: dict) -> "DenoiserArch":
        return DenoiserArch(**doc)


def _groups(c: int) -> int:
    for g in (8, 4, 2):
        if c % g == 0:
            return g
    return 1


def init_params(arch: DenoiserArch, rng: Rng) -> dict:
    """He-init convolutions, neutral norms, zero-init head and FiLM projections."""
    p: dict = {}

    def conv(name, cout, cin, k):
        fan_in = cin * k * k
        p[f"{name}.w"] = (rng.normal((cout, cin, k, k)) * np.sqrt(2.0 / fan_in)).astype(np.float32)
        p[f"{name}.b"] = np.zeros(cout, dtype=np.float32)

    def gn(name, c):
        p[f"{name}.g"] = np.ones(c, dtype=np.float32)
        p[f"{name}.b"] = np.zeros(c, dtype=np.float32)

    def lin(name, cout, cin, zero=False):
        if zero:
            p[f"{name}.w"] = np.zeros((cout, cin), dtype=np.float32)
        else:
            p[f"{name}.w"] = (rng.normal((cout, cin)) * np.sqrt(2.0 / cin)).astype(np.float32)
        p[f"{name}.b"] = np.zeros(cout, dtype=np.float32)

    def resblock(name, cin, cout):
        gn(f"{name}.gn1", cin)
        conv(f"{name}.conv1", cout, cin, 3)
        lin(f"{name}.film", 2 * cout, arch.time_dim, zero=True)
        gn(f"{name}.gn2", cout)
        conv(f"{name}.conv2", cout, cout, 3)
        if cin != cout:
            conv(f"{name}.skip", cout, cin, 1)

    widths = arch.widths()
    lin("time.l1", arch.time_dim, arch.time_dim)
    lin("time.l2", arch.time_dim, arch.time_dim)
    if arch.position_embed:
        p["pos.table"] = (0.02 * rng.normal((arch.frames, arch.time_dim))).astype(np.float32)
    conv("in", widths[0], arch.in_channels, 3)
    for lvl in range(arch.depth):
        resblock(f"down{lvl}", widths[lvl], widths[lvl])
        conv(f"lift{lvl}", widths[lvl + 1], widths[lvl], 1)
    resblock("mid", widths[arch.depth], widths[arch.depth])
    for lvl in reversed(range(arch.depth)):
        conv(f"uplift{lvl}", widths[lvl], widths[lvl + 1], 1)
        resblock(f"up{lvl}", 2 * widths[lvl], widths[lvl])
    gn("out.gn", widths[0])
    p["out.w"] = np.zeros((arch.out_channels, widths[0], 3, 3), dtype=np.float32)
    p["out.b"] = np.zeros(arch.out_channels, dtype=np.float32)
    return p


# ---------------------------------------------------------------------------
# resblock
# ---------------------------------------------------------------------------

def _resblock_forward(p, name, x, emb):
    cin = x.shape[1]
    cout = p[f"{name}.conv2.b"].shape[0]
    g1, c1 = L.group_norm(x, p[f"{name}.gn1.g"], p[f"{name}.gn1.b"], _groups(cin))
    s1, c2 = L.silu(g1)
    h, c3 = L.conv2d(s1, p[f"{name}.conv1.w"], p[f"{name}.conv1.b"])
    film, c4 = L.linear(emb, p[f"{name}.film.w"], p[f"{name}.film.b"])
    scale, shift = film[:, :cout], film[:, cout:]
    g2, c5 = L.group_norm(h, p[f"{name}.gn2.g"], p[f"{name}.gn2.b"], _groups(cout))
    mod = g2 * (1.0 + scale[:, :, None, None]) + shift[:, :, None, None]
    s2, c6 = L.silu(mod)
    h2, c7 = L.conv2d(s2, p[f"{name}.conv2.w"], p[f"{name}.conv2.b"])
    if cin != cout:
        sk, c8 = L.conv2d(x, p[f"{name}.skip.w"], p[f"{name}.skip.b"])
    else:
        sk, c8 = x, None
    out = sk + h2
    cache = (c1, c2, c3, c4, c5, c6, c7, c8, g2, scale, cin, cout)
    return check_finite(name, out), cache


def _resblock_backward(p, name, cache, dout, grads, demb):
    c1, c2, c3, c4, c5, c6, c7, c8, g2, scale, cin, cout = cache
    if c8 is not None:
        dsk, dw, db = L.conv2d_backward(c8, dout)
        grads[f"{name}.skip.w"] = grads.get(f"{name}.skip.w", 0) + dw
        grads[f"{name}.skip.b"] = grads.get(f"{name}.skip.b", 0) + db
    else:
        dsk = dout
    ds2, dw, db = L.conv2d_backward(c7, dout)
    grads[f"{name}.conv2.w"] = grads.get(f"{name}.conv2.w", 0) + dw
    grads[f"{name}.conv2.b"] = grads.get(f"{name}.conv2.b", 0) + db
    dmod = L.silu_backward(c6, ds2)
    dg2 = dmod * (1.0 + scale[:, :, None, None])
    dscale = (dmod * g2).sum(axis=(2, 3))
    dshift = dmod.sum(axis=(2, 3))
    dfilm = np.concatenate([dscale, dshift], axis=1)
    demb_l, dw, db = L.linear_backward(c4, dfilm)
    grads[f"{name}.film.w"] = grads.get(f"{name}.film.w", 0) + dw
    grads[f"{name}.film.b"] = grads.get(f"{name}.film.b", 0) + db
    demb += demb_l
    dh, dg, dbt = L.group_norm_backward(c5, dg2)
    grads[f"{name}.gn2.g"] = grads.get(f"{name}.gn2.g", 0) + dg
    grads[f"{name}.gn2.b"] = grads.get(f"{name}.gn2.b", 0) + dbt
    ds1, dw, db = L.conv2d_backward(c3, dh)
    grads[f"{name}.conv1.w"] = grads.get(f"{name}.conv1.w", 0) + dw
    grads[f"{name}.conv1.b"] = grads.get(f"{name}.conv1.b", 0) + db
    dg1 = L.silu_backward(c2, ds1)
    dx, dg, dbt = L.group_norm_backward(c1, dg1)
    grads[f"{name}.gn1.g"] = grads.get(f"{name}.gn1.g", 0) + dg
    grads[f"{name}.gn1.b"] = grads.get(f"{name}.gn1.b", 0) + dbt
    return dx + dsk, demb


# ---------------------------------------------------------------------------
# full denoiser
# ---------------------------------------------------------------------------

def denoiser_apply(params: dict, arch: DenoiserArch, z_t, cond, t, pos_id=None):
    """Forward pass.  Returns (eps_hat [B, F*C, H, W], cache).

    z_t is None for cond_only (regression) architectures.  t and pos_id are
    scalars or [B] integer arrays.
    """
    dtype = params["in.w"].dtype
    if arch.input_kind == INPUT_NOISY_PLUS_COND:
        if z_t is None:
            raise ValueError("denoiser: z_t required for noisy_plus_cond input")
        x = np.concatenate([z_t, cond], axis=1).astype(dtype, copy=False)
    else:
        x = np.asarray(cond, dtype=dtype)
    if x.ndim != 4:
        raise ValueError(f"denoiser: expected [B, C, H, W] input, got shape {x.shape}")
    b, cin, h, w = x.shape
    if cin != arch.in_channels:
        raise ValueError(f"denoiser: {cin} input channels, arch expects {arch.in_channels}")
    stride = 2 ** arch.depth
    if h % stride or w % stride:
        raise ValueError(f"denoiser: spatial dims {h}x{w} must be multiples of {stride}")

    tt = np.broadcast_to(np.atleast_1d(np.asarray(t, dtype=np.int64)), (b,))
    emb0 = L.sinusoidal_embedding(tt, arch.time_dim, dtype=dtype)
    e1, ce1 = L.linear(emb0, params["time.l1.w"], params["time.l1.b"])
    e1s, ce2 = L.silu(e1)
    e2, ce3 = L.linear(e1s, params["time.l2.w"], params["time.l2.b"])
    emb, ce4 = L.silu(e2)
    pos_idx = None
    if arch.position_embed and pos_id is not None:
        # entries of -1 mean "no position id" (the unconditional branch)
        pos_idx = np.broadcast_to(np.atleast_1d(np.asarray(pos_id, dtype=np.int64)), (b,)).copy()
        valid = pos_idx >= 0
        lookup = params["pos.table"][np.where(valid, pos_idx, 0)]
        emb = emb + np.where(valid[:, None], lookup, 0.0)
        pos_idx[~valid] = -1

    caches = {"time": (ce1, ce2, ce3, ce4), "pos_idx": pos_idx, "b": b}
    x, caches["in"] = L.conv2d(x, params["in.w"], params["in.b"])
    skips = []
    for lvl in range(arch.depth):
        x, caches[f"down{lvl}"] = _resblock_forward(params, f"down{lvl}", x, emb)
        skips.append(x)
        x, caches[f"pool{lvl}"] = L.avgpool2(x)
        x, caches[f"lift{lvl}"] = L.conv2d(x, params[f"lift{lvl}.w"], params[f"lift{lvl}.b"])
    x, caches["mid"] = _resblock_forward(params, "mid", x, emb)
    for lvl in reversed(range(arch.depth)):
        x, caches[f"upsample{lvl}"] = L.upsample_nearest2(x)
        x, caches[f"uplift{lvl}"] = L.conv2d(x, params[f"uplift{lvl}.w"], params[f"uplift{lvl}.b"])
        caches[f"cat{lvl}"] = x.shape[1]
        x = np.concatenate([x, skips[lvl]], axis=1)
        x, caches[f"up{lvl}"] = _resblock_forward(params, f"up{lvl}", x, emb)
    x, caches["out.gn"] = L.group_norm(x, params["out.gn.g"], params["out.gn.b"], _groups(x.shape[1]))
    x, caches["out.silu"] = L.silu(x)
    eps_hat, caches["out"] = L.conv2d(x, params["out.w"], params["out.b"])
    return check_finite("eps_hat", eps_hat), caches


def denoiser_apply_backward(params: dict, arch: DenoiserArch, caches: dict, d_eps: np.ndarray) -> dict:
    """Exact gradients of denoiser_apply w.r.t. every parameter."""
    grads: dict = {}
    b = caches["b"]
    demb = np.zeros((b, arch.time_dim), dtype=d_eps.dtype)

    dx, dw, db = L.conv2d_backward(caches["out"], d_eps)
    grads["out.w"], grads["out.b"] = dw, db
    dx = L.silu_backward(caches["out.silu"], dx)
    dx, dg, dbt = L.group_norm_backward(caches["out.gn"], dx)
    grads["out.gn.g"], grads["out.gn.b"] = dg, dbt

    dskips = {}
    for lvl in range(arch.depth):
        dx, demb = _resblock_backward(params, f"up{lvl}", caches[f"up{lvl}"], dx, grads, demb)
        split = caches[f"cat{lvl}"]
        dx, dskip = dx[:, :split], dx[:, split:]
        dskips[lvl] = dskip
        dx, dw, db = L.conv2d_backward(caches[f"uplift{lvl}"], dx)
        grads[f"uplift{lvl}.w"], grads[f"uplift{lvl}.b"] = dw, db
        dx = L.upsample_nearest2_backward(caches[f"upsample{lvl}"], dx)
    dx, demb = _resblock_backward(params, "mid", caches["mid"], dx, grads, demb)
    for lvl in reversed(range(arch.depth)):
        dx, dw, db = L.conv2d_backward(caches[f"lift{lvl}"], dx)
        grads[f"lift{lvl}.w"], grads[f"lift{lvl}.b"] = dw, db
        dx = L.avgpool2_backward(caches[f"pool{lvl}"], dx)
        dx = dx + dskips[lvl]
        dx, demb = _resblock_backward(params, f"down{lvl}", caches[f"down{lvl}"], dx, grads, demb)
    _, dw, db = L.conv2d_backward(caches["in"], dx)
    grads["in.w"], grads["in.b"] = dw, db

    pos_idx = caches["pos_idx"]
    if arch.position_embed:
        dtable = np.zeros_like(params["pos.table"], dtype=d_eps.dtype)
        if pos_idx is not None:
            valid = pos_idx >= 0
            np.add.at(dtable, pos_idx[valid], demb[valid])
        grads["pos.table"] = dtable
    ce1, ce2, ce3, ce4 = caches["time"]
    de2 = L.silu_backward(ce4, demb)
    de1s, dw, db = L.linear_backward(ce3, de2)
    grads["time.l2.w"], grads["time.l2.b"] = dw, db
    de1 = L.silu_backward(ce2, de1s)
    _, dw, db = L.linear_backward(ce1, de1)
    grads["time.l1.w"], grads["time.l1.b"] = dw, db
    return grads
