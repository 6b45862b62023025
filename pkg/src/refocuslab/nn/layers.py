"""Functional NN layers with explicit backward passes.

Every forward returns (out, cache); the matching backward consumes the
cache and the upstream gradient and returns exact input/parameter
gradients.  Shapes are batch-first: images [B, C, H, W], vectors [B, D].
"""

from __future__ import annotations

import numpy as np

from .tensor import check_finite

# ---------------------------------------------------------------------------
# conv2d, stride 1, zero 'same' padding
# ---------------------------------------------------------------------------


def _im2col(xp: np.ndarray, kh: int, kw: int):
    b, c, hp, wp = xp.shape
    h, w = hp - kh + 1, wp - kw + 1
    cols = np.empty((b, c, kh * kw, h, w), dtype=xp.dtype)
    i = 0
    for dy in range(kh):
        for dx in range(kw):
            cols[:, :, i] = xp[:, :, dy:dy + h, dx:dx + w]
            i += 1
    return cols.reshape(b, c * kh * kw, h * w)


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """x [B,Cin,H,W] * weight [Cout,Cin,kh,kw] + bias [Cout] -> [B,Cout,H,W]."""
    b, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv2d: input has {cin} channels, weight expects {cin_w}")
    ph, pw = kh // 2, kw // 2
    if kh == 1 and kw == 1:
        wm = weight.reshape(cout, cin)
        out = np.einsum("oc,bchw->bohw", wm, x, optimize=True) + bias[None, :, None, None]
        return check_finite("conv2d", out), ("1x1", x, weight)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = _im2col(xp, kh, kw)
    wm = weight.reshape(cout, -1)
    out = np.matmul(wm, cols).reshape(b, cout, h, w) + bias[None, :, None, None]
    return check_finite("conv2d", out), ("kxk", x.shape, cols, weight)


def conv2d_backward(cache, dout: np.ndarray):
    if cache[0] == "1x1":
        _, x, weight = cache
        cout, cin = weight.shape[:2]
        dw = np.einsum("bohw,bchw->oc", dout, x, optimize=True).reshape(weight.shape)
        db = dout.sum(axis=(0, 2, 3))
        wm = weight.reshape(cout, cin)
        dx = np.einsum("oc,bohw->bchw", wm, dout, optimize=True)
        return dx, dw, db
    _, xshape, cols, weight = cache
    b, cin, h, w = xshape
    cout, _, kh, kw = weight.shape
    ph, pw = kh // 2, kw // 2
    dmat = dout.reshape(b, cout, h * w)
    wm = weight.reshape(cout, -1)
    dw = np.matmul(dmat, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
    db = dout.sum(axis=(0, 2, 3))
    dcols = np.matmul(wm.T, dmat).reshape(b, cin, kh * kw, h, w)
    dxp = np.zeros((b, cin, h + 2 * ph, w + 2 * pw), dtype=dout.dtype)
    i = 0
    for dy in range(kh):
        for dx_ in range(kw):
            dxp[:, :, dy:dy + h, dx_:dx_ + w] += dcols[:, :, i]
            i += 1
    dx = dxp[:, :, ph:ph + h, pw:pw + w]
    return dx, dw, db


# ---------------------------------------------------------------------------
# group normalization
# ---------------------------------------------------------------------------

_GN_EPS = 1e-5


def group_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, groups: int):
    b, c, h, w = x.shape
    if c % groups:
        raise ValueError(f"group_norm: {c} channels not divisible into {groups} groups")
    xg = x.reshape(b, groups, -1)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + _GN_EPS)
    xhat = ((xg - mu) * inv).reshape(b, c, h, w)
    out = xhat * gamma[None, :, None, None] + beta[None, :, None, None]
    return check_finite("group_norm", out), (xhat, inv, gamma, groups)


def group_norm_backward(cache, dout: np.ndarray):
    xhat, inv, gamma, groups = cache
    b, c, h, w = dout.shape
    dgamma = (dout * xhat).sum(axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = (dout * gamma[None, :, None, None]).reshape(b, groups, -1)
    xhat_g = xhat.reshape(b, groups, -1)
    n = xhat_g.shape[2]
    # dx = inv/n * (n*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat))
    s1 = dxhat.sum(axis=2, keepdims=True)
    s2 = (dxhat * xhat_g).sum(axis=2, keepdims=True)
    dx = (inv / n) * (n * dxhat - s1 - xhat_g * s2)
    return dx.reshape(b, c, h, w), dgamma, dbeta


# ---------------------------------------------------------------------------
# SiLU
# ---------------------------------------------------------------------------

def silu(x: np.ndarray):
    sig = 1.0 / (1.0 + np.exp(-x))
    return x * sig, (x, sig)


def silu_backward(cache, dout: np.ndarray):
    x, sig = cache
    return dout * sig * (1.0 + x * (1.0 - sig))


# ---------------------------------------------------------------------------
# linear
# ---------------------------------------------------------------------------

def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """x [B,D] @ weight.T [D,K] + bias [K]."""
    return x @ weight.T + bias, (x, weight)


def linear_backward(cache, dout: np.ndarray):
    x, weight = cache
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ weight
    return dx, dw, db


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def avgpool2(x: np.ndarray):
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"avgpool2 needs even spatial dims, got {h}x{w}")
    out = x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return out, (h, w)


def avgpool2_backward(cache, dout: np.ndarray):
    h, w = cache
    b, c = dout.shape[:2]
    dx = np.broadcast_to(dout[:, :, :, None, :, None] * 0.25,
                         (b, c, h // 2, 2, w // 2, 2))
    return dx.reshape(b, c, h, w).copy()


def upsample_nearest2(x: np.ndarray):
    out = np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)
    return out, x.shape


def upsample_nearest2_backward(cache, dout: np.ndarray):
    b, c, h, w = cache
    return dout.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5))


# ---------------------------------------------------------------------------
# timestep embedding (constant in parameters; no backward needed)
# ---------------------------------------------------------------------------

def sinusoidal_embedding(t, dim: int, dtype=np.float64) -> np.ndarray:
    """t (scalar or [B]) -> [B, dim] sin/cos features over log-spaced frequencies."""
    tt = np.atleast_1d(np.asarray(t, dtype=dtype))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half, dtype=dtype) / max(half - 1, 1))
    ang = tt[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(ang), np.cos(ang)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((emb.shape[0], 1), dtype=dtype)], axis=1)
    return emb
