"""Model layers with explicit forward/backward passes.

Every ``*_forward`` returns ``(output, cache)`` and the matching
``*_backward(dout, cache, params)`` returns ``(d_input, grads)`` where
``grads`` maps parameter names to arrays shaped like the parameters.
Weight matrices are stored input-major (``y = x @ W``).
"""
from __future__ import annotations

import numpy as np

from ..graph import RELATIONS, RelGraph
from . import functional as Fn


def sinusoid_table(n_pos: int, dim: int) -> np.ndarray:
    """Standard sin/cos table ``[n_pos, dim]``; even columns sin, odd columns cos."""
    pe = np.zeros((n_pos, dim))
    if dim == 0:
        return pe
    pos = np.arange(n_pos)[:, None]
    i = np.arange(0, dim, 2)
    angle = pos / np.power(10000.0, i / dim)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : dim // 2])
    return pe


def positional_encoding(T: int, Hg: int, Wg: int, D: int) -> np.ndarray:
    """Fixed encoding over (t, h', w'): the embedding dim is split into t | h | w blocks."""
    d_s = 2 * (D // 6)
    d_t = D - 2 * d_s
    pe = np.zeros((T, Hg, Wg, D))
    pe[..., :d_t] = sinusoid_table(T, d_t)[:, None, None, :]
    pe[..., d_t:d_t + d_s] = sinusoid_table(Hg, d_s)[None, :, None, :]
    pe[..., d_t + d_s:] = sinusoid_table(Wg, d_s)[None, None, :, :]
    return pe


# -- patch embedding -------------------------------------------------------

def patchify(x: np.ndarray, patch: int) -> np.ndarray:
    T, H, W, C = x.shape
    if H % patch or W % patch:
        raise ValueError(f"frame {H}x{W} not divisible by patch {patch}")
    Hg, Wg = H // patch, W // patch
    return (x.reshape(T, Hg, patch, Wg, patch, C)
             .transpose(0, 1, 3, 2, 4, 5)
             .reshape(T, Hg, Wg, patch * patch * C))


def patch_embed_forward(x, params, patch: int, prefix="patch"):
    """Non-overlapping patches -> linear to D -> + positional encoding -> LayerNorm."""
    tokens = patchify(x, patch)
    T, Hg, Wg, _ = tokens.shape
    D = params[f"{prefix}/kernel"].shape[1]
    z = Fn.linear(tokens, params[f"{prefix}/kernel"], params[f"{prefix}/bias"])
    z = z + positional_encoding(T, Hg, Wg, D).astype(z.dtype)
    y, ln = Fn.layernorm(z, params[f"{prefix}/ln_g"], params[f"{prefix}/ln_b"])
    return y, (tokens, ln)


def patch_embed_backward(dy, cache, params, prefix="patch"):
    tokens, ln = cache
    dz, dg, db = Fn.layernorm_backward(dy, ln, params[f"{prefix}/ln_g"])
    _, dk, dbias = Fn.linear_backward(dz, tokens, params[f"{prefix}/kernel"])
    return None, {f"{prefix}/kernel": dk, f"{prefix}/bias": dbias,
                  f"{prefix}/ln_g": dg, f"{prefix}/ln_b": db}


# -- windowed self-attention block ---------------------------------------

def window_partition(x, ws):
    T, Hg, Wg, D = x.shape
    return (x.reshape(T, Hg // ws, ws, Wg // ws, ws, D)
             .transpose(0, 1, 3, 2, 4, 5)
             .reshape(-1, ws * ws, D))


def window_reverse(win, ws, T, Hg, Wg):
    D = win.shape[-1]
    return (win.reshape(T, Hg // ws, Wg // ws, ws, ws, D)
               .transpose(0, 1, 3, 2, 4, 5)
               .reshape(T, Hg, Wg, D))


def shift_size(block_index: int, window: int, Hg: int, Wg: int) -> int:
    # a window spanning the whole grid has nothing to shift across
    if block_index % 2 == 0 or window >= min(Hg, Wg):
        return 0
    return window // 2


def shifted_window_mask(Hg, Wg, ws, shift):
    """``[nW, n, n]`` boolean: True where two tokens may attend after the cyclic shift."""
    region = np.zeros((Hg, Wg), dtype=np.int64)
    cnt = 0
    for hs in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
        for wsl in (slice(0, -ws), slice(-ws, -shift), slice(-shift, None)):
            region[hs, wsl] = cnt
            cnt += 1
    ids = window_partition(region[None, :, :, None], ws)[..., 0]   # [nW, n]
    return ids[:, :, None] == ids[:, None, :]


def swin_block_forward(x, params, block_index: int, window: int, heads: int):
    """Pre-LN windowed MHSA + pre-LN GELU MLP, both residual, applied per frame."""
    p = f"swin{block_index}"
    T, Hg, Wg, D = x.shape
    if window > min(Hg, Wg) or Hg % window or Wg % window:
        raise ValueError(f"window {window} does not tile the {Hg}x{Wg} token grid")
    if D % heads:
        raise ValueError(f"embed dim {D} not divisible by {heads} heads")
    dh = D // heads
    shift = shift_size(block_index, window, Hg, Wg)

    h, ln1 = Fn.layernorm(x, params[f"{p}/ln1_g"], params[f"{p}/ln1_b"])
    if shift:
        h = np.roll(h, (-shift, -shift), axis=(1, 2))
    win = window_partition(h, window)                       # [N, n, D]
    N, n, _ = win.shape
    qkv = Fn.linear(win, params[f"{p}/qkv_w"], params[f"{p}/qkv_b"])
    qkv = qkv.reshape(N, n, 3, heads, dh).transpose(2, 0, 3, 1, 4)   # [3, N, h, n, dh]
    q, k, v = qkv[0], qkv[1], qkv[2]
    scale = 1.0 / np.sqrt(dh)
    scores = (q @ k.swapaxes(-1, -2)) * scale              # [N, h, n, n]
    mask = None
    if shift:
        wm = shifted_window_mask(Hg, Wg, window, shift)     # [nW, n, n]
        mask = np.tile(wm, (T, 1, 1))[:, None]              # [N, 1, n, n]
    attn = Fn.masked_softmax(scores, mask)
    ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(N, n, D)
    out = Fn.linear(ctx, params[f"{p}/proj_w"], params[f"{p}/proj_b"])
    out = window_reverse(out, window, T, Hg, Wg)
    if shift:
        out = np.roll(out, (shift, shift), axis=(1, 2))
    x1 = x + out

    h2, ln2 = Fn.layernorm(x1, params[f"{p}/ln2_g"], params[f"{p}/ln2_b"])
    m = Fn.linear(h2, params[f"{p}/mlp1_w"], params[f"{p}/mlp1_b"])
    g = Fn.gelu(m)
    y = x1 + Fn.linear(g, params[f"{p}/mlp2_w"], params[f"{p}/mlp2_b"])
    cache = (x.shape, shift, window, heads, ln1, win, q, k, v, attn, ctx, ln2, h2, m, g)
    return y, cache


def swin_block_backward(dy, cache, params, block_index: int):
    p = f"swin{block_index}"
    (shape, shift, window, heads, ln1, win, q, k, v, attn, ctx, ln2, h2, m, g) = cache
    T, Hg, Wg, D = shape
    N, n, _ = win.shape
    dh = D // heads
    grads = {}

    dg, grads[f"{p}/mlp2_w"], grads[f"{p}/mlp2_b"] = Fn.linear_backward(dy, g, params[f"{p}/mlp2_w"])
    dm = Fn.gelu_backward(dg, m)
    dh2, grads[f"{p}/mlp1_w"], grads[f"{p}/mlp1_b"] = Fn.linear_backward(dm, h2, params[f"{p}/mlp1_w"])
    dx1_ln, grads[f"{p}/ln2_g"], grads[f"{p}/ln2_b"] = Fn.layernorm_backward(dh2, ln2, params[f"{p}/ln2_g"])
    dx1 = dy + dx1_ln

    dout = dx1
    if shift:
        dout = np.roll(dout, (-shift, -shift), axis=(1, 2))
    dout = window_partition(dout, window)
    dctx, grads[f"{p}/proj_w"], grads[f"{p}/proj_b"] = Fn.linear_backward(dout, ctx, params[f"{p}/proj_w"])
    dctx = dctx.reshape(N, n, heads, dh).transpose(0, 2, 1, 3)
    dattn = dctx @ v.swapaxes(-1, -2)
    dv = attn.swapaxes(-1, -2) @ dctx
    dscores = Fn.softmax_backward(dattn, attn) / np.sqrt(dh)
    dq = dscores @ k
    dk = dscores.swapaxes(-1, -2) @ q
    dqkv = np.stack([dq, dk, dv]).transpose(1, 3, 0, 2, 4).reshape(N, n, 3 * D)
    dwin, grads[f"{p}/qkv_w"], grads[f"{p}/qkv_b"] = Fn.linear_backward(dqkv, win, params[f"{p}/qkv_w"])
    dh_ = window_reverse(dwin, window, T, Hg, Wg)
    if shift:
        dh_ = np.roll(dh_, (shift, shift), axis=(1, 2))
    dx_ln, grads[f"{p}/ln1_g"], grads[f"{p}/ln1_b"] = Fn.layernorm_backward(dh_, ln1, params[f"{p}/ln1_g"])
    return dx1 + dx_ln, grads


# -- frame encoder ---------------------------------------------------------

def frame_encode_forward(feats, params, prefix="frame"):
    """Spatial average pool per frame, then a linear map D -> d_g."""
    pooled = feats.mean(axis=(1, 2))
    return Fn.linear(pooled, params[f"{prefix}/w"], params[f"{prefix}/b"]), (feats.shape, pooled)


def frame_encode_backward(dy, cache, params, prefix="frame"):
    shape, pooled = cache
    dpooled, dw, db = Fn.linear_backward(dy, pooled, params[f"{prefix}/w"])
    T, Hg, Wg, D = shape
    dfeats = np.broadcast_to(dpooled[:, None, None, :] / (Hg * Wg), shape).copy()
    return dfeats, {f"{prefix}/w": dw, f"{prefix}/b": db}


# -- relational graph convolution -----------------------------------------

def rgcn_forward(X, graph: RelGraph, params, prefix="rgcn"):
    """g_i = W0 x_i + sum_r mean_{j in N_r(i)} W_r x_j  (no bias, no activation)."""
    if X.shape[0] != graph.T:
        raise ValueError(f"{X.shape[0]} node features for a graph of {graph.T} nodes")
    out = X @ params[f"{prefix}/w0"]
    agg = {}
    for r in RELATIONS:
        A = graph.mean_adjacency[r].astype(X.dtype)
        agg[r] = A @ X
        out = out + agg[r] @ params[f"{prefix}/w_{r}"]
    return out, (X, agg)


def rgcn_backward(dG, cache, graph: RelGraph, params, prefix="rgcn"):
    X, agg = cache
    grads = {f"{prefix}/w0": X.T @ dG}
    dX = dG @ params[f"{prefix}/w0"].T
    for r in RELATIONS:
        w = params[f"{prefix}/w_{r}"]
        grads[f"{prefix}/w_{r}"] = agg[r].T @ dG
        dX = dX + graph.mean_adjacency[r].T.astype(dG.dtype) @ (dG @ w.T)
    return dX, grads


# -- graph transformer ----------------------------------------------------

def graph_transformer_forward(G, graph: RelGraph, params, prefix="gt"):
    """Per head c: W1 g_i + sum_{j in N(i)} alpha_ij W2 g_j; heads concatenated.

    alpha is a softmax of (W3 g_i).(W4 g_j) / sqrt(d_alpha) over the union of
    all relation neighbours of i.  ``w1..w4`` are stacked ``[C, h1, .]``.
    """
    if G.shape[0] != graph.T:
        raise ValueError(f"{G.shape[0]} node features for a graph of {graph.T} nodes")
    w1, w2, w3, w4 = (params[f"{prefix}/w{i}"] for i in range(1, 5))
    C = w1.shape[0]
    d_alpha = w3.shape[2]
    Q = np.einsum("th,cha->cta", G, w3)
    K = np.einsum("th,cha->cta", G, w4)
    V = np.einsum("th,chk->ctk", G, w2)
    S = Q @ K.swapaxes(-1, -2) / np.sqrt(d_alpha)                      # [C, T, T]
    alpha = Fn.masked_softmax(S, graph.union_mask[None])
    O = np.einsum("th,chk->ctk", G, w1) + alpha @ V                   # [C, T, h2]
    out = O.transpose(1, 0, 2).reshape(G.shape[0], -1)
    return out, (G, Q, K, V, alpha)


def graph_transformer_backward(dout, cache, params, prefix="gt"):
    G, Q, K, V, alpha = cache
    w1, w2, w3, w4 = (params[f"{prefix}/w{i}"] for i in range(1, 5))
    C, _, h2 = w1.shape
    d_alpha = w3.shape[2]
    T = G.shape[0]
    dO = dout.reshape(T, C, h2).transpose(1, 0, 2)                    # [C, T, h2]
    dalpha = dO @ V.swapaxes(-1, -2)
    dV = alpha.swapaxes(-1, -2) @ dO
    dS = Fn.softmax_backward(dalpha, alpha) / np.sqrt(d_alpha)
    dQ = dS @ K
    dK = dS.swapaxes(-1, -2) @ Q
    grads = {
        f"{prefix}/w1": np.einsum("th,ctk->chk", G, dO),
        f"{prefix}/w2": np.einsum("th,ctk->chk", G, dV),
        f"{prefix}/w3": np.einsum("th,cta->cha", G, dQ),
        f"{prefix}/w4": np.einsum("th,cta->cha", G, dK),
    }
    dG = (np.einsum("ctk,chk->th", dO, w1) + np.einsum("ctk,chk->th", dV, w2)
          + np.einsum("cta,cha->th", dQ, w3) + np.einsum("cta,cha->th", dK, w4))
    return dG, grads


# -- predictor head and loss ----------------------------------------------

def head_forward(O, params, prefix="head"):
    return O @ params[f"{prefix}/w"] + params[f"{prefix}/b"], O


def head_backward(dy, O, params, prefix="head"):
    return np.outer(dy, params[f"{prefix}/w"]), {f"{prefix}/w": O.T @ dy,
                                                  f"{prefix}/b": np.asarray(dy.sum())}


def neg_pearson_loss(pred, gt):
    """``1 - r(pred, gt)`` and its gradient with respect to ``pred``."""
    pred = np.asarray(pred)
    gt = np.asarray(gt, dtype=pred.dtype)
    if pred.shape != gt.shape or pred.ndim != 1 or pred.size < 2:
        raise ValueError("neg_pearson_loss needs equal-length 1-D series, T >= 2")
    dx = pred - pred.mean()
    dy = gt - gt.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("flat signal")
    norm = np.sqrt(sxx * syy)
    r = float(dx @ dy) / norm
    grad = -(dy / norm - r * dx / sxx)
    return 1.0 - r, grad.astype(pred.dtype)
