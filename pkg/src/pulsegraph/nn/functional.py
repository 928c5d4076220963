"""Differentiable numpy primitives: each forward has a matching ``*_backward``."""
from __future__ import annotations

import numpy as np
from scipy.special import erf

LN_EPS = 1e-5
_SQRT2 = np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def linear(x, w, b=None):
    y = x @ w
    return y if b is None else y + b


def linear_backward(dy, x, w):
    """Gradients of ``x @ w + b`` for ``x`` of shape ``[..., in]``."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    return dy @ w.T, x2.T @ dy2, dy2.sum(axis=0)


def layernorm(x, gamma, beta, eps=LN_EPS):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * rstd
    return xhat * gamma + beta, (xhat, rstd)


def layernorm_backward(dy, cache, gamma):
    xhat, rstd = cache
    lead = tuple(range(dy.ndim - 1))
    dgamma = (dy * xhat).sum(axis=lead)
    dbeta = dy.sum(axis=lead)
    dxhat = dy * gamma
    dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                 - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dgamma, dbeta


def gelu(x):
    """Exact (erf) GELU."""
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_backward(dy, x):
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return dy * (cdf + x * pdf)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(dy, x):
    return dy * (x > 0)


def masked_softmax(scores, mask=None):
    """Softmax over the last axis restricted to ``mask``; all-masked rows give zeros."""
    if mask is None:
        m = scores.max(axis=-1, keepdims=True)
        e = np.exp(scores - m)
        return e / e.sum(axis=-1, keepdims=True)
    filled = np.where(mask, scores, -np.inf)
    m = filled.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.where(mask, np.exp(np.where(mask, scores, m) - m), 0.0)
    z = e.sum(axis=-1, keepdims=True)
    return np.divide(e, z, out=np.zeros_like(e), where=z > 0)


def softmax_backward(dp, p):
    return p * (dp - (dp * p).sum(axis=-1, keepdims=True))
