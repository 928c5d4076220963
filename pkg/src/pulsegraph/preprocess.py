"""Per-clip input features: normalized difference frames, POS and multi-scale POS.

All functions take ``[T, H, W, C]`` float arrays and work in float64.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

POS_MATRIX = np.array([[0.0, 1.0, -1.0],
                       [-2.0, 1.0, 1.0]])
MPOS_KERNELS = (7, 15, 31)
CHANNEL_MAP = ("tcm_r", "tcm_g", "tcm_b",
               "ndf_r", "ndf_g", "ndf_b",
               "mpos_7", "mpos_15", "mpos_31")


def ndf(clip: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """(f[t+1] - f[t]) / (f[t+1] + f[t] + eps), with the last frame set to zero."""
    clip = np.asarray(clip, dtype=np.float64)
    if clip.shape[0] < 2:
        raise ValueError("NDF needs at least two frames")
    out = np.zeros_like(clip)
    out[:-1] = (clip[1:] - clip[:-1]) / (clip[1:] + clip[:-1] + eps)
    return out


def pos_project(clip: np.ndarray) -> np.ndarray:
    """Temporal-mean normalize each pixel/channel, then project RGB with ``POS_MATRIX``."""
    clip = np.asarray(clip, dtype=np.float64)
    mean = clip.mean(axis=0)
    if np.any(mean <= 0):
        raise ValueError("dead pixel: zero temporal mean")
    return (clip / mean) @ POS_MATRIX.T


def gaussian_sigma(k: int) -> float:
    return 0.3 * ((k - 1) / 2.0 - 1.0) + 0.8


def gaussian_kernel(k: int, sigma: float | None = None) -> np.ndarray:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"kernel size must be odd and positive, got {k}")
    sigma = gaussian_sigma(k) if sigma is None else sigma
    x = np.arange(k) - (k - 1) / 2.0
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def gaussian_blur(seq: np.ndarray, k: int, sigma: float | None = None) -> np.ndarray:
    """Separable per-frame Gaussian blur with reflect padding; time is untouched."""
    seq = np.asarray(seq, dtype=np.float64)
    kern = gaussian_kernel(k, sigma)
    if k > 2 * min(seq.shape[1], seq.shape[2]) - 1:
        raise ValueError(f"kernel {k} too large for {seq.shape[1]}x{seq.shape[2]} frames")
    out = correlate1d(seq, kern, axis=1, mode="reflect")
    return correlate1d(out, kern, axis=2, mode="reflect")


def mpos(clip: np.ndarray, kernels=MPOS_KERNELS, eps: float = 1e-8, sigma_scale: float = 1.0) -> np.ndarray:
    """Blur the POS projection at each scale and fuse its two channels per pixel.

    fused = ch1 + std_t(ch1) / (std_t(ch2) + eps) * ch2, falling back to ch1
    alone where ch2 is (numerically) constant in time. ``sigma_scale``
    multiplies the default sigma-from-k rule.
    """
    pos = pos_project(clip)
    scales = []
    for k in kernels:
        b = gaussian_blur(pos, k, sigma_scale * gaussian_sigma(k))
        s1 = b[..., 0].std(axis=0)
        s2 = b[..., 1].std(axis=0)
        alpha = np.where(s2 < eps, 0.0, s1 / (s2 + eps))
        scales.append(b[..., 0] + alpha * b[..., 1])
    return np.stack(scales, axis=-1)


@dataclass(frozen=True)
class FeatureClip:
    frames: np.ndarray          # [T, H, W, 9]
    fps: float
    channel_map: tuple = CHANNEL_MAP


def hflip(clip: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(clip[:, :, ::-1])


def assemble_input(clip: np.ndarray, fps: float, rng: np.random.Generator | None = None,
                   flip_prob: float = 0.5, kernels=MPOS_KERNELS, sigma_scale: float = 1.0) -> FeatureClip:
    """Stack ``[RGB | NDF | MPOS]`` into a 9-channel feature clip.

    One flip decision is drawn per clip (always consuming exactly one draw
    when ``rng`` is given) and applied to the raw frames first.
    """
    clip = np.asarray(clip, dtype=np.float64)
    if clip.ndim != 4 or clip.shape[-1] != 3:
        raise ValueError(f"expected [T, H, W, 3] clip, got {clip.shape}")
    if rng is not None and rng.random() < flip_prob:
        clip = hflip(clip)
    feats = np.concatenate([clip, ndf(clip), mpos(clip, kernels, sigma_scale=sigma_scale)], axis=-1)
    return FeatureClip(feats, float(fps))
