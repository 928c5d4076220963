"""Temporal CutMix and the closed-form spectrum of a TCM-mixed sinusoid pair.

A mask zeroes the 1-based frame range ``s <= t < s + L``; those frames
(and label samples) are taken from a partner clip.  For two sampled
sinusoids the DTFT of the mixed signal has an exact closed form in terms of
the rectangular-window kernels ``dtft_U`` and ``dtft_W``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .signal import BvpSeries, dtft_U, dtft_W

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TcmParams:
    p: float = 0.4
    r_min: float = 0.25
    r_max: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 < self.r_min <= self.r_max < 1.0:
            raise ValueError(f"need 0 < r_min <= r_max < 1, got [{self.r_min}, {self.r_max}]")


@dataclass(frozen=True)
class TemporalMask:
    """Binary keep-mask; ``s`` is 1-based, frames ``s..s+L-1`` come from the partner."""

    T: int
    s: int
    L: int

    def __post_init__(self):
        if not 1 <= self.L < self.T:
            raise ValueError(f"need 1 <= L < T, got L={self.L}, T={self.T}")
        if not 1 <= self.s <= self.T - self.L + 1:
            raise ValueError(f"start s={self.s} outside [1, {self.T - self.L + 1}]")

    @property
    def bits(self) -> np.ndarray:
        t = np.arange(1, self.T + 1)
        return np.where((t >= self.s) & (t < self.s + self.L), 0, 1).astype(np.int8)

    @property
    def replaced(self) -> slice:
        """0-based slice of the frames taken from the partner clip."""
        return slice(self.s - 1, self.s - 1 + self.L)


def sample_tcm(T: int, params: TcmParams, rng: np.random.Generator) -> TemporalMask | None:
    """Draw a mask with probability ``p``; ``None`` means no augmentation."""
    if T < 4:
        raise ValueError(f"T must be >= 4 for TCM, got {T}")
    if math.floor(params.r_min * T) == 0:
        raise ValueError("clip too short for TCM")
    if rng.random() >= params.p:
        return None
    r = rng.uniform(params.r_min, params.r_max)
    L = math.floor(r * T)
    s = int(rng.integers(1, T - L + 2))
    return TemporalMask(T, s, L)


def apply_tcm(clip_i: np.ndarray, clip_j: np.ndarray, label_i: BvpSeries, label_j: BvpSeries,
              mask: TemporalMask) -> tuple[np.ndarray, BvpSeries]:
    """Splice ``clip_j``/``label_j`` into the masked-out range of clip ``i``."""
    if clip_i.shape != clip_j.shape:
        raise ValueError(f"clip shapes differ: {clip_i.shape} vs {clip_j.shape}")
    T = clip_i.shape[0]
    if len(label_i) != T or len(label_j) != T or mask.T != T:
        raise ValueError("labels and mask must have the clip length")
    if label_i.fps != label_j.fps:
        raise ValueError(f"TCM partners must share fps ({label_i.fps} vs {label_j.fps})")
    out = clip_i.copy()
    out[mask.replaced] = clip_j[mask.replaced]
    lab = label_i.samples.copy()
    lab[mask.replaced] = label_j.samples[mask.replaced]
    return out, BvpSeries(lab, label_i.fps)


@dataclass(frozen=True)
class TcmEvent:
    i: int
    j: int
    mask: TemporalMask


def tcm_batch(clips, labels, params: TcmParams, seed: int, batch_index: int = 0):
    """Augment a batch; returns ``(clips, labels, audit)``.

    Clip ``i`` draws from its own stream seeded by ``(seed, batch_index, i)``
    and takes its partner from the *original* batch, so results do not depend
    on processing order.
    """
    B = len(clips)
    if len(labels) != B:
        raise ValueError("clips and labels differ in length")
    if B == 1:
        log.debug("batch of one: TCM skipped (no partner)")
        return list(clips), list(labels), []
    out_clips, out_labels, audit = [], [], []
    for i in range(B):
        rng = np.random.default_rng([seed, batch_index, i])
        mask = sample_tcm(clips[i].shape[0], params, rng)
        if mask is None:
            out_clips.append(clips[i])
            out_labels.append(labels[i])
            continue
        k = int(rng.integers(0, B - 1))
        j = k if k < i else k + 1
        c, lab = apply_tcm(clips[i], clips[j], labels[i], labels[j], mask)
        out_clips.append(c)
        out_labels.append(lab)
        audit.append(TcmEvent(i, j, mask))
    return out_clips, out_labels, audit


@dataclass(frozen=True)
class SineSpec:
    A: float
    f: float      # Hz
    phi: float    # radians

    def __post_init__(self):
        if self.A < 0:
            raise ValueError("amplitude must be non-negative")

    def omega(self, fps: float) -> float:
        return 2.0 * np.pi * self.f / fps

    def sample(self, T: int, fps: float) -> np.ndarray:
        """Values at the 1-based sample times t = 1..T."""
        t = np.arange(1, T + 1, dtype=np.float64)
        return self.A * np.sin(self.omega(fps) * t + self.phi)


def mixed_signal(sig1: SineSpec, sig2: SineSpec, mask: TemporalMask | None, T: int, fps: float) -> np.ndarray:
    x = sig1.sample(T, fps)
    if mask is not None:
        x[mask.replaced] = sig2.sample(T, fps)[mask.replaced]
    return x


def analytic_mixed_spectrum(sig1: SineSpec, sig2: SineSpec, mask: TemporalMask | None,
                            T: int, fps: float, omega):
    """Closed-form DTFT (t = 1..T convention) of the TCM-mixed sinusoid pair.

    ``mask=None`` is the no-augmentation case: the pure windowed ``sig1``.
    """
    omega = np.asarray(omega, dtype=np.float64)
    w1, w2 = sig1.omega(fps), sig2.omega(fps)

    def keep(w):
        u = dtft_U(T, w)
        return u if mask is None else u - dtft_W(mask.s, mask.L, w)

    out = sig1.A / 2j * (np.exp(1j * sig1.phi) * keep(omega - w1)
                         - np.exp(-1j * sig1.phi) * keep(omega + w1))
    if mask is not None:
        out = out + sig2.A / 2j * (np.exp(1j * sig2.phi) * dtft_W(mask.s, mask.L, omega - w2)
                                   - np.exp(-1j * sig2.phi) * dtft_W(mask.s, mask.L, omega + w2))
    return out if np.ndim(out) else complex(out)


def fft_spectrum(x: np.ndarray, n_bins: int) -> np.ndarray:
    """DTFT of ``x`` (indexed from t = 1) at ``omega_k = 2 pi k / n_bins``."""
    if n_bins < x.size:
        raise ValueError("n_bins must be >= T")
    k = np.arange(n_bins)
    return np.exp(-2j * np.pi * k / n_bins) * np.fft.fft(x, n=n_bins)


def spectrum_rows(sig1: SineSpec, sig2: SineSpec, mask: TemporalMask | None, T: int,
                  fps: float, n_bins: int) -> list[tuple[float, float, float]]:
    """One-sided ``(freq_hz, analytic_mag, fft_mag)`` rows on an ``n_bins`` grid."""
    if n_bins < T:
        raise ValueError("n_bins must be >= T")
    k = np.arange(n_bins // 2 + 1)
    omega = 2.0 * np.pi * k / n_bins
    analytic = np.abs(analytic_mixed_spectrum(sig1, sig2, mask, T, fps, omega))
    numeric = np.abs(fft_spectrum(mixed_signal(sig1, sig2, mask, T, fps), n_bins)[: k.size])
    freqs = k * fps / n_bins
    return list(zip(freqs.tolist(), analytic.tolist(), numeric.tolist()))


def emit_spectrum_csv(path, sig1, sig2, mask, T, fps, n_bins) -> list[tuple[float, float, float]]:
    rows = spectrum_rows(sig1, sig2, mask, T, fps, n_bins)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "analytic_mag", "fft_mag"])
        for f, a, b in rows:
            w.writerow([repr(f), repr(a), repr(b)])
    return rows
