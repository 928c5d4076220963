"""Classical POS and CHROM pulse extractors from a skin-region RGB trace."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .preprocess import POS_MATRIX
from .signal import HR_BAND_HZ, BvpSeries, bandpass

_DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class RoiTrace:
    rgb_means: np.ndarray   # [T, 3]
    fps: float

    def __post_init__(self):
        x = np.asarray(self.rgb_means, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != 3:
            raise ValueError(f"trace must be [T, 3], got {x.shape}")
        if np.any(x <= 0):
            raise ValueError("trace means must be strictly positive")
        object.__setattr__(self, "rgb_means", x)


def pos_signal(trace: RoiTrace, window_seconds: float = 1.6) -> BvpSeries:
    """Sliding-window POS with overlap-add (Wang et al. 2017)."""
    C = trace.rgb_means
    T = C.shape[0]
    win = int(math.ceil(window_seconds * trace.fps))
    if T < win:
        raise ValueError(f"trace of {T} frames shorter than the {win}-frame POS window")
    out = np.zeros(T)
    for n in range(T - win + 1):
        seg = C[n:n + win]
        S = (seg / seg.mean(axis=0)) @ POS_MATRIX.T
        s1, s2 = S[:, 0].std(), S[:, 1].std()
        if s2 < _DEGENERATE_STD:
            raise ValueError(f"degenerate variance in POS window starting at frame {n}")
        h = S[:, 0] + (s1 / s2) * S[:, 1]
        out[n:n + win] += h - h.mean()
    return BvpSeries(out, trace.fps)


def chrom_signal(trace: RoiTrace, lo_hz: float = HR_BAND_HZ[0], hi_hz: float = HR_BAND_HZ[1]) -> BvpSeries:
    """Whole-trace CHROM (de Haan & Jeanne 2013) with FFT-bandpassed chrominance."""
    n = trace.rgb_means / trace.rgb_means.mean(axis=0)
    r, g, b = n[:, 0], n[:, 1], n[:, 2]
    xs = bandpass(BvpSeries(3.0 * r - 2.0 * g, trace.fps), lo_hz, hi_hz).samples
    ys = bandpass(BvpSeries(1.5 * r + g - 1.5 * b, trace.fps), lo_hz, hi_hz).samples
    sy = ys.std()
    if sy < _DEGENERATE_STD:
        raise ValueError("degenerate variance in CHROM Y channel")
    return BvpSeries(xs - (xs.std() / sy) * ys, trace.fps)
