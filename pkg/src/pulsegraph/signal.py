"""Signal-processing primitives shared by the whole pipeline.

Closed-form DTFTs of rectangular windows, FFT bandpass, periodogram heart
rate, Pearson correlation, beat detection and the HRV triple.
All math runs in float64.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HR_BAND_HZ = (0.6, 3.3)
_SING_TOL = 1e-12
# absorbs rfftfreq rounding so a bin sitting exactly on a band edge is kept
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class BvpSeries:
    """A blood-volume-pulse trace sampled at ``fps`` frames per second."""

    samples: np.ndarray
    fps: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size < 2:
            raise ValueError(f"BvpSeries needs a 1-D signal with T >= 2, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("BvpSeries samples must be finite")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    complex_values: np.ndarray

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.complex_values)


def _wrap(omega):
    """Reduce angles to [-pi, pi]; the kernels below are 2*pi periodic."""
    omega = np.asarray(omega, dtype=np.float64)
    return omega - 2.0 * np.pi * np.round(omega / (2.0 * np.pi))


def _dirichlet(n: int, w: np.ndarray) -> np.ndarray:
    # sin(n w / 2) / sin(w / 2) with the removable singularity at w = 0 filled by n.
    half = np.sin(w / 2.0)
    small = np.abs(half) < _SING_TOL
    safe = np.where(small, 1.0, half)
    return np.where(small, float(n), np.sin(n * w / 2.0) / safe)


def dtft_U(T: int, omega):
    """DTFT of the all-ones length-``T`` sequence indexed t = 1..T.

    ``sum_{t=1}^{T} exp(-i omega t)``, evaluated in closed form.  Accepts a
    scalar or an array of angular frequencies (radians per sample).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    w = _wrap(omega)
    out = np.exp(-1j * w * (T + 1) / 2.0) * _dirichlet(T, w)
    return out if out.ndim else complex(out)


def dtft_W(s: int, L: int, omega):
    """DTFT of the indicator of ``{s, ..., s+L-1}``: ``sum_{t=s}^{s+L-1} exp(-i omega t)``."""
    if s < 1 or L < 1:
        raise ValueError("s and L must be >= 1")
    w = _wrap(omega)
    out = np.exp(-1j * w * (2 * s + L - 1) / 2.0) * _dirichlet(L, w)
    return out if out.ndim else complex(out)


def _band_bins(n: int, fps: float, lo_hz: float, hi_hz: float) -> np.ndarray:
    freqs = np.fft.rfftfreq(n, d=1.0 / fps)
    return (freqs >= lo_hz - _EDGE_TOL) & (freqs <= hi_hz + _EDGE_TOL)


def bandpass(x: BvpSeries, lo_hz: float = HR_BAND_HZ[0], hi_hz: float = HR_BAND_HZ[1]) -> BvpSeries:
    """Zero-phase FFT bandpass: drop every rfft bin outside ``[lo_hz, hi_hz]``."""
    if not 0 < lo_hz < hi_hz < x.fps / 2:
        raise ValueError(f"need 0 < lo_hz < hi_hz < fps/2, got [{lo_hz}, {hi_hz}] at fps={x.fps}")
    n = len(x)
    keep = _band_bins(n, x.fps, lo_hz, hi_hz)
    if not keep.any():
        raise ValueError("band too narrow for T")
    spec = np.fft.rfft(x.samples - x.samples.mean())
    spec[~keep] = 0.0
    return BvpSeries(np.fft.irfft(spec, n=n), x.fps)


def periodogram(x: BvpSeries, zero_pad_factor: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Rectangular-window, zero-padded power spectrum of the mean-removed signal."""
    n = len(x) * zero_pad_factor
    power = np.abs(np.fft.rfft(x.samples - x.samples.mean(), n=n)) ** 2
    return np.fft.rfftfreq(n, d=1.0 / x.fps), power


def estimate_hr(x: BvpSeries, lo_hz: float = HR_BAND_HZ[0], hi_hz: float = HR_BAND_HZ[1],
                zero_pad_factor: int = 8) -> float:
    """Heart rate in bpm from the periodogram peak inside ``[lo_hz, hi_hz]``."""
    if len(x) < 2 * x.fps:
        raise ValueError(f"need at least 2 s of signal, got {len(x)} samples at {x.fps} fps")
    freqs, power = periodogram(x, zero_pad_factor)
    band = _band_bins(freqs.size * 2 - 2, x.fps, lo_hz, hi_hz)
    if not band.any():
        raise ValueError("empty band for heart-rate search")
    idx = np.flatnonzero(band)
    k = int(idx[np.argmax(power[idx])])
    # 60 * k * fps / n rather than 60 * freqs[k] keeps bin-aligned rates exact
    return 60.0 * k * x.fps / (2 * (freqs.size - 1))


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("pearson needs two 1-D arrays of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("degenerate series")
    r = np.dot(dx, dy) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def local_maxima(x: np.ndarray) -> np.ndarray:
    """Indices of interior local maxima.

    A plateau of equal samples counts once, at its left-most sample, when
    it is bordered by strictly lower values on both sides.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 3:
        return np.zeros(0, dtype=np.int64)
    # collapse runs of equal values, then look for rises followed by falls
    change = np.flatnonzero(np.diff(x) != 0.0)
    if change.size == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.concatenate(([0], change + 1))
    vals = x[starts]
    up = vals[1:-1] > vals[:-2]
    down = vals[1:-1] > vals[2:]
    return starts[1:-1][up & down].astype(np.int64)


def select_peaks(x: np.ndarray, candidates: np.ndarray, min_separation: int) -> np.ndarray:
    """Greedy height-ordered suppression of candidates closer than ``min_separation``."""
    if min_separation < 1:
        raise ValueError("min_separation_frames must be >= 1")
    # stable sort keeps the earlier index first among equal heights
    order = candidates[np.argsort(-x[candidates], kind="stable")]
    kept: list[int] = []
    for idx in order:
        if all(abs(int(idx) - k) >= min_separation for k in kept):
            kept.append(int(idx))
    return np.array(sorted(kept), dtype=np.int64)


def detect_peaks(x: BvpSeries, min_separation_frames: int,
                 lo_hz: float = HR_BAND_HZ[0], hi_hz: float = HR_BAND_HZ[1]) -> np.ndarray:
    """Beat locations (ascending frame indices) of a pulse trace.

    The trace is linearly detrended and bandpassed first.  A trace with no
    energy left in the band (e.g. a pure ramp) has no beats.
    """
    if min_separation_frames < 1:
        raise ValueError("min_separation_frames must be >= 1")
    t = np.arange(len(x), dtype=np.float64)
    trend = np.polyval(np.polyfit(t, x.samples, 1), t)
    filtered = bandpass(BvpSeries(x.samples - trend, x.fps), lo_hz, hi_hz).samples
    scale = 1.0 + np.max(np.abs(x.samples))
    if np.std(filtered) < 1e-9 * scale:
        return np.zeros(0, dtype=np.int64)
    return select_peaks(filtered, local_maxima(filtered), min_separation_frames)


@dataclass(frozen=True)
class HrvMetrics:
    mean_ibi_ms: float
    sdnn_ms: float
    sd1_ms: float
    sd2_ms: float

    @property
    def sd1_sd2(self) -> float:
        return self.sd1_ms / self.sd2_ms


class InsufficientBeatsError(ValueError):
    pass


class DegeneratePoincareError(ValueError):
    """SD2 vanished; the time-domain statistics are still attached."""

    def __init__(self, mean_ibi_ms: float, sdnn_ms: float):
        super().__init__("degenerate Poincaré")
        self.mean_ibi_ms = mean_ibi_ms
        self.sdnn_ms = sdnn_ms


def ibi_ms(peak_indices, fps: float) -> np.ndarray:
    peaks = np.asarray(peak_indices, dtype=np.float64)
    return np.diff(peaks) * 1000.0 / fps


def hrv_metrics(peak_indices, fps: float) -> HrvMetrics:
    """Mean IBI, SDNN and Poincaré SD1/SD2 from beat indices.

    Population variances throughout.  SD1 = sqrt(var(dIBI)/2) and
    SD2 = sqrt(2 var(IBI) - SD1^2).  Raises ``DegeneratePoincareError``
    (carrying mean IBI and SDNN) when SD2 is not positive.
    """
    peaks = np.asarray(peak_indices)
    if peaks.size < 3:
        raise InsufficientBeatsError("insufficient beats")
    ibi = ibi_ms(peaks, fps)
    mean_ibi = float(np.mean(ibi))
    sdnn = float(np.std(ibi))
    sd1_sq = float(np.var(np.diff(ibi))) / 2.0
    sd2_sq = 2.0 * float(np.var(ibi)) - sd1_sq
    if sd2_sq <= 0.0:
        raise DegeneratePoincareError(mean_ibi, sdnn)
    return HrvMetrics(mean_ibi, sdnn, float(np.sqrt(sd1_sq)), float(np.sqrt(sd2_sq)))
