"""Synthetic face-like clips with a known embedded pulse.

Every clip is a static coloured disc (the "skin") on a grey background.
The disc brightness follows the ground-truth BVP with a green-dominant
channel weighting; the whole frame shares a slow illumination drift and
i.i.d. Gaussian sensor noise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .signal import BvpSeries

log = logging.getLogger(__name__)

CHANNEL_WEIGHTS = np.array([0.3, 0.6, 0.1])
BACKGROUND_RGB = np.array([0.35, 0.35, 0.35])
DRIFT_HZ = 0.2
SKIN_RADIUS_FRACTION = 0.4


@dataclass(frozen=True)
class SynthConfig:
    T: int = 180
    H: int = 32
    W: int = 32
    fps: float = 30.0
    hr_bpm: float = 72.0
    pulse_amplitude: float = 0.02
    base_skin_rgb: tuple = (0.7, 0.5, 0.4)
    illum_drift_amp: float = 0.01
    noise_std: float = 0.01
    seed: int = 0

    def validate(self) -> None:
        if self.T < 2 or self.H < 1 or self.W < 1:
            raise ValueError(f"bad clip shape T={self.T} H={self.H} W={self.W}")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if not 36.0 <= self.hr_bpm <= 198.0:
            raise ValueError(f"hr_bpm {self.hr_bpm} outside [36, 198]")
        if min(self.pulse_amplitude, self.illum_drift_amp, self.noise_std) < 0:
            raise ValueError("amplitudes must be non-negative")
        excursion = self.pulse_amplitude + self.illum_drift_amp + 3.0 * self.noise_std
        base = np.concatenate([np.asarray(self.base_skin_rgb, dtype=float), BACKGROUND_RGB])
        margin = float(np.min(np.minimum(base, 1.0 - base)))
        if excursion >= margin:
            raise ValueError("dynamic range overflow")


def skin_mask(H: int, W: int) -> np.ndarray:
    """Boolean ``[H, W]`` mask of the central disc that carries the pulse."""
    yy, xx = np.mgrid[0:H, 0:W]
    cy, cx = (H - 1) / 2.0, (W - 1) / 2.0
    radius = SKIN_RADIUS_FRACTION * min(H, W)
    mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
    if not mask.any():
        mask[H // 2, W // 2] = True
    return mask


def gen_bvp(cfg: SynthConfig, phase: float = 0.0) -> BvpSeries:
    t = np.arange(cfg.T, dtype=np.float64)
    f = cfg.hr_bpm / 60.0
    return BvpSeries(np.sin(2.0 * np.pi * f * t / cfg.fps + phase), cfg.fps)


def gen_clip(cfg: SynthConfig) -> tuple[np.ndarray, BvpSeries]:
    """Render one ``[T, H, W, 3]`` float64 clip in [0, 1] and its ground truth.

    The pulse phase and drift phase are drawn from ``cfg.seed`` so two calls
    with the same config are bit-identical.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    drift_phase = rng.uniform(0.0, 2.0 * np.pi)
    bvp = gen_bvp(cfg, phase)

    t = np.arange(cfg.T, dtype=np.float64)
    drift = cfg.illum_drift_amp * np.sin(2.0 * np.pi * DRIFT_HZ * t / cfg.fps + drift_phase)

    mask = skin_mask(cfg.H, cfg.W)
    base = np.where(mask[..., None], np.asarray(cfg.base_skin_rgb, dtype=np.float64), BACKGROUND_RGB)
    pulse = cfg.pulse_amplitude * bvp.samples[:, None] * CHANNEL_WEIGHTS[None, :]   # [T, 3]

    frames = np.broadcast_to(base, (cfg.T, cfg.H, cfg.W, 3)).copy()
    frames += mask[None, :, :, None] * pulse[:, None, None, :]
    frames += drift[:, None, None, None]
    if cfg.noise_std > 0:
        frames += rng.normal(0.0, cfg.noise_std, size=frames.shape)
    np.clip(frames, 0.0, 1.0, out=frames)
    return frames, bvp


def skin_trace(frames: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Spatial RGB means over ``mask`` (default: the synthetic skin disc), ``[T, 3]``."""
    if mask is None:
        mask = skin_mask(frames.shape[1], frames.shape[2])
    return frames[:, mask, :].mean(axis=1)


def clip_seed(seed: int, clip_id: int) -> int:
    """Independent per-clip stream so clips can be generated in any order."""
    return int(np.random.SeedSequence([seed, clip_id]).generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class DatasetSpec:
    base: SynthConfig = field(default_factory=SynthConfig)
    hr_range: tuple = (72.0, 120.0)


def gen_dataset(n_clips: int, spec: DatasetSpec, seed: int, out_dir) -> list[dict]:
    """Write ``n_clips`` clips in the dataset layout and return the manifest rows."""
    from .tensorio import write_dataset_clip, write_manifest

    lo, hi = spec.hr_range
    if lo > hi:
        raise ValueError(f"empty hr range {spec.hr_range}")
    out_dir = Path(out_dir)
    rows = []
    for i in range(n_clips):
        cs = clip_seed(seed, i)
        hr = float(np.random.default_rng([cs, 1]).uniform(lo, hi)) if hi > lo else float(lo)
        cfg = replace(spec.base, hr_bpm=hr, seed=cs)
        frames, bvp = gen_clip(cfg)
        clip_id = f"{i:04d}"
        write_dataset_clip(out_dir, clip_id, frames, bvp)
        rows.append({"id": clip_id, "fps": cfg.fps, "hr_bpm": hr, "seed": cs})
    write_manifest(out_dir, rows)
    log.info("wrote %d clips to %s", n_clips, out_dir)
    return rows
