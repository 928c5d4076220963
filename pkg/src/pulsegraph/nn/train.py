"""Seeded mini-batch training with Adam."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..augment import TcmParams, tcm_batch
from ..preprocess import assemble_input
from ..signal import BvpSeries
from ..tensorio import ClipRecord, load_dataset
from .layers import neg_pearson_loss
from .model import ModelConfig, forward, init_params, loss_and_grad

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("step", "loss", "lr", "seconds")
_DTYPES = {"float32": np.float32, "float64": np.float64}


@dataclass(frozen=True)
class TrainHyper:
    lr: float = 1e-3
    steps: int = 200
    batch: int = 4
    tcm: TcmParams = field(default_factory=TcmParams)
    seed: int = 0
    flip_prob: float = 0.5
    precision: str = "float32"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0 or self.steps < 0 or self.batch < 1:
            raise ValueError("need lr >= 0, steps >= 0, batch >= 1")
        if self.precision not in _DTYPES:
            raise ValueError(f"precision must be one of {sorted(_DTYPES)}")


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in sorted(params):
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            params[k] -= update.astype(params[k].dtype)


class _GraphCache(dict):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg

    def get_graph(self, T: int, fps: float):
        key = (T, fps)
        if key not in self:
            self[key] = self.cfg.graph(T, fps)
        return self[key]


def _batches(n: int, batch: int, rng: np.random.Generator):
    """Endless stream of index batches over shuffled epochs."""
    order = np.zeros(0, dtype=np.int64)
    while True:
        while order.size < batch:
            order = np.concatenate([order, rng.permutation(n)])
        yield order[:batch]
        order = order[batch:]


def train(data, cfg: ModelConfig, hyper: TrainHyper, record_time: bool = False, params=None):
    """Fit the model on a dataset directory (or preloaded :class:`ClipRecord` list).

    Returns ``(params, history)``; history rows follow ``HISTORY_FIELDS``.
    ``seconds`` is wall-clock time since start when ``record_time`` is set and
    0.0 otherwise, which keeps the history byte-reproducible.
    """
    records = load_dataset(data) if isinstance(data, (str, Path)) else list(data)
    if not records:
        raise ValueError("empty dataset")
    dtype = _DTYPES[hyper.precision]
    params = init_params(cfg, dtype) if params is None else {k: v.astype(dtype) for k, v in params.items()}
    opt = Adam(params, hyper.lr, hyper.beta1, hyper.beta2, hyper.adam_eps)
    graphs = _GraphCache(cfg)
    sampler = _batches(len(records), min(hyper.batch, len(records)), np.random.default_rng([hyper.seed, 7]))
    history = []
    t0 = time.perf_counter()
    for step in range(hyper.steps):
        idx = next(sampler)
        batch = [records[i] for i in idx]
        clips, labels, _ = tcm_batch([r.frames for r in batch], [r.bvp for r in batch],
                                     hyper.tcm, hyper.seed, batch_index=step)
        total = None
        losses = []
        # fixed summation order keeps the update independent of scheduling
        for i, (clip, label) in enumerate(zip(clips, labels)):
            feats = assemble_input(clip, label.fps, np.random.default_rng([hyper.seed, step, i, 1]),
                                   hyper.flip_prob, sigma_scale=cfg.sigma_scale)
            graph = graphs.get_graph(clip.shape[0], label.fps)
            loss, grads, _ = loss_and_grad(feats.frames, label.samples, graph, cfg, params)
            losses.append(loss)
            if total is None:
                total = grads
            else:
                for k in total:
                    total[k] = total[k] + grads[k]
        n = len(losses)
        opt.step(params, {k: v / n for k, v in total.items()})
        mean_loss = float(np.mean(losses))
        seconds = time.perf_counter() - t0 if record_time else 0.0
        history.append({"step": step, "loss": mean_loss, "lr": hyper.lr, "seconds": seconds})
        if step % 20 == 0 or step == hyper.steps - 1:
            log.info("step %d loss %.4f", step, mean_loss)
    return params, history


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for row in history:
            w.writerow([row["step"], repr(float(row["loss"])), repr(float(row["lr"])),
                        f"{row['seconds']:.3f}"])


def predict_clip(record: ClipRecord, cfg: ModelConfig, params: dict, graphs=None) -> BvpSeries:
    feats = assemble_input(record.frames, record.bvp.fps, rng=None, sigma_scale=cfg.sigma_scale)
    graph = (graphs or _GraphCache(cfg)).get_graph(record.frames.shape[0], record.bvp.fps)
    pred, _ = forward(feats.frames, graph, cfg, params)
    return BvpSeries(np.asarray(pred, dtype=np.float64), record.bvp.fps)


def predict(records, cfg: ModelConfig, params: dict) -> dict[str, BvpSeries]:
    graphs = _GraphCache(cfg)
    return {r.clip_id: predict_clip(r, cfg, params, graphs) for r in records}


def evaluate_loss(records, cfg: ModelConfig, params: dict) -> float:
    """Mean negative-Pearson loss of predictions against the stored ground truth."""
    preds = predict(records, cfg, params)
    return float(np.mean([neg_pearson_loss(preds[r.clip_id].samples, r.bvp.samples)[0]
                          for r in records]))
