"""Full model: patch embed -> windowed attention stack -> frame encoder ->
R-GCN (+activation) -> graph transformer -> per-frame linear head."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..graph import RELATIONS, RelGraph, build_graph, scale_periodicity
from . import functional as Fn
from . import layers

IN_CHANNELS = 9
_FIELD_TYPES = {"int": int, "float": float, "str": str}


@dataclass(frozen=True)
class ModelConfig:
    patch: int = 8
    D: int = 16
    swin_layers: int = 2
    swin_heads: int = 2
    window: int = 2
    d_g: int = 16
    h1: int = 16
    h2: int = 16
    C: int = 2
    P: int = 1
    F: int = 1
    delta_min: int = 15
    delta_max: int = 25
    activation: str = "relu"
    sigma_scale: float = 1.0    # multiplier on the MPOS blur sigma-from-k rule
    seed: int = 0

    def __post_init__(self):
        for f in ("patch", "D", "swin_heads", "window", "d_g", "h1", "h2", "C"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.swin_layers < 0 or self.P < 0 or self.F < 0:
            raise ValueError("swin_layers, P and F must be non-negative")
        if self.D % self.swin_heads:
            raise ValueError(f"D={self.D} not divisible by swin_heads={self.swin_heads}")
        if not self.sigma_scale > 0:
            raise ValueError("sigma_scale must be positive")
        if self.activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def graph(self, T: int, fps: float = 30.0) -> RelGraph:
        dmin, dmax = scale_periodicity(self.delta_min, self.delta_max, fps)
        return build_graph(T, self.P, self.F, dmin, dmax)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        types = {f.name: _FIELD_TYPES[f.type] for f in fields(cls)}
        return cls(**{k: types[k](v) for k, v in d.items()})


def param_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Every parameter with its shape, in the fixed initialization order."""
    D, hidden = cfg.D, 4 * cfg.D
    shapes = {
        "patch/kernel": (cfg.patch * cfg.patch * IN_CHANNELS, D),
        "patch/bias": (D,),
        "patch/ln_g": (D,),
        "patch/ln_b": (D,),
    }
    for b in range(cfg.swin_layers):
        p = f"swin{b}"
        shapes.update({
            f"{p}/ln1_g": (D,), f"{p}/ln1_b": (D,),
            f"{p}/qkv_w": (D, 3 * D), f"{p}/qkv_b": (3 * D,),
            f"{p}/proj_w": (D, D), f"{p}/proj_b": (D,),
            f"{p}/ln2_g": (D,), f"{p}/ln2_b": (D,),
            f"{p}/mlp1_w": (D, hidden), f"{p}/mlp1_b": (hidden,),
            f"{p}/mlp2_w": (hidden, D), f"{p}/mlp2_b": (D,),
        })
    shapes["frame/w"] = (D, cfg.d_g)
    shapes["frame/b"] = (cfg.d_g,)
    shapes["rgcn/w0"] = (cfg.d_g, cfg.h1)
    for r in RELATIONS:
        shapes[f"rgcn/w_{r}"] = (cfg.d_g, cfg.h1)
    # attention key/query width equals h2
    shapes["gt/w1"] = (cfg.C, cfg.h1, cfg.h2)
    shapes["gt/w2"] = (cfg.C, cfg.h1, cfg.h2)
    shapes["gt/w3"] = (cfg.C, cfg.h1, cfg.h2)
    shapes["gt/w4"] = (cfg.C, cfg.h1, cfg.h2)
    shapes["head/w"] = (cfg.h2 * cfg.C,)
    shapes["head/b"] = ()
    return shapes


def _fan_in(name: str, shape: tuple) -> int:
    if name.startswith("gt/"):
        return shape[1]
    return shape[0]


def init_params(cfg: ModelConfig, dtype=np.float64) -> dict[str, np.ndarray]:
    """Fan-in variance scaling (N(0, 1/fan_in)) for kernels, zero biases, unit LN scales."""
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        leaf = name.split("/")[1]
        if leaf.endswith("_g"):
            arr = np.ones(shape)
        elif leaf.endswith("_b") or leaf in ("bias", "b"):
            arr = np.zeros(shape)
        else:
            arr = rng.normal(0.0, 1.0 / np.sqrt(_fan_in(name, shape)), size=shape)
        params[name] = arr.astype(dtype)
    return params


def cast_params(params: dict, dtype) -> dict:
    return {k: np.asarray(v, dtype=dtype) for k, v in params.items()}


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {name}")


def forward(frames: np.ndarray, graph: RelGraph, cfg: ModelConfig, params: dict,
            check: bool = False):
    """Predict one BVP value per frame for a ``[T, H, W, 9]`` feature clip.

    Returns ``(pred [T], cache)``; ``cache`` feeds :func:`backward`.
    With ``check=True`` every intermediate is asserted finite.
    """
    dtype = params["patch/kernel"].dtype
    x = np.asarray(frames, dtype=dtype)
    if x.shape[0] != graph.T:
        raise ValueError(f"clip has {x.shape[0]} frames, graph has {graph.T} nodes")
    caches = {}
    h, caches["patch"] = layers.patch_embed_forward(x, params, cfg.patch)
    for b in range(cfg.swin_layers):
        h, caches[f"swin{b}"] = layers.swin_block_forward(h, params, b, cfg.window, cfg.swin_heads)
        if check:
            _check_finite(f"swin{b}", h)
    nodes, caches["frame"] = layers.frame_encode_forward(h, params)
    g, caches["rgcn"] = layers.rgcn_forward(nodes, graph, params)
    caches["act_in"] = g
    if cfg.activation == "relu":
        g = Fn.relu(g)
    o, caches["gt"] = layers.graph_transformer_forward(g, graph, params)
    pred, caches["head"] = layers.head_forward(o, params)
    if check:
        for name, arr in (("nodes", nodes), ("rgcn", g), ("gt", o), ("pred", pred)):
            _check_finite(name, arr)
    return pred, caches


def backward(dpred: np.ndarray, caches: dict, graph: RelGraph, cfg: ModelConfig, params: dict,
             check: bool = False) -> dict[str, np.ndarray]:
    grads = {}
    do, g = layers.head_backward(dpred, caches["head"], params)
    grads.update(g)
    dg, g = layers.graph_transformer_backward(do, caches["gt"], params)
    grads.update(g)
    if cfg.activation == "relu":
        dg = Fn.relu_backward(dg, caches["act_in"])
    dnodes, g = layers.rgcn_backward(dg, caches["rgcn"], graph, params)
    grads.update(g)
    dh, g = layers.frame_encode_backward(dnodes, caches["frame"], params)
    grads.update(g)
    for b in reversed(range(cfg.swin_layers)):
        dh, g = layers.swin_block_backward(dh, caches[f"swin{b}"], params, b)
        grads.update(g)
    _, g = layers.patch_embed_backward(dh, caches["patch"], params)
    grads.update(g)
    if check:
        for k, v in grads.items():
            _check_finite(f"grad {k}", v)
    return grads


def loss_and_grad(frames, gt, graph, cfg, params, check=False):
    """Negative-Pearson loss of one clip and the gradient for every parameter."""
    pred, caches = forward(frames, graph, cfg, params, check=check)
    loss, dpred = layers.neg_pearson_loss(pred, gt)
    return loss, backward(dpred, caches, graph, cfg, params, check=check), pred
