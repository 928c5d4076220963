"""INI run configuration with ``[model]``, ``[train]``, ``[tcm]`` and ``[paths]`` sections.

Keys are validated against a fixed schema; unknown sections or keys are
rejected so typos cannot silently fall back to defaults.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .augment import TcmParams
from .nn.model import ModelConfig
from .nn.train import TrainHyper

_TRAIN_KEYS = {"lr": float, "steps": int, "batch": int, "seed": int,
               "flip_prob": float, "precision": str}
_TCM_KEYS = {"p": float, "r_min": float, "r_max": float}
_PATH_KEYS = {"dataset", "holdout", "out", "checkpoint", "predictions"}
_MODEL_KEYS = {f.name: {"str": str, "float": float}.get(f.type, int) for f in fields(ModelConfig)}
SCHEMA = {"model": _MODEL_KEYS, "train": _TRAIN_KEYS, "tcm": _TCM_KEYS,
          "paths": {k: str for k in _PATH_KEYS}}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainHyper = field(default_factory=TrainHyper)
    paths: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "RunConfig":
        return RunConfig(replace(self.model, seed=seed), replace(self.train, seed=seed), dict(self.paths))


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str    # model keys such as D and C are case-sensitive
    return cp


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        schema = SCHEMA[section]
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in schema:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                values[section][key] = schema[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: [{section}] {key} = {raw!r}: {exc}") from exc
    try:
        model = replace(ModelConfig(), **values.get("model", {}))
        tcm = replace(TcmParams(), **values.get("tcm", {}))
        train = replace(TrainHyper(), tcm=tcm, **values.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return RunConfig(model, train, values.get("paths", {}))


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def dump_config(cfg: RunConfig) -> str:
    lines = ["[model]"]
    lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in cfg.model.to_dict().items()]
    lines.append("\n[train]")
    lines += [f"{k} = {getattr(cfg.train, k)!r}" if _TRAIN_KEYS[k] is float else f"{k} = {getattr(cfg.train, k)}"
              for k in _TRAIN_KEYS]
    lines.append("\n[tcm]")
    lines += [f"{k} = {getattr(cfg.train.tcm, k)!r}" for k in _TCM_KEYS]
    lines.append("\n[paths]")
    lines += [f"{k} = {v}" for k, v in sorted(cfg.paths.items())]
    return "\n".join(lines) + "\n"
