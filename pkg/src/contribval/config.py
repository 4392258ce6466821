"""Experiment configuration: a flat ``key = value`` document with a fixed schema.

Values use TOML scalar syntax (quoted strings, ints, floats, ``true``/``false``
and one-line lists).  Every problem is collected and reported together, each
with the line it came from.
"""

from __future__ import annotations

import ast
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .aggregation import AGGREGATOR_IDS
from .estimators import ESTIMATOR_IDS, NORMALIZATION_MODES
from .models import ARCHITECTURES

DATASETS = ("synthetic", "idx")
VALUATION_IDS = ESTIMATOR_IDS + ("none",)
ALIASES = {"k": "clients_per_round"}


class ConfigError(ValueError):
    """All problems found in one document; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = list(errors)
        super().__init__("\n".join(f"line {ln}: {msg}" if ln else msg for ln, msg in self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "synthetic"
    idx_images: str = ""
    idx_labels: str = ""
    n_samples: int = 6000
    n_classes: int = 5
    n_features: int = 20
    class_sep: float = 0.5
    data_seed: int = 0
    n_clients: int = 100
    clients_per_round: int = 10
    rounds: int = 100
    dirichlet_alpha: float = 0.05
    imbalance_factor: float = 0.05
    eval_fraction: float = 0.01
    estimator: str = "owen"
    Q: int = 2
    M: int = 4
    eta: float = 0.05
    owen_mode: str = "visited"
    gtg_eps: float = 0.01
    epsilon: float = 0.1
    confidence_c: float = 1.0
    tau: float = 0.0
    lr: float = 0.05
    batch: int = 32
    local_epochs: int = 1
    model: str = "logreg"
    hidden: int = 32
    aggregator: str = "softmax-contrib"
    ablation: bool = False
    seeds: tuple[int, ...] = field(default=(1,))
    output_dir: str = "results"

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with ``changes`` applied and the whole result re-validated."""
        cfg = dataclasses.replace(self, **changes)
        errors = [(0, msg) for msg in _validate(cfg)]
        if errors:
            raise ConfigError(errors)
        return cfg

    def as_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["seeds"] = list(self.seeds)
        return d


def _int(lo: int, hi: float = math.inf) -> Callable[[Any], str | None]:
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            return "expected an integer"
        if not lo <= v <= hi:
            return f"must lie in [{lo}, {hi}]" if hi != math.inf else f"must be >= {lo}"
        return None
    return check


def _real(lo: float, hi: float, lo_open: bool = False, hi_open: bool = False) -> Callable[[Any], str | None]:
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "expected a number"
        if not math.isfinite(v):
            return "must be finite"
        bad_lo = v <= lo if lo_open else v < lo
        bad_hi = v >= hi if hi_open else v > hi
        if bad_lo or bad_hi:
            return f"must lie in {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}"
        return None
    return check


def _choice(options) -> Callable[[Any], str | None]:
    def check(v):
        if v not in options:
            return f"must be one of {', '.join(options)}"
        return None
    return check


def _string(v):
    return None if isinstance(v, str) else "expected a string"


def _boolean(v):
    return None if isinstance(v, bool) else "expected true or false"


def _seeds(v):
    if not isinstance(v, (list, tuple)) or not v:
        return "expected a non-empty list of integers"
    if any(isinstance(s, bool) or not isinstance(s, int) or s < 0 for s in v):
        return "seeds must be non-negative integers"
    if len(set(v)) != len(v):
        return "seeds must be distinct"
    return None


INF = math.inf
SCHEMA: dict[str, Callable[[Any], str | None]] = {
    "dataset": _choice(DATASETS),
    "idx_images": _string,
    "idx_labels": _string,
    "n_samples": _int(1),
    "n_classes": _int(1),
    "n_features": _int(1),
    "class_sep": _real(0, INF, lo_open=True),
    "data_seed": _int(0),
    "n_clients": _int(1),
    "clients_per_round": _int(1),
    "rounds": _int(0),
    "dirichlet_alpha": _real(0, INF, lo_open=True),
    "imbalance_factor": _real(0, 1, lo_open=True),
    "eval_fraction": _real(0, 1, lo_open=True, hi_open=True),
    "estimator": _choice(VALUATION_IDS),
    "Q": _int(1),
    "M": _int(1),
    "eta": _real(0, 1, hi_open=True),
    "owen_mode": _choice(NORMALIZATION_MODES),
    "gtg_eps": _real(0, INF),
    "epsilon": _real(0, 1),
    "confidence_c": _real(0, INF, lo_open=True),
    "tau": _real(0, INF),
    "lr": _real(0, INF),
    "batch": _int(1),
    "local_epochs": _int(1),
    "model": _choice(ARCHITECTURES),
    "hidden": _int(1),
    "aggregator": _choice(AGGREGATOR_IDS),
    "ablation": _boolean,
    "seeds": _seeds,
    "output_dir": _string,
}
assert set(SCHEMA) == {f.name for f in dataclasses.fields(ExperimentConfig)}


def _validate(cfg: ExperimentConfig) -> list[str]:
    errors = []
    for key, check in SCHEMA.items():
        msg = check(getattr(cfg, key))
        if msg:
            errors.append(f"{key}: {msg}")
    if not errors:
        if cfg.clients_per_round > cfg.n_clients:
            errors.append(f"clients_per_round: {cfg.clients_per_round} exceeds n_clients={cfg.n_clients}")
        if cfg.dataset == "idx" and not (cfg.idx_images and cfg.idx_labels):
            errors.append("dataset: idx needs both idx_images and idx_labels")
    return errors


def _strip_comment(text: str) -> str:
    quote = None
    escaped = False
    for i, ch in enumerate(text):
        if quote:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            return text[:i]
    return text


def _literal(raw: str) -> Any:
    if raw in ("true", "false"):
        return raw == "true"
    value = ast.literal_eval(raw)
    if isinstance(value, (list, tuple)):
        return list(value)
    if not isinstance(value, (str, int, float)):
        raise ValueError
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document; missing keys take their defaults.

    Raises:
        ConfigError: listing every malformed line, unknown key, duplicate and
            out-of-range value, each tagged with its line number.
    """
    errors: list[tuple[int, str]] = []
    values: dict[str, Any] = {}
    where: dict[str, int] = {}
    for ln, line in enumerate(text.split("\n"), start=1):
        body = _strip_comment(line.rstrip("\r")).strip()
        if not body:
            continue
        key, sep, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key or not raw:
            errors.append((ln, f"expected 'key = value', got {body!r}"))
            continue
        key = ALIASES.get(key, key)
        if key not in SCHEMA:
            errors.append((ln, f"unknown key {key!r}"))
            continue
        if key in where:
            errors.append((ln, f"{key}: duplicate (first set on line {where[key]})"))
            continue
        try:
            value = _literal(raw)
        except (ValueError, SyntaxError, MemoryError, RecursionError):
            errors.append((ln, f"{key}: cannot parse value {raw!r}"))
            continue
        msg = SCHEMA[key](value)
        if msg:
            errors.append((ln, f"{key}: {msg}"))
            continue
        values[key] = tuple(value) if key == "seeds" else value
        where[key] = ln
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(**values)
    for msg in _validate(cfg):
        errors.append((where.get(msg.split(":", 1)[0], 0), msg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format(v) for v in value) + "]"
    return repr(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in dataclasses.fields(cfg))


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
