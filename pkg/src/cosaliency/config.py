"""Run configuration: defaults, validation, and ``key = value`` file parsing."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import InvalidArg


@dataclass(frozen=True)
class Config:
    alpha: float = 0.95
    eta: float = 2.0
    sigma: float = 0.25
    tau: float = 0.5
    clusters: int = 100  # K
    knn: int = 5  # k
    rho: float = 0.7
    gamma: float = 3.0
    scales: tuple = (200, 150, 50)
    coseg_mode: bool = False
    seed: int = 0
    compactness: float = 10.0
    max_components: int = 6
    post_sigma: float = 0.15
    post_shrink: float = 0.25
    mask_threshold: float = 0.5
    workers: int = 1
    # training only
    lr: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    epochs: int = 100
    batch_size: int = 512
    hidden: tuple = (256, 64)
    # heuristic scorer
    heuristic_center: float = 0.5
    heuristic_gain: float = 10.0

    def __post_init__(self):
        checks = [
            (0 < self.alpha < 1, "alpha must be in (0, 1)"),
            (self.eta > 0, "eta must be positive"),
            (self.sigma > 0, "sigma must be positive"),
            (self.gamma > 0, "gamma must be positive"),
            (0 < self.tau < 1, "tau must be in (0, 1)"),
            (0 < self.rho < 1, "rho must be in (0, 1)"),
            (self.clusters >= 2, "K must be at least 2"),
            (self.knn >= 1, "k must be at least 1"),
            (len(self.scales) > 0, "scales must be nonempty"),
            (list(self.scales) == sorted(self.scales, reverse=True), "scales must be descending"),
            (all(s >= 2 for s in self.scales), "every scale needs at least 2 superpixels"),
            (self.workers >= 1, "workers must be at least 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidArg(msg)

    def updated(self, **changes) -> "Config":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


_ALIASES = {"k": "knn", "K": "clusters", "superpixel_scales": "scales", "random_seed": "seed"}


def _coerce(name: str, raw: str, default):
    raw = raw.strip().strip('"').strip("'")
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise InvalidArg(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        items = raw.strip("[]()").replace(",", " ").split()
        return tuple(type(default[0])(x) for x in items)
    try:
        return type(default)(raw)
    except ValueError as exc:
        raise InvalidArg(f"{name}: cannot parse {raw!r}") from exc


def parse_overrides(pairs: dict, base: Config | None = None) -> tuple[Config, dict]:
    """Split ``pairs`` into Config fields (applied to ``base``) and leftover keys."""
    base = base or Config()
    known = {f.name: getattr(base, f.name) for f in fields(base)}
    changes, rest = {}, {}
    for key, raw in pairs.items():
        name = _ALIASES.get(key, _ALIASES.get(key.lower(), key.lower()))
        if name in known:
            changes[name] = _coerce(name, raw, known[name]) if isinstance(raw, str) else raw
        else:
            rest[key] = raw
    return replace(base, **changes), rest


def read_config_file(path) -> dict:
    """Read a flat ``key = value`` file (``#`` comments allowed) into a string dict."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidArg(f"cannot read config {path}: {exc}") from exc
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise InvalidArg(f"malformed config {path}: {exc}") from exc
    return dict(parser["run"])
