"""Pipeline configuration with INI-file loading and strict key checking."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Unknown or malformed configuration input."""


@dataclass
class PipelineConfig:
    # [flow]
    idle_timeout_s: float = 120.0
    active_timeout_s: float | None = 1800.0
    # [bundle]
    window_s: float | None = None  # None = whole capture
    # [rfe]
    rfe_k: int = 5
    rfe_epochs: int = 150
    rfe_learning_rate: float = 0.4
    # [network]
    hidden_size: int = 3
    extended_hidden_size: int = 8
    # [training]
    learning_rate: float = 0.05
    epochs: int = 500
    batch_size: int | None = None
    # [autoencoder]
    autoencoder_epochs: int = 500
    # [evaluation]
    folds: int = 5
    # [zeroday]
    thresholds: tuple[float, ...] = (0.15, 0.10, 0.05)
    # [run]
    seed: int = 0

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["thresholds"] = list(self.thresholds)
        return out


# section -> option -> config attribute
_SCHEMA: dict[str, dict[str, str]] = {
    "flow": {
        "idle_timeout_s": "idle_timeout_s",
        "active_timeout_s": "active_timeout_s",
    },
    "bundle": {"window_s": "window_s"},
    "rfe": {
        "k": "rfe_k",
        "epochs": "rfe_epochs",
        "learning_rate": "rfe_learning_rate",
    },
    "network": {
        "hidden_size": "hidden_size",
        "extended_hidden_size": "extended_hidden_size",
    },
    "training": {
        "learning_rate": "learning_rate",
        "epochs": "epochs",
        "batch_size": "batch_size",
    },
    "autoencoder": {"epochs": "autoencoder_epochs"},
    "evaluation": {"folds": "folds"},
    "zeroday": {"thresholds": "thresholds"},
    "run": {"seed": "seed"},
}

_OPTIONAL_FLOATS = {"active_timeout_s", "window_s"}
_OPTIONAL_INTS = {"batch_size"}
_INTS = {"rfe_k", "rfe_epochs", "hidden_size", "extended_hidden_size", "epochs",
         "folds", "seed", "autoencoder_epochs"}


def _parse_value(attribute: str, raw: str):
    raw = raw.strip()
    if attribute in _OPTIONAL_FLOATS:
        return None if raw.lower() == "none" else float(raw)
    if attribute in _OPTIONAL_INTS:
        return None if raw.lower() == "none" else int(raw)
    if attribute in _INTS:
        return int(raw)
    if attribute == "thresholds":
        return tuple(float(part) for part in raw.split(","))
    return float(raw)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a key = value config file; unknown sections or keys reject."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found or unreadable")
    cfg = PipelineConfig()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown config section [{section}]")
        for option, raw in parser.items(section):
            attribute = _SCHEMA[section].get(option)
            if attribute is None:
                raise ConfigError(
                    f"{path}: unknown key {option!r} in section [{section}]"
                )
            try:
                setattr(cfg, attribute, _parse_value(attribute, raw))
            except ValueError:
                raise ConfigError(
                    f"{path}: bad value {raw!r} for [{section}] {option}"
                )
    return cfg
