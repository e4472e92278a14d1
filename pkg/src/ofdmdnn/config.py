"""Scenario configuration files (JSON or YAML) for the CLI."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .channel import ChannelConfig
from .errors import ConfigError
from .neuralnet import TrainConfig
from .ofdm import ClipConfig, FrameConfig
from .simulate import ScenarioConfig

KNOWN_KEYS = {
    "scenario_id", "n_subcarriers", "cp_len", "n_pilots", "pilot_indices",
    "clip_ratio", "clip_sigma_ref", "n_paths", "max_delay", "decay_const",
    "fading", "train_snr_db", "train_snr_range", "snr_grid", "min_bits",
    "seed", "detectors", "stats_draws", "n_steps", "batch_size",
    "learning_rate",
}


@dataclass(frozen=True)
class AppConfig:
    """Everything a CLI run needs: the scenario plus sweep/training knobs."""

    scenario: ScenarioConfig
    snr_grid: tuple[float, ...] = (5.0, 10.0, 15.0, 20.0, 25.0)
    min_bits: int = 1_000_000
    seed: int = 0
    detectors: tuple[str, ...] = ("ls", "mmse", "dnn")
    stats_draws: int = 100_000
    train: TrainConfig = field(default_factory=TrainConfig)


def load_config(path) -> AppConfig:
    """Parse and validate a scenario file; raises :class:`ConfigError` on
    unknown keys or invalid values."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml
            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")

    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    try:
        return _build(doc, default_id=path.stem)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def _build(doc: dict, default_id: str) -> AppConfig:
    clip = None
    if doc.get("clip_ratio") is not None:
        clip = ClipConfig(
            clip_ratio=float(doc["clip_ratio"]),
            sigma_ref=float(doc.get("clip_sigma_ref", 1.0)),
        )
    frame = FrameConfig(
        n_subcarriers=int(doc.get("n_subcarriers", 64)),
        cp_len=int(doc.get("cp_len", 16)),
        n_pilots=int(doc.get("n_pilots", 64)),
        pilot_indices=tuple(doc["pilot_indices"]) if doc.get("pilot_indices") else None,
        clip=clip,
    )
    channel = ChannelConfig(
        n_paths=int(doc.get("n_paths", 24)),
        max_delay=int(doc.get("max_delay", 16)),
        decay_const=float(doc.get("decay_const", 4.0)),
        fading=bool(doc.get("fading", True)),
    )
    snr_range = doc.get("train_snr_range")
    scenario = ScenarioConfig(
        scenario_id=str(doc.get("scenario_id", default_id)),
        frame=frame,
        channel=channel,
        train_snr_db=float(doc.get("train_snr_db", 20.0)),
        train_snr_range=None if snr_range is None
        else (float(snr_range[0]), float(snr_range[1])),
    )

    seed = int(doc.get("seed", 0))
    if seed < 0:
        raise ValueError("seed must be non-negative")
    min_bits = int(doc.get("min_bits", 1_000_000))
    if min_bits < 10_000:
        raise ValueError("min_bits must be at least 10^4")
    detectors = tuple(doc.get("detectors", ("ls", "mmse", "dnn")))
    snr_grid = tuple(float(s) for s in doc.get("snr_grid", (5, 10, 15, 20, 25)))
    if not snr_grid:
        raise ValueError("snr_grid must be nonempty")
    stats_draws = int(doc.get("stats_draws", 100_000))

    train = TrainConfig(
        learning_rate=float(doc.get("learning_rate", 1e-3)),
        batch_size=int(doc.get("batch_size", 256)),
        n_steps=int(doc.get("n_steps", 20_000)),
        seed=seed,
    )
    return AppConfig(
        scenario=scenario,
        snr_grid=snr_grid,
        min_bits=min_bits,
        seed=seed,
        detectors=detectors,
        stats_draws=stats_draws,
        train=train,
    )
