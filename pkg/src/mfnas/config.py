"""Run configuration: defaults, the flat key-value file format, and the
named RNG substreams every stochastic component draws from."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .variation import ConfigurationError, VariationConfig


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose, derived from the run seed."""
    tag = int.from_bytes(hashlib.blake2b(name.encode(), digest_size=8).digest(), "big")
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def derived_seed(seed: int, name: str) -> int:
    """Stable integer sub-seed (used for the synthetic evaluator's noise)."""
    h = hashlib.blake2b(f"{seed}|{name}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big") >> 1


@dataclass(frozen=True)
class RunConfig:
    pop_size: int = 20
    gen_budget: int = 25
    node_range: tuple[int, int] = (5, 12)
    mf: int = 6
    complete_epochs: int = 25
    archive_capacity: int | None = None  # None -> pop_size
    variation: VariationConfig = field(default_factory=VariationConfig)
    evaluator: str = "synthetic"
    seed: int = 0
    out_dir: Path | None = None

    @property
    def capacity(self) -> int:
        return self.pop_size if self.archive_capacity is None else self.archive_capacity

    def validate(self) -> None:
        if self.pop_size < 2 or self.pop_size % 2 != 0:
            raise ConfigurationError(f"pop_size must be even and >= 2, got {self.pop_size}")
        if self.gen_budget < 1:
            raise ConfigurationError(f"gen_budget must be >= 1, got {self.gen_budget}")
        if self.mf < 1:
            raise ConfigurationError(f"mf must be >= 1, got {self.mf}")
        if self.mf > self.gen_budget:
            raise ConfigurationError(
                f"mf={self.mf} exceeds gen_budget={self.gen_budget}: tick interval would be 0"
            )
        if self.mf > self.complete_epochs:
            raise ConfigurationError(
                f"mf={self.mf} exceeds complete_epochs={self.complete_epochs}"
            )
        lo, hi = self.node_range
        if not 1 <= lo <= hi:
            raise ConfigurationError(f"node_range must satisfy 1 <= lo <= hi, got {self.node_range}")
        if hi > self.variation.node_cap:
            raise ConfigurationError(
                f"node_range upper bound {hi} exceeds node_cap {self.variation.node_cap}"
            )
        if self.capacity < 0:
            raise ConfigurationError(f"archive_capacity must be >= 0, got {self.capacity}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed}")
        if not (self.evaluator.startswith("synthetic") or self.evaluator.startswith("exec:")):
            raise ConfigurationError(
                f"evaluator must be 'synthetic[:seed]' or 'exec:<command>', got {self.evaluator!r}"
            )
        self.variation.validate()


# Keys accepted in config files and as CLI overrides, with parse/format rules.
_INT_KEYS = ("pop_size", "gen_budget", "mf", "complete_epochs", "seed")
_VARIATION_FLOAT_KEYS = ("p_crossover", "p_inter_cell", "p_op", "p_add_node")


def config_to_text(cfg: RunConfig) -> str:
    """Effective configuration in the flat key = value format (re-parseable)."""
    lines = [
        f"pop_size = {cfg.pop_size}",
        f"gen_budget = {cfg.gen_budget}",
        f"node_range = {cfg.node_range[0]},{cfg.node_range[1]}",
        f"mf = {cfg.mf}",
        f"complete_epochs = {cfg.complete_epochs}",
        f"archive_capacity = {cfg.capacity}",
        f"seed = {cfg.seed}",
        f"evaluator = {cfg.evaluator}",
        f"out_dir = {cfg.out_dir if cfg.out_dir is not None else ''}",
        f"p_crossover = {cfg.variation.p_crossover}",
        f"p_inter_cell = {cfg.variation.p_inter_cell}",
        f"p_link = {'auto' if cfg.variation.p_link is None else cfg.variation.p_link}",
        f"p_op = {cfg.variation.p_op}",
        f"p_add_node = {cfg.variation.p_add_node}",
        f"node_cap = {cfg.variation.node_cap}",
    ]
    return "\n".join(lines) + "\n"


def apply_settings(cfg: RunConfig, settings: dict[str, str]) -> RunConfig:
    """Apply flat key/value pairs (config file or CLI overrides) to a config."""
    variation = cfg.variation
    for key, raw in settings.items():
        value = raw.strip()
        if key in _INT_KEYS:
            cfg = replace(cfg, **{key: int(value)})
        elif key == "archive_capacity":
            cfg = replace(cfg, archive_capacity=None if value in ("", "auto") else int(value))
        elif key == "node_range":
            lo, hi = (int(x) for x in value.split(","))
            cfg = replace(cfg, node_range=(lo, hi))
        elif key == "evaluator":
            cfg = replace(cfg, evaluator=value)
        elif key == "out_dir":
            cfg = replace(cfg, out_dir=Path(value) if value else None)
        elif key in _VARIATION_FLOAT_KEYS:
            variation = replace(variation, **{key: float(value)})
        elif key == "p_link":
            variation = replace(variation, p_link=None if value == "auto" else float(value))
        elif key == "node_cap":
            variation = replace(variation, node_cap=int(value))
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    return replace(cfg, variation=variation)


def parse_config_file(path: Path, base: RunConfig | None = None) -> RunConfig:
    settings: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return apply_settings(base if base is not None else RunConfig(), settings)
