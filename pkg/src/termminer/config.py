"""Pipeline configuration: defaults, YAML file, ``TERMMINER_*`` environment overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .alignment import TRACEBACK_MODES, ScoringScheme
from .io import MissingInputError
from .string_metrics import MiningConfig
from .synthesis import SynthConfig

ENV_PREFIX = "TERMMINER_"


class ConfigError(ValueError):
    """A configuration value is unknown or out of range."""


@dataclass
class Paths:
    manifest: str | None = None
    boundaries: str | None = None
    transcriptions: str | None = None
    ground_truth: str | None = None
    output_dir: str = "out"


@dataclass
class SegmentationSettings:
    window_ms: float = 20.0


@dataclass
class CodebookSettings:
    k: int = 55
    seed: int = 0
    max_iters: int = 300
    hac_sample_cap: int = 100_000
    suggest_max_k: int = 100


@dataclass
class MiningSettings:
    match: float = 1.0
    mismatch: float = -1.0
    gap: float = 0.0
    min_length: int = 4
    traceback: str = "last_row"
    jobs: int = 1

    def scheme(self) -> ScoringScheme:
        return ScoringScheme(self.match, self.mismatch, self.gap)


@dataclass
class ClusteringSettings:
    radius_T: float = 1.4
    sep_a: float = 1.8
    norm_b: float = 4.0
    max_rounds: int = 50


@dataclass
class EvaluationSettings:
    top_trigrams: int = 10
    top_bigrams: int = 20
    top_unigrams: int = 30
    stopwords: str | None = None
    labels: str | None = None
    transcript: str | None = None
    report_top: int = 10
    min_label_purity: float = 0.5


@dataclass
class SynthSettings:
    alphabet_size: int = 55
    num_keywords: int = 5
    keyword_length: list[int] = field(default_factory=lambda: [8, 8])
    num_utterances: int = 20
    utterance_length: list[int] = field(default_factory=lambda: [30, 50])
    occurrences_per_keyword: int = 3
    max_keywords_per_utterance: int | None = None
    substitution_rate: float = 0.0
    insertion_rate: float = 0.0
    deletion_rate: float = 0.0
    noise_filler: bool = False
    min_keyword_distance: int = 0
    seed: int = 0
    features: bool = False
    feature_dim: int = 8

    def synth_config(self) -> SynthConfig:
        kwargs = {f.name: getattr(self, f.name) for f in dataclasses.fields(SynthConfig)}
        return SynthConfig(**kwargs)


@dataclass
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    segmentation: SegmentationSettings = field(default_factory=SegmentationSettings)
    codebook: CodebookSettings = field(default_factory=CodebookSettings)
    mining: MiningSettings = field(default_factory=MiningSettings)
    clustering: ClusteringSettings = field(default_factory=ClusteringSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)

    def mining_config(self) -> MiningConfig:
        c = self.clustering
        return MiningConfig(c.radius_T, c.sep_a, c.norm_b, self.mining.min_length)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> "PipelineConfig":
        try:
            self.mining.scheme()
            self.mining_config()
            self.synth.synth_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.segmentation.window_ms <= 0:
            raise ConfigError("segmentation.window_ms must be > 0")
        if self.codebook.k < 2:
            raise ConfigError("codebook.k must be >= 2")
        if self.mining.traceback not in TRACEBACK_MODES:
            raise ConfigError(f"mining.traceback must be one of {TRACEBACK_MODES}")
        if self.mining.jobs < 1:
            raise ConfigError("mining.jobs must be >= 1")
        if self.clustering.max_rounds < 1:
            raise ConfigError("clustering.max_rounds must be >= 1")
        return self


def _coerce(value: Any, current: Any, name: str, annotation: str = "") -> Any:
    if current is None and str(annotation).startswith("int"):
        # optional integers: parse like any other number, keep None as "no limit"
        if isinstance(value, str):
            value = yaml.safe_load(value)
        if value is None:
            return None
        current = 0
    if isinstance(value, str) and current is not None and not isinstance(current, str):
        try:
            value = yaml.safe_load(value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {name}={value!r}") from exc
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true/false, got {value!r}")
    elif isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    elif isinstance(current, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        value = float(value)
    return value


def _section_fields(section) -> dict[str, dataclasses.Field]:
    return {f.name.lower(): f for f in dataclasses.fields(section)}


def apply_overrides(cfg: PipelineConfig, tree: Mapping[str, Mapping[str, Any]]) -> PipelineConfig:
    sections = {f.name: f.name for f in dataclasses.fields(cfg)}
    for sec_name, values in tree.items():
        if sec_name not in sections:
            raise ConfigError(f"unknown config section {sec_name!r}")
        if values is None:
            continue
        section = getattr(cfg, sec_name)
        names = _section_fields(section)
        for key, value in values.items():
            f = names.get(str(key).lower())
            if f is None:
                raise ConfigError(f"unknown key {sec_name}.{key}")
            attr = f.name
            setattr(section, attr, _coerce(value, getattr(section, attr), f"{sec_name}.{attr}", f.type))
    return cfg


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, dict[str, str]]:
    """``TERMMINER_MINING_GAP=-1`` becomes ``{"mining": {"gap": "-1"}}``."""
    environ = os.environ if environ is None else environ
    tree: dict[str, dict[str, str]] = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):].lower()
        section, _, key = rest.partition("_")
        if not key:
            continue
        tree.setdefault(section, {})[key] = value
    return tree


def load_config(path: str | Path | None = None, environ: Mapping[str, str] | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise MissingInputError(f"missing config file: {p}")
        tree = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        if not isinstance(tree, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
        apply_overrides(cfg, tree)
    apply_overrides(cfg, env_overrides(environ))
    return cfg
