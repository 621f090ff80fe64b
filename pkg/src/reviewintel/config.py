"""Project configuration: one JSON file describing inputs, options and seeds.

Relative paths are resolved against the directory holding the config file.
Unknown keys anywhere in the file are rejected.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from reviewintel.errors import ValidationError
from reviewintel.topic_models.base import ALGORITHMS, ModelConfig


@dataclass
class PathsConfig:
    reviews: Path | None = None
    output_dir: Path | None = None
    stopwords: Path | None = None
    abbreviations: Path | None = None
    standardization: Path | None = None
    relations: Path | None = None
    merge_map: Path | None = None
    annotations: Path | None = None
    lexicon_sum: Path | None = None
    lexicon_scaled: Path | None = None
    lexicon_rule: Path | None = None
    modifiers: Path | None = None


@dataclass
class CorpusOptions:
    holdout_count: int = 100
    min_sentence_frequency: int = 3
    stemmer: str = "snowball"
    dedupe: bool = True


@dataclass
class SelectKOptions:
    k_min: int = 5
    k_max: int = 50
    step: int = 1
    n_top: int = 10
    epsilon: float = 1.0
    seeds: list[int] = field(default_factory=list)  # coherence averaged over these; empty: the run seed


@dataclass
class ModelOptions:
    k: int | None = 10  # None: take the K chosen by select-k
    alpha: float | None = None
    beta: float = 0.01
    max_iterations: int | None = None
    tolerance: float = 1e-5
    burn_in: int | None = None
    sample_lag: int = 10


@dataclass
class AspectOptions:
    gamma: float = 0.7
    prevalence_floor: float = 0.0005
    n_keywords: int = 10
    tie_seed: int = 0
    # label -> seed words, used to draft a merge map when none is supplied
    seed_keywords: dict[str, list[str]] = field(default_factory=dict)


@dataclass
class SentimentOptions:
    sum_thresholds: list[float] = field(default_factory=lambda: [-1.0, 1.0])
    scaled_thresholds: list[float] = field(default_factory=lambda: [-0.05, 0.05])
    rule_thresholds: list[float] = field(default_factory=lambda: [-0.05, 0.05])
    sum_scale: list[float] = field(default_factory=lambda: [-5.0, 5.0])
    scaled_scale: list[float] = field(default_factory=lambda: [-1.0, 1.0])
    rule_scale: list[float] = field(default_factory=lambda: [-4.0, 4.0])


@dataclass
class InsightOptions:
    margin: float = 0.10
    bigram_threshold: float = 0.15
    target_entity: str | None = None


@dataclass
class ProjectConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    corpus: CorpusOptions = field(default_factory=CorpusOptions)
    select_k: SelectKOptions = field(default_factory=SelectKOptions)
    models: dict[str, ModelOptions] = field(
        default_factory=lambda: {a: ModelOptions() for a in ALGORITHMS})
    aspects: AspectOptions = field(default_factory=AspectOptions)
    sentiment: SentimentOptions = field(default_factory=SentimentOptions)
    insights: InsightOptions = field(default_factory=InsightOptions)
    seed: int = 0
    threads: int = 1
    source: Path | None = None

    def model_config(self, algorithm: str) -> ModelConfig:
        if algorithm not in self.models:
            raise ValidationError(f"no model section for {algorithm!r} in config")
        opts = self.models[algorithm]
        return ModelConfig(algorithm=algorithm, seed=self.seed, **dataclasses.asdict(opts))

    def to_dict(self) -> dict:
        def convert(x):
            if isinstance(x, Path):
                return str(x)
            if isinstance(x, dict):
                return {k: convert(v) for k, v in x.items()}
            if isinstance(x, list):
                return [convert(v) for v in x]
            return x

        data = convert(dataclasses.asdict(self))
        data.pop("source")
        return data

    def digest(self) -> str:
        """Hash of the effective configuration (paths as written, not file contents)."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def require(self, name: str) -> Path:
        value = getattr(self.paths, name)
        if value is None:
            raise ValidationError(f"config is missing paths.{name}")
        return value


def _build(cls, data: Any, where: str, base: Path):
    if not isinstance(data, dict):
        raise ValidationError(f"{where} must be an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.name != "source"}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        kwargs[name] = _coerce(hints[name], value, f"{where}.{name}" if where else name, base)
    return cls(**kwargs)


def _coerce(hint, value, where: str, base: Path):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where, base)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, where, base)
    if hint is Path:
        if not isinstance(value, str):
            raise ValidationError(f"{where} must be a path string")
        p = Path(value)
        return p if p.is_absolute() else (base / p)
    if origin is dict:
        if not isinstance(value, dict):
            raise ValidationError(f"{where} must be an object")
        return {k: _coerce(args[1], v, f"{where}.{k}", base) for k, v in value.items()}
    if origin is list:
        if not isinstance(value, list):
            raise ValidationError(f"{where} must be a list")
        return [_coerce(args[0], v, where, base) for v in value]
    if hint is bool:
        if not isinstance(value, bool):
            raise ValidationError(f"{where} must be true or false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{where} must be an integer")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{where} must be a number")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ValidationError(f"{where} must be a string")
        return value
    return value


def config_from_dict(data: dict, base: Path = Path(".")) -> ProjectConfig:
    cfg = _build(ProjectConfig, data, "", base)
    for algorithm in cfg.models:
        if algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm in models: {algorithm!r}")
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> ProjectConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    cfg = config_from_dict(data, path.resolve().parent)
    cfg.source = path
    return cfg


def validate(cfg: ProjectConfig) -> None:
    """Range checks, and existence of every input file that is named."""
    for f in dataclasses.fields(PathsConfig):
        p = getattr(cfg.paths, f.name)
        if p is not None and f.name != "output_dir" and not p.is_file():
            raise ValidationError(f"paths.{f.name}: no such file {p}")
    if cfg.corpus.holdout_count < 0:
        raise ValidationError("corpus.holdout_count must be >= 0")
    if not 0.0 < cfg.aspects.gamma < 1.0:
        raise ValidationError("aspects.gamma must lie in (0, 1)")
    if not 0.0 <= cfg.insights.margin < 1.0:
        raise ValidationError("insights.margin must lie in [0, 1)")
    if not 0.0 < cfg.insights.bigram_threshold <= 1.0:
        raise ValidationError("insights.bigram_threshold must lie in (0, 1]")
    for name in ("sum", "scaled", "rule"):
        for kind in ("thresholds", "scale"):
            pair = getattr(cfg.sentiment, f"{name}_{kind}")
            if len(pair) != 2 or pair[0] > pair[1]:
                raise ValidationError(f"sentiment.{name}_{kind} must be [low, high] with low <= high")
    for algorithm, opts in cfg.models.items():
        model = cfg.model_config(algorithm)
        if opts.k is None:
            model = dataclasses.replace(model, k=max(2, cfg.select_k.k_min))
        model.resolved()
