"""Session configuration: roster, discussion points, thresholds, providers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from classdeck import keywords as kw
from classdeck.errors import ConfigInvalid


@dataclass(frozen=True)
class Thresholds:
    """Every tunable the engine consults, with its shipped default."""

    min_tokens: int = 8                    # "substantial length" gate
    dup_threshold: float = 0.85            # cosine at or above merges topics
    ms_per_token: int = 400                # speech-rate proxy for time accrual
    activity_window_ms: int = 60_000
    low_activity_fraction: float = 0.10
    time_low_ms: int = 120_000
    rebind_debounce_ms: int = 3_000        # sustained rank displacement before swap
    pregen_refresh_diff: int = 2           # refresh cache when |freq gap| < this
    fusion_window_ms: int = 4_000          # voice+sketch pairing window
    material_similarity_floor: float = 0.3
    provider_timeout_s: float = 5.0
    embedding_dim: int = 256


@dataclass(frozen=True)
class ProviderSpec:
    kind: str = "deterministic_stub"       # or "external_generative"
    endpoint: str = ""
    token_env: str = "CLASSDECK_PROVIDER_TOKEN"


@dataclass(frozen=True)
class DiscussionPoint:
    point_id: str
    prompt: str = ""


@dataclass(frozen=True)
class SessionConfig:
    session_id: str
    title: str = ""
    duration_min: int = 10
    roster: tuple[str, ...] = ()
    discussion_points: tuple[DiscussionPoint, ...] = ()
    transcript_path: str = ""
    keyword_paths: dict[str, str] = field(default_factory=dict)
    thresholds: Thresholds = field(default_factory=Thresholds)
    provider: ProviderSpec = field(default_factory=ProviderSpec)
    material_dir: str = ""

    def __post_init__(self):
        if self.duration_min <= 0:
            raise ConfigInvalid("duration_min must be positive")
        if not self.roster:
            raise ConfigInvalid("roster must be nonempty")
        if not self.discussion_points:
            raise ConfigInvalid("at least one discussion point required")

    @property
    def duration_ms(self) -> int:
        return self.duration_min * 60_000

    @property
    def point_ids(self) -> tuple[str, ...]:
        return tuple(p.point_id for p in self.discussion_points)

    def load_keywords(self) -> dict[str, kw.KeywordSet]:
        """Resolve keyword sets: configured paths win, built-ins otherwise."""
        sets = {}
        for name in ("cs", "ethics", "frameworks"):
            path = self.keyword_paths.get(name)
            sets[name] = kw.load_keyword_file(name, path) if path else kw.load_default(name)
        return sets

    def with_transcript(self, path: str | Path) -> "SessionConfig":
        return replace(self, transcript_path=str(path))


def _point(obj) -> DiscussionPoint:
    if isinstance(obj, str):
        return DiscussionPoint(point_id=obj)
    return DiscussionPoint(point_id=obj["id"], prompt=obj.get("prompt", ""))


def config_from_dict(data: dict, base_dir: Path | None = None) -> SessionConfig:
    base = Path(base_dir) if base_dir else Path(".")

    def resolve(p: str) -> str:
        return str((base / p)) if p and not Path(p).is_absolute() else p

    try:
        thresholds = Thresholds(**data.get("thresholds", {}))
        provider = ProviderSpec(**data.get("provider", {}))
        return SessionConfig(
            session_id=data["session_id"],
            title=data.get("title", ""),
            duration_min=data.get("duration_min", 10),
            roster=tuple(data["roster"]),
            discussion_points=tuple(_point(p) for p in data["discussion_points"]),
            transcript_path=resolve(data.get("transcript", "")),
            keyword_paths={k: resolve(v) for k, v in data.get("keywords", {}).items()},
            thresholds=thresholds,
            provider=provider,
            material_dir=resolve(data.get("material_dir", "")),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigInvalid(f"bad session config: {exc}") from exc


def load_config(path: str | Path) -> SessionConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigInvalid(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    cfg = config_from_dict(data, base_dir=path.parent)
    missing = [p for p in (cfg.transcript_path, *cfg.keyword_paths.values()) if p and not Path(p).exists()]
    if missing:
        raise ConfigInvalid(f"configured paths do not resolve: {missing}")
    return cfg
