"""Live per-question, per-dimension charts plus discussion-activity signals.

Charts re-rank on every applied effect and publish immutable snapshots with
strictly increasing, gap-free versions. Ranking is a deterministic total
order so frequency bindings always resolve the same way for the same data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from classdeck.errors import SessionNotStarted, UnknownRecord
from classdeck.ingest import (
    DEFAULT_VISIBLE_DIMENSIONS,
    AnalyticsDB,
    AnalyticsEffect,
    AnalyticsRecord,
    ChartKey,
    Dimension,
)


def rank_key(record: AnalyticsRecord) -> tuple:
    """Total order: frequency desc, first seen asc, label asc."""
    return (-record.frequency, record.first_seen_ms, record.topic_label)


def rank_chart(records: list[AnalyticsRecord]) -> list[AnalyticsRecord]:
    return sorted(records, key=rank_key)


@dataclass(frozen=True)
class ChartSnapshot:
    discussion_point: str
    dimension: Dimension
    version: int
    entries: tuple[tuple[str, str, int], ...]  # (topic_label, record_id, frequency)
    generated_at_ms: int

    @property
    def chart_key(self) -> ChartKey:
        return (self.discussion_point, self.dimension)

    @property
    def visible_by_default(self) -> bool:
        return self.dimension in DEFAULT_VISIBLE_DIMENSIONS

    def rank_of(self, record_id: str) -> int | None:
        """1-based rank, None when the record is not on this chart."""
        for i, (_, rid, _) in enumerate(self.entries, start=1):
            if rid == record_id:
                return i
        return None

    def record_at(self, rank: int) -> str | None:
        if 1 <= rank <= len(self.entries):
            return self.entries[rank - 1][1]
        return None

    def as_dict(self) -> dict:
        return {
            "discussion_point": self.discussion_point,
            "dimension": self.dimension.value,
            "version": self.version,
            "entries": [list(e) for e in self.entries],
            "generated_at_ms": self.generated_at_ms,
            "visible_by_default": self.visible_by_default,
        }


@dataclass(frozen=True)
class ChartDeltaRow:
    record_id: str
    old_frequency: int | None
    new_frequency: int
    old_rank: int | None
    new_rank: int


@dataclass(frozen=True)
class ChartDelta:
    chart_key: ChartKey | None
    version: int
    rows: tuple[ChartDeltaRow, ...] = ()
    created_record_id: str | None = None

    @property
    def empty(self) -> bool:
        return self.chart_key is None or not self.rows

    def as_dict(self) -> dict:
        return {
            "chart_key": [self.chart_key[0], self.chart_key[1].value] if self.chart_key else None,
            "version": self.version,
            "rows": [
                {
                    "record_id": r.record_id,
                    "old_frequency": r.old_frequency,
                    "new_frequency": r.new_frequency,
                    "old_rank": r.old_rank,
                    "new_rank": r.new_rank,
                }
                for r in self.rows
            ],
            "created_record_id": self.created_record_id,
        }


EMPTY_DELTA = ChartDelta(chart_key=None, version=0)


class ChartStore:
    """Snapshot cache over the analytics DB, re-ranked per applied effect."""

    def __init__(self, db: AnalyticsDB):
        self.db = db
        self._snapshots: dict[ChartKey, ChartSnapshot] = {}

    def snapshot(self, chart_key: ChartKey) -> ChartSnapshot:
        snap = self._snapshots.get(chart_key)
        if snap is None:
            point, dimension = chart_key
            snap = ChartSnapshot(point, dimension, version=0, entries=(), generated_at_ms=0)
            self._snapshots[chart_key] = snap
        return snap

    def snapshots(self) -> list[ChartSnapshot]:
        return [self._snapshots[key] for key in sorted(self._snapshots, key=lambda k: (k[0], k[1].value))]

    def apply_record(self, effect: AnalyticsEffect, now_ms: int = 0) -> ChartDelta:
        """Fold one ingest effect into its chart; discarded effects are no-ops."""
        if effect.kind == "discarded":
            return EMPTY_DELTA
        if effect.record_id is None or effect.record_id not in self.db.records:
            raise UnknownRecord(f"effect references unknown record {effect.record_id!r}")
        assert effect.chart_key is not None

        old = self.snapshot(effect.chart_key)
        old_ranks = {rid: i for i, (_, rid, _) in enumerate(old.entries, start=1)}
        old_freqs = {rid: freq for (_, rid, freq) in old.entries}

        ranked = rank_chart(self.db.chart_records(effect.chart_key))
        entries = tuple((r.topic_label, r.record_id, r.frequency) for r in ranked)
        new = ChartSnapshot(
            discussion_point=effect.chart_key[0],
            dimension=effect.chart_key[1],
            version=old.version + 1,
            entries=entries,
            generated_at_ms=now_ms,
        )
        self._snapshots[effect.chart_key] = new

        rows = []
        for i, (_, rid, freq) in enumerate(entries, start=1):
            old_rank = old_ranks.get(rid)
            old_freq = old_freqs.get(rid)
            if old_rank != i or old_freq != freq:
                rows.append(
                    ChartDeltaRow(
                        record_id=rid,
                        old_frequency=old_freq,
                        new_frequency=freq,
                        old_rank=old_rank,
                        new_rank=i,
                    )
                )
        return ChartDelta(
            chart_key=effect.chart_key,
            version=new.version,
            rows=tuple(rows),
            created_record_id=effect.record_id if effect.kind == "created" else None,
        )

    def as_dict(self) -> dict:
        return {f"{k[0]}/{k[1].value}": s.as_dict() for k, s in sorted(
            self._snapshots.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
        )}


@dataclass(frozen=True)
class ActivitySignal:
    discussion_point: str
    active_group_fraction: float
    window_ms: int
    remaining_ms: int


@dataclass
class ActivityTracker:
    """Trailing-window participation per discussion point.

    Fed every accepted utterance (including too-short ones: a group that
    said "ok" still participated).
    """

    roster_size: int
    duration_ms: int
    window_ms: int = 60_000
    started: bool = False
    # (point, group) -> latest utterance time; the window only ever looks
    # back, so the most recent timestamp per group is sufficient.
    _last_seen: dict[tuple[str, str], int] = field(default_factory=dict)

    def start(self) -> None:
        self.started = True

    def note(self, discussion_point: str, group_id: str, t_ms: int) -> None:
        self.started = True
        key = (discussion_point, group_id)
        if self._last_seen.get(key, -1) < t_ms:
            self._last_seen[key] = t_ms

    def activity_level(self, discussion_point: str, now_ms: int) -> ActivitySignal:
        if not self.started:
            raise SessionNotStarted("no session clock yet")
        if self.roster_size <= 0:
            raise SessionNotStarted("empty roster")
        floor = now_ms - self.window_ms
        active = sum(
            1
            for (point, _), t in self._last_seen.items()
            if point == discussion_point and floor < t <= now_ms
        )
        return ActivitySignal(
            discussion_point=discussion_point,
            active_group_fraction=active / self.roster_size,
            window_ms=self.window_ms,
            remaining_ms=max(0, self.duration_ms - now_ms),
        )
