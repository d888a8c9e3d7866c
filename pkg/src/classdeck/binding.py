"""Semantic bindings between slide regions and source analytics.

Content-based bindings pin a record and never move. Frequency-based
bindings pin a ranked chart position; when the record at that position is
displaced and the displacement survives the debounce window, the binding
rebinds and the pre-generated block for the new record is swapped into the
region without a synchronous provider call.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from classdeck.analytics import ChartDelta, ChartSnapshot, ChartStore
from classdeck.errors import (
    BindingNotFound,
    RegionOccupiedByForeignBinding,
    UnknownRecord,
)
from classdeck.ingest import AnalyticsDB, ChartKey


@dataclass(frozen=True)
class RankSpec:
    """A single chart position: i-th from the top or i-th from the bottom."""

    origin: str  # "top" | "bottom"
    index: int   # 1-based

    def resolve(self, snapshot: ChartSnapshot) -> Optional[str]:
        n = len(snapshot.entries)
        if not (1 <= self.index <= n):
            return None
        rank = self.index if self.origin == "top" else n - self.index + 1
        return snapshot.record_at(rank)

    def as_dict(self) -> dict:
        return {"origin": self.origin, "index": self.index}

    def label(self) -> str:
        return f"{self.origin} {self.index}"


def top_k(k: int) -> list[RankSpec]:
    """Materialize a top-k request as one position spec per region."""
    return [RankSpec("top", i) for i in range(1, k + 1)]


def bottom_k(k: int) -> list[RankSpec]:
    return [RankSpec("bottom", i) for i in range(1, k + 1)]


def rank(i: int) -> RankSpec:
    return RankSpec("top", i)


@dataclass(frozen=True)
class ContentBased:
    record_id: str


@dataclass(frozen=True)
class FrequencyBased:
    rank_spec: RankSpec


BindingKind = ContentBased | FrequencyBased


@dataclass
class SemanticBinding:
    binding_id: str
    region_id: str
    chart_key: ChartKey
    kind: BindingKind
    last_resolved: tuple[Optional[str], int] = (None, 0)  # (record_id, chart_version)

    @property
    def is_frequency_based(self) -> bool:
        return isinstance(self.kind, FrequencyBased)

    def as_dict(self) -> dict:
        kind: dict = {"type": "content", "record_id": self.kind.record_id} if isinstance(
            self.kind, ContentBased
        ) else {"type": "frequency", "rank_spec": self.kind.rank_spec.as_dict()}
        return {
            "binding_id": self.binding_id,
            "region_id": self.region_id,
            "chart_key": [self.chart_key[0], self.chart_key[1].value],
            "kind": kind,
            "last_resolved": list(self.last_resolved),
        }


@dataclass(frozen=True)
class BindingEvent:
    kind: str  # "rebound" | "unchanged"
    binding_id: str
    old_record_id: Optional[str]
    new_record_id: Optional[str]
    region_id: str
    swapped_from_cache: bool = False

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "binding_id": self.binding_id,
            "old_record_id": self.old_record_id,
            "new_record_id": self.new_record_id,
            "region_id": self.region_id,
            "swapped_from_cache": self.swapped_from_cache,
        }


@dataclass
class PregenEntry:
    chart_key: ChartKey
    record_id: str
    block_dict: dict
    built_against: tuple[int, int, int]  # (freq_of_record, freq_of_bound, chart_version)


class BindingStore:
    def __init__(self, db: AnalyticsDB, id_factory: Callable[[str], str]):
        self.db = db
        self.bindings: dict[str, SemanticBinding] = {}
        self._by_region: dict[str, str] = {}
        self._ids = id_factory

    def create(self, region_id: str, chart_key: ChartKey, kind: BindingKind) -> SemanticBinding:
        if region_id in self._by_region:
            raise RegionOccupiedByForeignBinding(f"region {region_id!r} already bound")
        if isinstance(kind, ContentBased) and self.db.get(kind.record_id) is None:
            raise UnknownRecord(f"no record {kind.record_id!r}")
        binding = SemanticBinding(
            binding_id=self._ids("bind"), region_id=region_id, chart_key=chart_key, kind=kind
        )
        self.bindings[binding.binding_id] = binding
        self._by_region[region_id] = binding.binding_id
        return binding

    def get(self, binding_id: str) -> SemanticBinding:
        binding = self.bindings.get(binding_id)
        if binding is None:
            raise BindingNotFound(f"no binding {binding_id!r}")
        return binding

    def for_region(self, region_id: str) -> Optional[SemanticBinding]:
        bid = self._by_region.get(region_id)
        return self.bindings.get(bid) if bid else None

    def remove_region(self, region_id: str) -> Optional[SemanticBinding]:
        bid = self._by_region.pop(region_id, None)
        return self.bindings.pop(bid, None) if bid else None

    def on_chart(self, chart_key: ChartKey) -> list[SemanticBinding]:
        return sorted(
            (b for b in self.bindings.values() if b.chart_key == chart_key),
            key=lambda b: b.binding_id,
        )

    def frequency_bound_charts(self) -> set[ChartKey]:
        return {b.chart_key for b in self.bindings.values() if b.is_frequency_based}

    def toggle_kind(self, binding_id: str, charts: ChartStore) -> SemanticBinding:
        """Flip binding type, pinning or adopting the currently resolved record."""
        binding = self.get(binding_id)
        snapshot = charts.snapshot(binding.chart_key)
        if isinstance(binding.kind, FrequencyBased):
            record_id = binding.last_resolved[0] or binding.kind.rank_spec.resolve(snapshot)
            if record_id is None:
                raise UnknownRecord("binding has never resolved; nothing to pin")
            binding.kind = ContentBased(record_id)
            binding.last_resolved = (record_id, snapshot.version)
        else:
            record_id = binding.kind.record_id
            current_rank = snapshot.rank_of(record_id)
            if current_rank is None:
                raise UnknownRecord(f"record {record_id!r} is not on the chart")
            binding.kind = FrequencyBased(RankSpec("top", current_rank))
            binding.last_resolved = (record_id, snapshot.version)
        return binding

    def as_dict(self) -> dict:
        return {bid: b.as_dict() for bid, b in sorted(self.bindings.items())}


class PregenCache:
    """Engine-local store of blocks synthesized ahead of rank displacement."""

    def __init__(self):
        self.entries: dict[tuple[ChartKey, str], PregenEntry] = {}
        self.refreshes = 0

    def get(self, chart_key: ChartKey, record_id: str) -> Optional[PregenEntry]:
        return self.entries.get((chart_key, record_id))

    def put(self, entry: PregenEntry) -> None:
        self.entries[(entry.chart_key, entry.record_id)] = entry

    def evict_chart(self, chart_key: ChartKey) -> None:
        for key in [k for k in self.entries if k[0] == chart_key]:
            del self.entries[key]

    def records_for(self, chart_key: ChartKey) -> list[str]:
        return sorted(rid for (ck, rid) in self.entries if ck == chart_key)


@dataclass
class _Pending:
    candidate_record_id: str
    since_ms: int


class FrequencyMonitor:
    """Tracks rank displacement per frequency binding and commits rebinds.

    A displacement must hold for the debounce interval before the binding
    moves; a resolution that returns to the bound record cancels the
    pending move. ``tick`` is the only place a rebind commits, so callers
    advance the clock through it.
    """

    def __init__(
        self,
        store: BindingStore,
        charts: ChartStore,
        cache: PregenCache,
        debounce_ms: int,
        pregen_builder: Callable[[ChartKey, str], dict],
        swap_installer: Callable[[SemanticBinding, dict], None],
        sync_builder: Callable[[ChartKey, str], dict],
        refresh_diff: int = 2,
        audit_text: Optional[Callable[[ChartKey, str], str]] = None,
    ):
        self.store = store
        self.charts = charts
        self.cache = cache
        self.debounce_ms = debounce_ms
        self.refresh_diff = refresh_diff
        self._build_pregen = pregen_builder
        self._install_swap = swap_installer
        self._build_sync = sync_builder
        # Pure recompute of the stub text from live data, logged with each
        # swap so the cache-freshness contract is auditable after the fact.
        self._audit_text = audit_text
        self._pending: dict[str, _Pending] = {}
        self.swap_log: list[dict] = []

    def resolve_binding(self, binding: SemanticBinding) -> Optional[str]:
        snapshot = self.charts.snapshot(binding.chart_key)
        if isinstance(binding.kind, ContentBased):
            return binding.kind.record_id
        return binding.kind.rank_spec.resolve(snapshot)

    @staticmethod
    def _unchanged(binding: SemanticBinding) -> BindingEvent:
        current = binding.last_resolved[0]
        return BindingEvent(
            kind="unchanged",
            binding_id=binding.binding_id,
            old_record_id=current,
            new_record_id=current,
            region_id=binding.region_id,
        )

    def on_chart_delta(self, delta: ChartDelta, now_ms: int) -> list[BindingEvent]:
        """Reconsider every frequency binding on the delta's chart."""
        if delta.empty or delta.chart_key is None:
            return []
        events: list[BindingEvent] = []
        for binding in self.store.on_chart(delta.chart_key):
            if not binding.is_frequency_based:
                events.append(self._unchanged(binding))
                continue
            target = self.resolve_binding(binding)
            current = binding.last_resolved[0]
            if target is None or target == current:
                self._pending.pop(binding.binding_id, None)
                events.append(self._unchanged(binding))
                continue
            pending = self._pending.get(binding.binding_id)
            if pending is None or pending.candidate_record_id != target:
                self._pending[binding.binding_id] = _Pending(target, now_ms)
            events.append(self._unchanged(binding))
        return events

    def tick(self, now_ms: int) -> list[BindingEvent]:
        """Commit pending rebinds whose displacement outlived the debounce."""
        events: list[BindingEvent] = []
        for binding_id in sorted(self._pending):
            pending = self._pending[binding_id]
            if now_ms - pending.since_ms < self.debounce_ms:
                continue
            binding = self.store.bindings.get(binding_id)
            if binding is None:
                del self._pending[binding_id]
                continue
            target = self.resolve_binding(binding)
            if target != pending.candidate_record_id or target is None:
                # Rank moved again while pending; on_chart_delta restarted the clock.
                if target == binding.last_resolved[0]:
                    del self._pending[binding_id]
                continue
            del self._pending[binding_id]
            events.append(self._commit(binding, target, now_ms))
        return events

    def _commit(self, binding: SemanticBinding, target: str, now_ms: int) -> BindingEvent:
        snapshot = self.charts.snapshot(binding.chart_key)
        old = binding.last_resolved[0]
        entry = self.cache.get(binding.chart_key, target)
        if entry is not None:
            block_dict, from_cache = entry.block_dict, True
        else:
            block_dict, from_cache = self._build_sync(binding.chart_key, target), False
        binding.last_resolved = (target, snapshot.version)
        self._install_swap(binding, block_dict)
        self.swap_log.append(
            {
                "t_ms": now_ms,
                "binding_id": binding.binding_id,
                "chart_key": binding.chart_key,
                "record_id": target,
                "from_cache": from_cache,
                "block_text": block_dict["text"],
                "sync_stub_text": self._audit_text(binding.chart_key, target)
                if self._audit_text
                else None,
            }
        )
        return BindingEvent(
            kind="rebound",
            binding_id=binding.binding_id,
            old_record_id=old,
            new_record_id=target,
            region_id=binding.region_id,
            swapped_from_cache=from_cache,
        )

    def initial_resolution(self, binding: SemanticBinding) -> Optional[str]:
        """Resolve a fresh binding and seed last_resolved (no debounce)."""
        target = self.resolve_binding(binding)
        if target is not None:
            snapshot = self.charts.snapshot(binding.chart_key)
            binding.last_resolved = (target, snapshot.version)
        return target

    # --- pregen maintenance -------------------------------------------------

    def maintain_pregen(self, delta: ChartDelta) -> None:
        """Apply the cache rules after a chart delta.

        New category on a frequency-bound chart: build its block. Cached
        record whose frequency is within the refresh margin of a bound
        record's: rebuild against latest data. Charts without frequency
        bindings: evict.
        """
        if delta.empty or delta.chart_key is None:
            return
        chart_key = delta.chart_key
        freq_charts = self.store.frequency_bound_charts()
        if chart_key not in freq_charts:
            self.cache.evict_chart(chart_key)
            return

        snapshot = self.charts.snapshot(chart_key)
        freqs = {rid: freq for (_, rid, freq) in snapshot.entries}
        bound_records = set()
        has_unresolved = False
        for binding in self.store.on_chart(chart_key):
            if not binding.is_frequency_based:
                continue
            if binding.last_resolved[0] is not None:
                bound_records.add(binding.last_resolved[0])
            else:
                has_unresolved = True
        # Records mid-displacement must never swap in stale; the frequency
        # margin alone does not cover first resolutions or bottom-rank moves.
        pending_candidates = {
            p.candidate_record_id
            for bid, p in self._pending.items()
            if bid in self.store.bindings and self.store.bindings[bid].chart_key == chart_key
        }

        if delta.created_record_id is not None:
            self._refresh_entry(chart_key, delta.created_record_id, freqs, bound_records, snapshot.version)

        for record_id in self.cache.records_for(chart_key):
            entry = self.cache.get(chart_key, record_id)
            if entry is None or record_id not in freqs:
                continue
            if entry.built_against[2] >= snapshot.version:
                continue
            near_bound = (
                has_unresolved
                or record_id in pending_candidates
                or any(
                    abs(freqs[record_id] - freqs.get(b, 0)) < self.refresh_diff
                    for b in bound_records
                )
            )
            if near_bound:
                self._refresh_entry(chart_key, record_id, freqs, bound_records, snapshot.version)

    def _refresh_entry(
        self,
        chart_key: ChartKey,
        record_id: str,
        freqs: dict[str, int],
        bound_records: set[str],
        version: int,
    ) -> None:
        block_dict = self._build_pregen(chart_key, record_id)
        bound_freq = 0
        if bound_records:
            bound_freq = min(
                (freqs.get(b, 0) for b in bound_records),
                key=lambda f: abs(freqs.get(record_id, 0) - f),
            )
        self.cache.put(
            PregenEntry(
                chart_key=chart_key,
                record_id=record_id,
                block_dict=block_dict,
                built_against=(freqs.get(record_id, 0), bound_freq, version),
            )
        )
        self.cache.refreshes += 1

    def seed_chart(self, chart_key: ChartKey) -> None:
        """Pre-generate for every current category when a chart gains its
        first frequency binding."""
        snapshot = self.charts.snapshot(chart_key)
        freqs = {rid: freq for (_, rid, freq) in snapshot.entries}
        bound = {
            b.last_resolved[0]
            for b in self.store.on_chart(chart_key)
            if b.is_frequency_based and b.last_resolved[0] is not None
        }
        for (_, rid, _) in snapshot.entries:
            self._refresh_entry(chart_key, rid, freqs, bound, snapshot.version)
