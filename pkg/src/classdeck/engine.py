"""Session engine: the single logical writer over all live state.

Inputs (utterances, clock advances, commands, edits, suggestion
resolutions) arrive as plain dicts, are appended to an input log, folded
into state, and answered with gap-free event envelopes. State is a pure
function of the input log, which is what makes persistence a file of
inputs and restore an exact replay.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from classdeck import command as cmd
from classdeck.analytics import ActivityTracker, ChartStore
from classdeck.binding import (
    BindingStore,
    ContentBased,
    FrequencyBased,
    FrequencyMonitor,
    PregenCache,
    RankSpec,
    SemanticBinding,
)
from classdeck.config import SessionConfig
from classdeck.deck import (
    ContentType,
    Deck,
    DeckDelta,
    DeleteBlock,
    EditText,
    Layout,
    PlaceBlock,
    Provenance,
    ReorderSlides,
    SemanticBlock,
    SetLayout,
    block_from_dict,
)
from classdeck.errors import (
    EngineError,
    NoEligibleRecords,
    ProtocolViolation,
    SuggestionStale,
    TargetNotFound,
    UnknownRecord,
)
from classdeck.genpipe import (
    BlockRequest,
    CountingProvider,
    GenerationPipeline,
    SlideContext,
    build_provider,
)
from classdeck.ingest import AnalyticsDB, ChartKey, Dimension, IngestPipeline, UtteranceRecord
from classdeck.suggest import MetricEvaluator, SuggestionEngine, TriggerState

REBIND_CONTENT_TYPE = ContentType.COMMENTARY


@dataclass(frozen=True)
class Envelope:
    seq: int
    kind: str
    payload: dict
    t_ms: int

    def as_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "t_ms": self.t_ms}


@dataclass
class _PendingModality:
    t_ms: int
    gesture: Optional[cmd.Gesture] = None
    voice: Optional[cmd.VoiceCommand] = None
    req_id: str = ""
    point: str = ""


def _id_gen():
    counters: dict[str, int] = {}

    def make(prefix: str) -> str:
        counters[prefix] = counters.get(prefix, 0) + 1
        return f"{prefix}{counters[prefix]}"

    return make


class Engine:
    def __init__(self, config: SessionConfig):
        self.config = config
        self.now_ms = 0
        self.started = False
        self.closed = False
        self._ids = _id_gen()

        self.db = AnalyticsDB()
        self.pipeline = IngestPipeline(config, db=self.db, id_factory=lambda: self._ids("r"))
        self.charts = ChartStore(self.db)
        self.activity = ActivityTracker(
            roster_size=len(config.roster),
            duration_ms=config.duration_ms,
            window_ms=config.thresholds.activity_window_ms,
        )
        self.deck = Deck(id_factory=self._ids)
        self.bindings = BindingStore(self.db, id_factory=self._ids)
        self._binding_graveyard: dict[str, SemanticBinding] = {}
        self.cache = PregenCache()

        self.provider = CountingProvider(build_provider(config.provider, config.thresholds))
        self.genpipe = GenerationPipeline(
            self.db, self.deck, self.provider, id_factory=self._ids
        )
        self.monitor = FrequencyMonitor(
            store=self.bindings,
            charts=self.charts,
            cache=self.cache,
            debounce_ms=config.thresholds.rebind_debounce_ms,
            pregen_builder=self._build_rebind_block,
            swap_installer=self._install_swap,
            sync_builder=self._build_rebind_block,
            refresh_diff=config.thresholds.pregen_refresh_diff,
            audit_text=self._audit_stub_text,
        )
        keyword_sets = config.load_keywords()
        self.evaluator = MetricEvaluator(
            self.db, len(config.roster), keyword_sets["cs"], keyword_sets["ethics"]
        )
        self.triggers = TriggerState(
            low_activity_fraction=config.thresholds.low_activity_fraction,
            time_low_ms=config.thresholds.time_low_ms,
        )
        self.suggestions = SuggestionEngine(
            self.evaluator, self.genpipe, self.deck, id_factory=self._ids
        )

        self.input_log: list[dict] = []
        self.envelopes: list[Envelope] = []
        self.last_effects: list = []
        self._seq = 0
        self.out_of_view: set[str] = set()
        self._pending_modality: Optional[_PendingModality] = None
        self._swap_deltas: list[DeckDelta] = []

    # --- envelope plumbing ---------------------------------------------------

    def _emit(self, kind: str, payload: dict) -> Envelope:
        self._seq += 1
        env = Envelope(seq=self._seq, kind=kind, payload=payload, t_ms=self.now_ms)
        self.envelopes.append(env)
        return env

    def _log_input(self, kind: str, payload: dict) -> None:
        self.input_log.append({"n": len(self.input_log) + 1, "kind": kind, "payload": payload})

    # --- input: clock -----------------------------------------------------------

    def advance(self, t_ms: int, _log: bool = True) -> list[Envelope]:
        """Move the session clock forward; commits debounced rebinds and
        runs suggestion triggers."""
        if _log:
            self._log_input("advance", {"t_ms": t_ms})
        before = len(self.envelopes)
        self.now_ms = max(self.now_ms, t_ms)
        self.started = True
        self.activity.start()

        self._expire_fusion_buffer()

        for event in self.monitor.tick(self.now_ms):
            swap_delta = self._swap_deltas.pop(0) if self._swap_deltas else None
            record = self.db.get(event.new_record_id) if event.new_record_id else None
            self._emit(
                "BindingEvent",
                {
                    **event.as_dict(),
                    "topic_label": record.topic_label if record else None,
                    "badge_slide": self._slide_of_region(event.region_id),
                },
            )
            if swap_delta is not None:
                self._emit("DeckDelta", swap_delta.as_dict())

        self._run_triggers()
        return self.envelopes[before:]

    def _slide_of_region(self, region_id: str) -> Optional[str]:
        try:
            slide, _ = self.deck.find_region(region_id)
            return slide.slide_id
        except TargetNotFound:
            return None

    def _run_triggers(self) -> None:
        for point in self.config.point_ids:
            if not self.db.point_records(point) or not self.deck.slides_for_point(point):
                continue
            signal = self.activity.activity_level(point, self.now_ms)
            if not self.triggers.check(signal):
                continue
            try:
                built = self.suggestions.build_suggestions(point)
            except EngineError:
                continue
            if not built:
                continue
            self._emit(
                "SuggestionAvailable",
                {
                    "discussion_point": point,
                    "suggestions": [s.as_dict() for s in built],
                    "surfaced": self.suggestions.surfaced(),
                },
            )
            for s in built:
                if s.target_slide in self.out_of_view:
                    self._emit(
                        "Toast",
                        {
                            "suggestion_id": s.suggestion_id,
                            "slide_id": s.target_slide,
                            "metric": s.metric.value,
                            "message": f"Suggested change ready for slide {s.target_slide}",
                        },
                    )

    # --- input: utterances ---------------------------------------------------------

    def ingest(self, payload: dict, _log: bool = True) -> list[Envelope]:
        """One transcript line: {"t_ms","group","q","text"[,"token_count"]}."""
        if _log:
            self._log_input("utterance", payload)
        u = UtteranceRecord(
            session_id=self.config.session_id,
            group_id=payload["group"],
            discussion_point=payload["q"],
            t_ms=int(payload["t_ms"]),
            text=payload["text"],
            token_count=int(payload.get("token_count", -1)),
        )
        self.advance(u.t_ms, _log=False)
        before = len(self.envelopes)

        effects = self.pipeline.ingest_utterance(u)
        self.last_effects = effects
        self.activity.note(u.discussion_point, u.group_id, u.t_ms)
        self.triggers.rearm(u.discussion_point)

        for effect in effects:
            delta = self.charts.apply_record(effect, now_ms=self.now_ms)
            if delta.empty:
                continue
            self.monitor.on_chart_delta(delta, self.now_ms)
            self.monitor.maintain_pregen(delta)
            snapshot = self.charts.snapshot(delta.chart_key)
            self._emit("ChartUpdate", {"delta": delta.as_dict(), "snapshot": snapshot.as_dict()})
        return self.envelopes[before:]

    # --- rebind machinery ------------------------------------------------------------

    def _build_rebind_block(self, chart_key: ChartKey, record_id: str) -> dict:
        record = self.db.get(record_id)
        if record is None:
            raise UnknownRecord(f"no record {record_id!r}")
        request = BlockRequest(
            discussion_point=chart_key[0],
            metric=None,
            topic_scope=record_id,
            content_type=REBIND_CONTENT_TYPE,
            origin="rebind",
        )
        return self.genpipe.generate_block(request, [record]).as_dict()

    def _audit_stub_text(self, chart_key: ChartKey, record_id: str) -> str:
        from classdeck.genpipe import stub_block_text

        record = self.db.get(record_id)
        request = BlockRequest(
            discussion_point=chart_key[0],
            metric=None,
            topic_scope=record_id,
            content_type=REBIND_CONTENT_TYPE,
            origin="rebind",
        )
        return stub_block_text(request, [record])

    def _install_swap(self, binding: SemanticBinding, block_dict: dict) -> None:
        block = block_from_dict(block_dict)
        delta = self.deck.apply_edit(
            PlaceBlock(
                slide_id=self.deck.find_region(binding.region_id)[0].slide_id,
                block=block,
                region_id=binding.region_id,
            ),
            user=False,  # auto-rebind swaps stay off the undo stack
        )
        self._swap_deltas.append(delta)

    # --- input: viewport ----------------------------------------------------------------

    def viewport(self, visible_slide_ids: list[str], _log: bool = True) -> None:
        if _log:
            self._log_input("viewport", {"visible": list(visible_slide_ids)})
        all_ids = {s.slide_id for s in self.deck.slides}
        self.out_of_view = all_ids - set(visible_slide_ids)

    # --- input: deck edits -----------------------------------------------------------------

    _EDITS = {
        "set_layout": lambda p: SetLayout(slide_id=p["slide_id"], layout=Layout(p["layout"])),
        "edit_text": lambda p: EditText(region_id=p["region_id"], text=p["text"]),
        "delete_block": lambda p: DeleteBlock(region_id=p["region_id"]),
        "reorder_slides": lambda p: ReorderSlides(order=tuple(p["order"])),
    }

    def edit(self, payload: dict, _log: bool = True) -> list[Envelope]:
        if _log:
            self._log_input("edit", payload)
        before = len(self.envelopes)
        kind = payload.get("edit")
        maker = self._EDITS.get(kind)
        if maker is None:
            raise ProtocolViolation(f"unknown edit kind {kind!r}")
        edit = maker(payload)
        delta = self.deck.apply_edit(edit, user=True)
        if isinstance(edit, DeleteBlock):
            removed = self.bindings.remove_region(edit.region_id)
            if removed is not None:
                _, region = self.deck.find_region(edit.region_id)
                region.binding_id = None
        self._emit("DeckDelta", delta.as_dict())
        return self.envelopes[before:]

    def history(self, direction: str, _log: bool = True) -> list[Envelope]:
        if _log:
            self._log_input("history", {"direction": direction})
        before = len(self.envelopes)
        delta = self.deck.history_step(direction)
        if delta is not None:
            self._reconcile_bindings()
            self._emit("DeckDelta", delta.as_dict())
        return self.envelopes[before:]

    def _reconcile_bindings(self) -> None:
        """Undo/redo can remove or restore bound regions; keep the binding
        graph total: every live binding has a region and vice versa."""
        live_regions = {r.region_id for s in self.deck.slides for r in s.regions}
        for binding in list(self.bindings.bindings.values()):
            if binding.region_id not in live_regions:
                self.bindings.remove_region(binding.region_id)
                self._binding_graveyard[binding.region_id] = binding
        for slide in self.deck.slides:
            for region in slide.regions:
                current = self.bindings.for_region(region.region_id)
                if current is not None:
                    region.binding_id = current.binding_id
                    continue
                buried = self._binding_graveyard.pop(region.region_id, None)
                if buried is not None:
                    self.bindings.bindings[buried.binding_id] = buried
                    self.bindings._by_region[buried.region_id] = buried.binding_id
                    region.binding_id = buried.binding_id
                else:
                    region.binding_id = None

    # --- input: bindings ----------------------------------------------------------------------

    def toggle_binding(self, binding_id: str, _log: bool = True) -> list[Envelope]:
        if _log:
            self._log_input("toggle_binding", {"binding_id": binding_id})
        before = len(self.envelopes)
        binding = self.bindings.toggle_kind(binding_id, self.charts)
        if binding.is_frequency_based:
            self.monitor.seed_chart(binding.chart_key)
        self._emit("BindingEvent", {
            "kind": "toggled",
            "binding_id": binding.binding_id,
            "old_record_id": binding.last_resolved[0],
            "new_record_id": binding.last_resolved[0],
            "region_id": binding.region_id,
            "swapped_from_cache": False,
            "binding": binding.as_dict(),
            "topic_label": self._label_of(binding.last_resolved[0]),
            "badge_slide": self._slide_of_region(binding.region_id),
        })
        return self.envelopes[before:]

    def _label_of(self, record_id: Optional[str]) -> Optional[str]:
        record = self.db.get(record_id) if record_id else None
        return record.topic_label if record else None

    # --- input: suggestions --------------------------------------------------------------------

    def resolve_suggestion(
        self, suggestion_id: str, action: str, edited_text: str = "", _log: bool = True
    ) -> list[Envelope]:
        if _log:
            self._log_input(
                "resolve_suggestion",
                {"suggestion_id": suggestion_id, "action": action, "edited_text": edited_text},
            )
        before = len(self.envelopes)
        try:
            resolution = self.suggestions.resolve(suggestion_id, action, edited_text)
        except SuggestionStale:
            # Stale diff forces a refresh; surface the updated suggestion.
            self.suggestions.resolve(suggestion_id, "refresh")
            refreshed = self.suggestions.suggestions[suggestion_id]
            self._emit(
                "SuggestionResolved",
                {
                    "suggestion_id": suggestion_id,
                    "action": action,
                    "state": "refreshed",
                    "stale": True,
                    "suggestion": refreshed.as_dict(),
                    "surfaced": self.suggestions.surfaced(),
                },
            )
            return self.envelopes[before:]
        payload = {
            "suggestion_id": resolution.suggestion_id,
            "action": resolution.action,
            "state": resolution.state,
            "stale": False,
            "surfaced": self.suggestions.surfaced(),
        }
        if resolution.refreshed is not None:
            payload["suggestion"] = resolution.refreshed
        self._emit("SuggestionResolved", payload)
        if resolution.deck_delta is not None:
            self._emit("DeckDelta", resolution.deck_delta)
        return self.envelopes[before:]

    # --- input: multimodal commands ----------------------------------------------------------------

    def handle_command(self, payload: dict, _log: bool = True) -> list[Envelope]:
        """A command message: voice text and/or a stroke group with scene."""
        if _log:
            self._log_input("command", payload)
        before = len(self.envelopes)
        req_id = payload.get("req_id", "")
        point = payload.get("point", "") or self._default_point()

        voice = cmd.parse_voice(payload["voice"]) if payload.get("voice") else None
        gesture = None
        sketch_attempted = payload.get("strokes") is not None
        if sketch_attempted:
            scene = _scene_from_dict(payload.get("scene", {}))
            strokes = [
                cmd.Stroke(points=tuple((p[0], p[1], int(p[2])) for p in s))
                for s in payload["strokes"]
            ]
            gesture = cmd.recognize_gesture(strokes, scene)
            if gesture.kind is cmd.GestureKind.NONE and voice is None:
                self._emit("CommandResult", {"req_id": req_id, "ok": True, "action": "noop"})
                return self.envelopes[before:]

        pending = self._pending_modality
        window = self.config.thresholds.fusion_window_ms
        if pending is not None and self.now_ms - pending.t_ms > window:
            self._expire_fusion_buffer()
            pending = None

        if pending is not None:
            gesture = gesture if gesture and gesture.kind is not cmd.GestureKind.NONE else pending.gesture
            voice = voice or pending.voice
            req_id = req_id or pending.req_id
            point = point or pending.point
            self._pending_modality = None

        try:
            if voice is None and gesture is not None:
                if gesture.kind in cmd.LAYOUT_GESTURES:
                    plan = cmd.fuse(gesture, None)
                else:
                    # Selection without a verb: hold for the voice half.
                    self._pending_modality = _PendingModality(
                        t_ms=self.now_ms, gesture=gesture, req_id=req_id, point=point
                    )
                    self._emit("CommandResult", {
                        "req_id": req_id, "ok": True, "action": "pending",
                        "detail": "selection buffered awaiting voice",
                    })
                    return self.envelopes[before:]
            elif (
                voice is not None
                and gesture is None
                and not sketch_attempted
                and self._voice_needs_gesture(voice)
            ):
                self._pending_modality = _PendingModality(
                    t_ms=self.now_ms, voice=voice, req_id=req_id, point=point
                )
                self._emit("CommandResult", {
                    "req_id": req_id, "ok": True, "action": "pending",
                    "detail": "voice buffered awaiting sketch target",
                })
                return self.envelopes[before:]
            else:
                plan = cmd.fuse(gesture, voice)

            if plan is None:
                self._emit("CommandResult", {"req_id": req_id, "ok": True, "action": "noop"})
                return self.envelopes[before:]
            result = self._execute_plan(plan, point)
        except EngineError as exc:
            self._emit(
                "Error",
                {"req_id": req_id, "code": exc.code, "message": str(exc), **exc.details},
            )
            return self.envelopes[before:]
        self._emit("CommandResult", {
            "req_id": req_id, "ok": True,
            "voice_text": voice.text if voice else "",
            **result,
        })
        return self.envelopes[before:]

    def _voice_needs_gesture(self, voice: cmd.VoiceCommand) -> bool:
        if voice.deictic_slots > 0:
            return True
        return voice.intent in (cmd.Intent.FIND_MATERIAL, cmd.Intent.REWRITE)

    def _expire_fusion_buffer(self) -> None:
        pending = self._pending_modality
        if pending is None:
            return
        if self.now_ms - pending.t_ms <= self.config.thresholds.fusion_window_ms:
            return
        self._pending_modality = None
        if pending.voice is not None:
            self._emit(
                "Error",
                {
                    "req_id": pending.req_id,
                    "code": "UnresolvedDeixis",
                    "message": f"no sketch arrived for {pending.voice.text!r}",
                },
            )
        # A lone expired selection gesture is dropped silently.

    def _default_point(self) -> str:
        # Latest point with any data, else the first configured one.
        with_data = [p for p in self.config.point_ids if self.db.point_records(p)]
        return with_data[-1] if with_data else self.config.point_ids[0]

    # --- command execution --------------------------------------------------------

    def _execute_plan(self, plan: cmd.CommandPlan, point: str) -> dict:
        if plan.action == "set_layout":
            delta = self.deck.apply_edit(SetLayout(slide_id=plan.slide_id, layout=plan.layout))
            self._emit("DeckDelta", delta.as_dict())
            return {"action": "set_layout", "slide_id": plan.slide_id, "layout": plan.layout.value}

        if plan.action == "create_rank_slide":
            return self._create_rank_slide(plan, point)

        if plan.action == "create_select_slide":
            return self._create_select_slide(plan, point)

        if plan.action == "rewrite_block":
            return self._rewrite_block(plan, point)

        if plan.action == "find_material":
            return self._find_material(plan)

        raise ProtocolViolation(f"unknown plan action {plan.action!r}")

    def _create_rank_slide(self, plan: cmd.CommandPlan, point: str) -> dict:
        dimension = plan.dimension or Dimension.KEY_DISCUSSION_THEMES
        chart_key: ChartKey = (point, dimension)
        specs: list[RankSpec] = []
        for ref in plan.rank_refs:
            if plan.comparison or ref.count == 1:
                specs.append(RankSpec(ref.origin, 1))
            else:
                specs.extend(RankSpec(ref.origin, i) for i in range(1, ref.count + 1))
        layout = Layout.SIDE_BY_SIDE if plan.comparison else Layout.BULLETS
        region_plan = [0, 1] if plan.comparison else len(specs)

        deltas = []
        slide_id, delta = self.deck.create_slide(point, layout, region_plan, user=False)
        deltas.append(delta)
        slide = self.deck.slide(slide_id)
        resolved_records = []
        for region, spec in zip(slide.regions, specs):
            binding = self.bindings.create(region.region_id, chart_key, FrequencyBased(spec))
            region.binding_id = binding.binding_id
            record_id = self.monitor.initial_resolution(binding)
            resolved_records.append(record_id)
        self.monitor.seed_chart(chart_key)

        for region, record_id, other in zip(
            slide.regions, resolved_records, reversed(resolved_records)
        ):
            if record_id is None:
                continue
            records = [self.db.get(record_id)]
            if plan.comparison and other and other != record_id:
                records.append(self.db.get(other))
            request = BlockRequest(
                discussion_point=point,
                topic_scope=record_id,
                content_type=plan.content_type or ContentType.COMMENTARY,
                slide_context=self._slide_context(slide_id),
                origin="multimodal",
            )
            block = self.genpipe.generate_block(request, records)
            deltas.append(
                self.deck.apply_edit(
                    PlaceBlock(slide_id=slide_id, block=block, region_id=region.region_id),
                    user=False,
                )
            )
        merged = self.deck.push_user(deltas)
        self._emit("DeckDelta", merged.as_dict())
        self._emit_binding_snapshot(slide_id)
        return {"action": "create_slide", "slide_id": slide_id, "layout": layout.value}

    def _create_select_slide(self, plan: cmd.CommandPlan, point: str) -> dict:
        point = plan.chart_point or point
        records = []
        for rid in plan.record_ids:
            record = self.db.get(rid)
            if record is None:
                raise UnknownRecord(f"no record {rid!r}")
            records.append(record)
        comparison = plan.comparison and len(records) >= 2
        layout = Layout.SIDE_BY_SIDE if comparison else Layout.BULLETS
        region_plan = [0, 1] if comparison else len(records)

        deltas = []
        slide_id, delta = self.deck.create_slide(point, layout, region_plan, user=False)
        deltas.append(delta)
        slide = self.deck.slide(slide_id)
        for i, (region, record) in enumerate(zip(slide.regions, records)):
            binding = self.bindings.create(
                region.region_id, record.chart_key, ContentBased(record.record_id)
            )
            region.binding_id = binding.binding_id
            self.monitor.initial_resolution(binding)
            sources = [record]
            if comparison:
                sources.append(records[1 - i])
            request = BlockRequest(
                discussion_point=record.discussion_point,
                topic_scope=record.record_id,
                content_type=plan.content_type or ContentType.COMMENTARY,
                slide_context=self._slide_context(slide_id),
                origin="multimodal",
            )
            block = self.genpipe.generate_block(request, sources)
            deltas.append(
                self.deck.apply_edit(
                    PlaceBlock(slide_id=slide_id, block=block, region_id=region.region_id),
                    user=False,
                )
            )
        merged = self.deck.push_user(deltas)
        self._emit("DeckDelta", merged.as_dict())
        self._emit_binding_snapshot(slide_id)
        return {"action": "create_slide", "slide_id": slide_id, "layout": layout.value}

    def _rewrite_block(self, plan: cmd.CommandPlan, point: str) -> dict:
        slide, region = self.deck.find_region(plan.region_id)
        if region.block is None:
            raise TargetNotFound(f"region {plan.region_id!r} holds no block")
        source = region.block.source_record_ids[0]
        record = self.db.get(source)
        if record is None:
            raise UnknownRecord(f"source record {source!r} vanished")
        request = BlockRequest(
            discussion_point=record.discussion_point,
            topic_scope=source,
            content_type=plan.content_type or ContentType.COMMENTARY,
            slide_context=self._slide_context(slide.slide_id),
            origin="multimodal",
        )
        block = self.genpipe.generate_block(request, [record])
        delta = self.deck.apply_edit(
            PlaceBlock(slide_id=slide.slide_id, block=block, region_id=region.region_id),
            user=True,
        )
        self._emit("DeckDelta", delta.as_dict())
        return {"action": "rewrite_block", "region_id": region.region_id}

    def _find_material(self, plan: cmd.CommandPlan) -> dict:
        slide = self.deck.slide(plan.slide_id)
        blocks = [r.block for r in slide.regions if r.block is not None]
        slide_text = " ".join(b.text for b in blocks)
        passages = cmd.load_corpus(self.config.material_dir)
        passage, score = cmd.retrieve_passage(
            slide_text,
            plan.query,
            passages,
            similarity_floor=self.config.thresholds.material_similarity_floor,
            embedding_dim=self.config.thresholds.embedding_dim,
        )
        sources = blocks[0].source_record_ids if blocks else ()
        if not sources:
            raise NoEligibleRecords("slide has no cited records to attach material to")
        block = SemanticBlock(
            block_id=self._ids("b"),
            source_record_ids=sources,
            content_type=ContentType.CASE_STUDY,
            text=f"Case study ({passage.document}): {passage.text}",
            provenance=Provenance.USER_COMMAND,
        )
        region_id, delta = self.deck.position_block(plan.slide_id, block, user=True)
        self._emit("DeckDelta", delta.as_dict())
        return {
            "action": "find_material",
            "slide_id": plan.slide_id,
            "region_id": region_id,
            "document": passage.document,
            "similarity": score,
        }

    def _slide_context(self, slide_id: str) -> SlideContext:
        slide = self.deck.slide(slide_id)
        return SlideContext(
            slide_id=slide_id,
            layout=slide.layout.value,
            block_texts=tuple(r.block.text for r in slide.regions if r.block),
        )

    def _emit_binding_snapshot(self, slide_id: str) -> None:
        slide = self.deck.slide(slide_id)
        for region in slide.regions:
            binding = self.bindings.for_region(region.region_id)
            if binding is None:
                continue
            self._emit("BindingEvent", {
                "kind": "created",
                "binding_id": binding.binding_id,
                "old_record_id": None,
                "new_record_id": binding.last_resolved[0],
                "region_id": region.region_id,
                "swapped_from_cache": False,
                "binding": binding.as_dict(),
                "topic_label": self._label_of(binding.last_resolved[0]),
                "badge_slide": slide_id,
            })

    # --- input fold (persistence/restore) ----------------------------------------------

    def apply_input(self, entry: dict) -> None:
        kind, payload = entry["kind"], entry["payload"]
        if kind == "utterance":
            self.ingest(payload, _log=False)
        elif kind == "advance":
            self.advance(payload["t_ms"], _log=False)
        elif kind == "edit":
            self.edit(payload, _log=False)
        elif kind == "history":
            self.history(payload["direction"], _log=False)
        elif kind == "command":
            self.handle_command(payload, _log=False)
        elif kind == "resolve_suggestion":
            self.resolve_suggestion(
                payload["suggestion_id"], payload["action"], payload.get("edited_text", ""),
                _log=False,
            )
        elif kind == "toggle_binding":
            self.toggle_binding(payload["binding_id"], _log=False)
        elif kind == "viewport":
            self.viewport(payload["visible"], _log=False)
        elif kind == "close":
            self.close(_log=False)
        else:
            raise ProtocolViolation(f"unknown input kind {kind!r}")
        self.input_log.append(entry)

    def close(self, _log: bool = True) -> None:
        if _log:
            self._log_input("close", {})
        self.closed = True
        self.pipeline.close()

    # --- snapshots and integrity -----------------------------------------------------

    def snapshot_payload(self) -> dict:
        open_suggestions = {
            sid: s.as_dict() for sid, s in sorted(self.suggestions.suggestions.items()) if s.open
        }
        bindings = {}
        for bid, binding in sorted(self.bindings.bindings.items()):
            entry = binding.as_dict()
            entry["topic_label"] = self._label_of(binding.last_resolved[0])
            bindings[bid] = entry
        return {
            "session_id": self.config.session_id,
            "now_ms": self.now_ms,
            "seq": self._seq,
            "charts": self.charts.as_dict(),
            "deck": self.deck.as_dict(),
            "bindings": bindings,
            "suggestions": open_suggestions,
            "surfaced": self.suggestions.surfaced(),
        }

    def state_digest(self) -> str:
        state = {
            "analytics": self.db.as_dict(),
            "charts": self.charts.as_dict(),
            "deck": self.deck.as_dict(),
            "bindings": self.bindings.as_dict(),
            "suggestions": {
                sid: s.as_dict() for sid, s in sorted(self.suggestions.suggestions.items())
            },
            "now_ms": self.now_ms,
        }
        blob = json.dumps(state, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def verify_integrity(self) -> list[str]:
        """Referential-integrity sweep; returns human-readable violations."""
        problems = []
        for slide in self.deck.slides:
            for region in slide.regions:
                if region.block is not None:
                    for rid in region.block.source_record_ids:
                        if self.db.get(rid) is None:
                            problems.append(
                                f"block {region.block.block_id} cites missing record {rid}"
                            )
                if region.binding_id and self.bindings.bindings.get(region.binding_id) is None:
                    problems.append(f"region {region.region_id} names missing binding")
        live = {r.region_id for s in self.deck.slides for r in s.regions}
        for binding in self.bindings.bindings.values():
            if binding.region_id not in live:
                problems.append(f"binding {binding.binding_id} targets missing region")
        return problems

    def export_deck(self) -> dict:
        def resolve(record_id: str):
            record = self.db.get(record_id)
            return (record.topic_label, record.frequency) if record else None

        def chart_table(slide) -> list[tuple[str, int]]:
            rows = []
            for region in slide.regions:
                binding = self.bindings.for_region(region.region_id)
                if binding is None or binding.last_resolved[0] is None:
                    continue
                record = self.db.get(binding.last_resolved[0])
                if record is not None:
                    rows.append((record.topic_label, record.frequency))
            return rows

        return self.deck.export(resolve_record=resolve, chart_table=chart_table)


def _scene_from_dict(data: dict) -> cmd.CanvasScene:
    elements = []
    for e in data.get("elements", []):
        elements.append(
            cmd.SceneElement(
                kind=e["kind"],
                ref=e["ref"],
                bbox=cmd.BBox(*e["bbox"]),
                chart_point=e.get("chart_point", ""),
                chart_dimension=e.get("chart_dimension", ""),
            )
        )
    return cmd.CanvasScene(elements=tuple(elements))
