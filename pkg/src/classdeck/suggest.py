"""Metric evaluation and the suggestion engine.

Deck and slide scores are coverage ratios over the analytics for one
discussion point, chosen so that adding a covering block can only raise
them. The engine wakes when discussion activity dies down (or time runs
short), targets the worst metric's worst slide, and proposes additive
blocks that the instructor applies, ignores, refreshes, or modifies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from difflib import SequenceMatcher
from typing import Optional

from classdeck.analytics import ActivitySignal
from classdeck.deck import ContentType, Deck, PlaceBlock, Provenance, SemanticBlock, Slide
from classdeck.errors import (
    EmptyAnalytics,
    NoEligibleRecords,
    NothingToSuggest,
    ProviderError,
    SuggestionStale,
    TargetNotFound,
)
from classdeck.genpipe import (
    METRIC_ORDER,
    BlockRequest,
    GenerationPipeline,
    Metric,
    SlideContext,
    keyword_used,
    record_represented,
)
from classdeck.ingest import AnalyticsDB
from classdeck.keywords import KeywordSet
from classdeck.textutil import contains_phrase


@dataclass(frozen=True)
class MetricScores:
    deck: dict[Metric, float]
    per_slide: dict[Metric, dict[str, float]]

    def worst_metrics(self) -> list[Metric]:
        low = min(self.deck.values())
        return [m for m in METRIC_ORDER if self.deck[m] == low]

    def as_dict(self) -> dict:
        return {
            "deck": {m.value: s for m, s in self.deck.items()},
            "per_slide": {
                m.value: dict(sorted(scores.items())) for m, scores in self.per_slide.items()
            },
        }


class MetricEvaluator:
    """Coverage scores for one discussion point against the live deck."""

    def __init__(self, db: AnalyticsDB, roster_size: int, cs: KeywordSet, ethics: KeywordSet):
        self.db = db
        self.roster_size = roster_size
        self.cs = cs
        self.ethics = ethics

    def evaluate(self, deck: Deck, discussion_point: str) -> MetricScores:
        scope = self.db.point_records(discussion_point)
        if not scope:
            raise EmptyAnalytics(f"no analytics for {discussion_point!r}")
        slides = deck.slides_for_point(discussion_point)
        deck_scores = {
            metric: self._score(metric, scope, deck.blocks(), slides) for metric in METRIC_ORDER
        }
        per_slide = {
            metric: {
                s.slide_id: self._score(
                    metric, scope, [r.block for r in s.regions if r.block], [s]
                )
                for s in slides
            }
            for metric in METRIC_ORDER
        }
        return MetricScores(deck=deck_scores, per_slide=per_slide)

    def _score(self, metric: Metric, scope, blocks: list[SemanticBlock], slides: list[Slide]) -> float:
        if metric is Metric.CT:
            if not slides:
                return 0.0
            qualifying = sum(1 for s in slides if self._slide_has_ct(s))
            return qualifying / len(slides)
        if metric is Metric.OD:
            represented = sum(1 for r in scope if record_represented(r, blocks))
            return represented / len(scope)
        if metric is Metric.CE:
            cited: set[str] = set()
            by_id = {r.record_id: r for r in scope}
            for block in blocks:
                for rid in block.source_record_ids:
                    if rid in by_id:
                        cited |= by_id[rid].contributing_groups
            return len(cited) / self.roster_size
        keyword_field = "cs_keywords" if metric is Metric.CR else "ethics_keywords"
        relevant: dict[str, list] = {}
        for r in scope:
            for k in getattr(r, keyword_field):
                relevant.setdefault(k, []).append(r)
        if not relevant:
            return 1.0
        covered = sum(1 for k, recs in relevant.items() if keyword_used(k, recs, blocks))
        return covered / len(relevant)

    def _slide_has_ct(self, slide: Slide) -> bool:
        for region in slide.regions:
            block = region.block
            if block is None:
                continue
            if block.content_type is ContentType.CLASS_QUESTION:
                return True
            for rid in block.source_record_ids:
                rec = self.db.get(rid)
                if rec is not None and (rec.attrs.is_evidence or rec.attrs.is_challenge):
                    return True
        return False


# --- triggers -----------------------------------------------------------------


class TriggerCondition(str, enum.Enum):
    LOW_ACTIVITY = "low_activity"
    TIME_LOW = "time_low"


@dataclass
class TriggerState:
    """Edge-triggered firing: once per condition per point until new data."""

    low_activity_fraction: float = 0.10
    time_low_ms: int = 120_000
    _fired: dict[str, set[TriggerCondition]] = field(default_factory=dict)

    def rearm(self, discussion_point: str) -> None:
        self._fired.pop(discussion_point, None)

    def check(self, signal: ActivitySignal) -> list[TriggerCondition]:
        fired = self._fired.setdefault(signal.discussion_point, set())
        newly: list[TriggerCondition] = []
        if signal.active_group_fraction < self.low_activity_fraction:
            if TriggerCondition.LOW_ACTIVITY not in fired:
                fired.add(TriggerCondition.LOW_ACTIVITY)
                newly.append(TriggerCondition.LOW_ACTIVITY)
        if signal.remaining_ms < self.time_low_ms:
            if TriggerCondition.TIME_LOW not in fired:
                fired.add(TriggerCondition.TIME_LOW)
                newly.append(TriggerCondition.TIME_LOW)
        return newly

    def trigger_check(self, signal: ActivitySignal) -> bool:
        return bool(self.check(signal))


# --- suggestions -----------------------------------------------------------------


def text_diff(old: str, new: str) -> list[list]:
    """Word-level opcode diff, JSON-friendly: [op, old_words, new_words]."""
    a, b = old.split(), new.split()
    out = []
    for op, i1, i2, j1, j2 in SequenceMatcher(a=a, b=b, autojunk=False).get_opcodes():
        out.append([op, " ".join(a[i1:i2]), " ".join(b[j1:j2])])
    return out


@dataclass
class Suggestion:
    suggestion_id: str
    discussion_point: str
    target_slide: str
    target_region: Optional[str]  # None: apply appends a region
    metric: Metric
    proposed_block: SemanticBlock
    base_text: str  # target region's block text when the diff was computed
    diff: list[list]
    rank: int
    deficit: float
    state: str = "pending"  # pending | applied | ignored | refreshed | modified

    @property
    def open(self) -> bool:
        return self.state in ("pending", "refreshed")

    @property
    def dedup_key(self) -> tuple[str, str, str]:
        return (self.target_slide, self.metric.value, self.proposed_block.text)

    def as_dict(self) -> dict:
        return {
            "suggestion_id": self.suggestion_id,
            "discussion_point": self.discussion_point,
            "target_slide": self.target_slide,
            "target_region": self.target_region,
            "metric": self.metric.value,
            "proposed_block": self.proposed_block.as_dict(),
            "base_text": self.base_text,
            "diff": self.diff,
            "rank": self.rank,
            "deficit": self.deficit,
            "state": self.state,
        }


@dataclass(frozen=True)
class SuggestionResolution:
    suggestion_id: str
    action: str
    state: str
    deck_delta: Optional[dict] = None
    refreshed: Optional[dict] = None


class SuggestionEngine:
    def __init__(
        self,
        evaluator: MetricEvaluator,
        genpipe: GenerationPipeline,
        deck: Deck,
        id_factory,
    ):
        self.evaluator = evaluator
        self.genpipe = genpipe
        self.deck = deck
        self._ids = id_factory
        self.suggestions: dict[str, Suggestion] = {}
        self._ignored_keys: set[tuple[str, str, str]] = set()

    # --- construction ---------------------------------------------------------

    def content_type_for(self, metric: Metric) -> ContentType:
        # A question qualifies a slide for CT regardless of record attrs.
        return ContentType.CLASS_QUESTION if metric is Metric.CT else ContentType.COMMENTARY

    def build_suggestions(self, discussion_point: str) -> list[Suggestion]:
        scores = self.evaluator.evaluate(self.deck, discussion_point)
        if all(score >= 1.0 for score in scores.deck.values()):
            raise NothingToSuggest("deck fully covers every metric")
        slides = self.deck.slides_for_point(discussion_point)
        if not slides:
            return []

        built: list[Suggestion] = []
        for metric in scores.worst_metrics():
            target = self._worst_slide(scores, metric, slides)
            request = BlockRequest(
                discussion_point=discussion_point,
                metric=metric,
                content_type=self.content_type_for(metric),
                slide_context=SlideContext(
                    slide_id=target.slide_id,
                    layout=target.layout.value,
                    block_texts=tuple(r.block.text for r in target.regions if r.block),
                ),
                origin="suggestion_engine",
            )
            try:
                block = self.genpipe.run(request)
            except (NoEligibleRecords, ProviderError):
                continue  # metric has no eligible records right now
            region = next((r for r in target.regions if r.block is None), None)
            base_text = ""
            suggestion = Suggestion(
                suggestion_id=self._ids("sug"),
                discussion_point=discussion_point,
                target_slide=target.slide_id,
                target_region=region.region_id if region else None,
                metric=metric,
                proposed_block=block,
                base_text=base_text,
                diff=text_diff(base_text, block.text),
                rank=0,
                deficit=1.0 - scores.deck[metric],
            )
            if suggestion.dedup_key in self._ignored_keys:
                continue
            if any(
                s.open and s.dedup_key == suggestion.dedup_key for s in self.suggestions.values()
            ):
                continue
            built.append(suggestion)

        for s in built:
            self.suggestions[s.suggestion_id] = s
        self._rerank()
        return built

    def _worst_slide(self, scores: MetricScores, metric: Metric, slides: list[Slide]) -> Slide:
        slide_scores = scores.per_slide[metric]
        low = min(slide_scores[s.slide_id] for s in slides)
        return next(s for s in slides if slide_scores[s.slide_id] == low)

    def _rerank(self) -> None:
        open_suggestions = sorted(
            (s for s in self.suggestions.values() if s.open),
            key=lambda s: (-s.deficit, METRIC_ORDER.index(s.metric), s.suggestion_id),
        )
        for i, s in enumerate(open_suggestions, start=1):
            s.rank = i

    # --- surfacing --------------------------------------------------------------

    def surfaced(self) -> dict[str, dict]:
        """Per slide: the top-ranked open suggestion, the rest behind "+"."""
        by_slide: dict[str, list[Suggestion]] = {}
        for s in sorted(self.suggestions.values(), key=lambda s: s.rank):
            if s.open:
                by_slide.setdefault(s.target_slide, []).append(s)
        return {
            slide_id: {
                "visible": group[0].suggestion_id,
                "hidden": [s.suggestion_id for s in group[1:]],
            }
            for slide_id, group in by_slide.items()
        }

    # --- lifecycle ---------------------------------------------------------------

    def get_open(self, suggestion_id: str) -> Suggestion:
        s = self.suggestions.get(suggestion_id)
        if s is None or not s.open:
            raise TargetNotFound(f"no pending suggestion {suggestion_id!r}")
        return s

    def _current_target_text(self, s: Suggestion) -> str:
        if s.target_region is None:
            return ""
        _, region = self.deck.find_region(s.target_region)
        return region.block.text if region.block else ""

    def resolve(self, suggestion_id: str, action: str, edited_text: str = "") -> SuggestionResolution:
        s = self.get_open(suggestion_id)
        if action == "apply":
            self._ensure_fresh(s)
            delta = self.deck.apply_edit(
                PlaceBlock(slide_id=s.target_slide, block=s.proposed_block, region_id=s.target_region),
                user=True,
            )
            s.state = "applied"
            self._rerank()
            return SuggestionResolution(suggestion_id, action, s.state, deck_delta=delta.as_dict())
        if action == "ignore":
            s.state = "ignored"
            self._ignored_keys.add(s.dedup_key)
            self._rerank()
            return SuggestionResolution(suggestion_id, action, s.state)
        if action == "refresh":
            self._refresh(s)
            return SuggestionResolution(suggestion_id, action, s.state, refreshed=s.as_dict())
        if action == "modify":
            self._ensure_fresh(s)
            if not edited_text:
                raise TargetNotFound("modify requires edited text")
            block = replace(
                s.proposed_block,
                text=edited_text,
                provenance=Provenance.MANUAL_EDIT,
            )
            delta = self.deck.apply_edit(
                PlaceBlock(slide_id=s.target_slide, block=block, region_id=s.target_region),
                user=True,
            )
            s.state = "modified"
            self._rerank()
            return SuggestionResolution(suggestion_id, action, s.state, deck_delta=delta.as_dict())
        raise TargetNotFound(f"unknown suggestion action {action!r}")

    def _ensure_fresh(self, s: Suggestion) -> None:
        if self._current_target_text(s) != s.base_text:
            raise SuggestionStale(
                f"target block changed under suggestion {s.suggestion_id!r}", suggestion_id=s.suggestion_id
            )

    def _refresh(self, s: Suggestion) -> None:
        scores = self.evaluator.evaluate(self.deck, s.discussion_point)
        target = self.deck.slide(s.target_slide)
        request = BlockRequest(
            discussion_point=s.discussion_point,
            metric=s.metric,
            content_type=self.content_type_for(s.metric),
            slide_context=SlideContext(
                slide_id=target.slide_id,
                layout=target.layout.value,
                block_texts=tuple(r.block.text for r in target.regions if r.block),
            ),
            origin="suggestion_engine",
        )
        s.proposed_block = self.genpipe.run(request)
        region = next((r for r in target.regions if r.block is None), None)
        s.target_region = region.region_id if region else None
        s.base_text = self._current_target_text(s)
        s.diff = text_diff(s.base_text, s.proposed_block.text)
        s.deficit = 1.0 - scores.deck[s.metric]
        s.state = "refreshed"
        self._rerank()
