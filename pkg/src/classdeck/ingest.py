"""Transcript analysis pipeline.

Raw utterances come in; deduplicated, attributed analytics records come out.
Each qualifying utterance yields one or more topic candidates:

* a discussion-theme candidate embedding the whole utterance,
* one tech-topic candidate per matched CS keyword,
* one ethical-concept candidate per matched ethics keyword,
* one frameworks candidate per matched named framework,
* one analysis-dimension candidate per asserted discourse flag.

Candidates merge into an existing record of the same chart when cosine
similarity clears the duplicate threshold, otherwise they create a new one.
The whole fold is deterministic, which is what makes replay and the batch
oracle in :mod:`classdeck.oracle` meaningful.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from classdeck import textutil
from classdeck.config import SessionConfig
from classdeck.errors import SessionClosed, UnknownDiscussionPoint, UnknownGroup
from classdeck.keywords import KeywordSet


class Dimension(str, enum.Enum):
    KEY_DISCUSSION_THEMES = "KeyDiscussionThemes"
    ETHICAL_CONCEPTS = "EthicalConcepts"
    TECH_TOPICS = "TechTopics"
    ETHICAL_FRAMEWORKS_USED = "EthicalFrameworksUsed"
    DIMENSIONS_OF_ANALYSIS = "DimensionsOfAnalysis"


DEFAULT_VISIBLE_DIMENSIONS = frozenset(
    {Dimension.KEY_DISCUSSION_THEMES, Dimension.ETHICAL_CONCEPTS, Dimension.TECH_TOPICS}
)

ChartKey = tuple[str, Dimension]


@dataclass(frozen=True)
class UtteranceRecord:
    session_id: str
    group_id: str
    discussion_point: str
    t_ms: int
    text: str
    token_count: int = -1  # -1 means "derive from text"

    def __post_init__(self):
        if self.token_count < 0:
            object.__setattr__(self, "token_count", textutil.token_count(self.text))


@dataclass(frozen=True)
class DiscourseAttrs:
    is_new_idea: bool = False
    is_agreement: bool = False
    is_challenge: bool = False
    is_evidence: bool = False
    is_extension: bool = False

    def union(self, other: "DiscourseAttrs") -> "DiscourseAttrs":
        return DiscourseAttrs(
            is_new_idea=self.is_new_idea or other.is_new_idea,
            is_agreement=self.is_agreement or other.is_agreement,
            is_challenge=self.is_challenge or other.is_challenge,
            is_evidence=self.is_evidence or other.is_evidence,
            is_extension=self.is_extension or other.is_extension,
        )

    def as_dict(self) -> dict[str, bool]:
        return {
            "is_new_idea": self.is_new_idea,
            "is_agreement": self.is_agreement,
            "is_challenge": self.is_challenge,
            "is_evidence": self.is_evidence,
            "is_extension": self.is_extension,
        }


@dataclass(eq=False)
class AnalyticsRecord:
    record_id: str
    discussion_point: str
    dimension: Dimension
    topic_label: str
    embedding: np.ndarray
    frequency: int
    cumulative_time_ms: int
    contributing_groups: set[str]
    attrs: DiscourseAttrs
    cs_keywords: set[str]
    ethics_keywords: set[str]
    first_seen_ms: int

    @property
    def chart_key(self) -> ChartKey:
        return (self.discussion_point, self.dimension)

    def as_dict(self) -> dict:
        """Canonical JSON-safe form, used for digests and oracle comparison."""
        return {
            "record_id": self.record_id,
            "discussion_point": self.discussion_point,
            "dimension": self.dimension.value,
            "topic_label": self.topic_label,
            "frequency": self.frequency,
            "cumulative_time_ms": self.cumulative_time_ms,
            "contributing_groups": sorted(self.contributing_groups),
            "attrs": self.attrs.as_dict(),
            "cs_keywords": sorted(self.cs_keywords),
            "ethics_keywords": sorted(self.ethics_keywords),
            "first_seen_ms": self.first_seen_ms,
        }


@dataclass(frozen=True)
class AnalyticsEffect:
    """One pipeline outcome: a record created or merged into, or a discard."""

    kind: str  # "created" | "merged" | "discarded"
    record_id: Optional[str]
    chart_key: Optional[ChartKey]
    group_id: str
    discussion_point: str
    t_ms: int
    old_frequency: int = 0
    new_frequency: int = 0


# --- dedup ------------------------------------------------------------------


@dataclass(frozen=True)
class Match:
    record_id: str


class New:
    """Sentinel result: no existing record is close enough."""


def dedup_topic(
    candidate_embedding: np.ndarray,
    existing: list[AnalyticsRecord],
    dup_threshold: float = 0.85,
) -> Match | type[New]:
    """Pick the argmax-cosine record if it clears the threshold.

    Ties on cosine break toward the earliest ``first_seen_ms``; callers
    scope ``existing`` to a single (discussion point, dimension) chart.
    """
    best: Optional[AnalyticsRecord] = None
    best_cos = -1.0
    for record in existing:
        cos = textutil.cosine(candidate_embedding, record.embedding)
        if cos > best_cos or (cos == best_cos and best is not None and record.first_seen_ms < best.first_seen_ms):
            best, best_cos = record, cos
    if best is not None and best_cos >= dup_threshold:
        return Match(best.record_id)
    return New


# --- discourse classification -----------------------------------------------

# Cue-rule table for the deterministic stub classifier.
CUE_RULES: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("is_agreement", ("agree", "same", "exactly")),
    ("is_challenge", ("but", "however", "what about")),
    ("is_evidence", ("for example", "evidence", "study")),
    ("is_extension", ("building on", "adding to")),
)

DiscourseClassifier = Callable[[str, bool], DiscourseAttrs]


def classify_discourse(text: str, is_new_topic: bool) -> DiscourseAttrs:
    """Deterministic cue-rule stub for discourse attributes."""
    flags = {"is_new_idea": is_new_topic}
    for attr, cues in CUE_RULES:
        flags[attr] = any(textutil.contains_phrase(text, cue) for cue in cues)
    return DiscourseAttrs(**flags)


def tag_keywords(text: str, cs: KeywordSet, ethics: KeywordSet) -> tuple[set[str], set[str]]:
    """Case-insensitive whole-word keyword hits, reported as canonical sets."""
    return cs.match(text), ethics.match(text)


# --- analytics database -------------------------------------------------------

ATTR_TOPIC_LABELS = {
    "is_new_idea": "new ideas",
    "is_agreement": "agreement",
    "is_challenge": "challenges",
    "is_evidence": "evidence",
    "is_extension": "extensions",
}


class AnalyticsDB:
    """Record store with a per-chart index. Single logical writer."""

    def __init__(self):
        self.records: dict[str, AnalyticsRecord] = {}
        self._by_chart: dict[ChartKey, list[str]] = {}

    def add(self, record: AnalyticsRecord) -> None:
        self.records[record.record_id] = record
        self._by_chart.setdefault(record.chart_key, []).append(record.record_id)

    def get(self, record_id: str) -> Optional[AnalyticsRecord]:
        return self.records.get(record_id)

    def chart_records(self, chart_key: ChartKey) -> list[AnalyticsRecord]:
        return [self.records[rid] for rid in self._by_chart.get(chart_key, [])]

    def point_records(self, discussion_point: str) -> list[AnalyticsRecord]:
        return [r for r in self.records.values() if r.discussion_point == discussion_point]

    def chart_keys(self) -> list[ChartKey]:
        return list(self._by_chart)

    def as_dict(self) -> dict:
        return {rid: rec.as_dict() for rid, rec in sorted(self.records.items())}


@dataclass(frozen=True)
class TopicCandidate:
    dimension: Dimension
    label: str
    embed_text: str


def derive_candidates(
    text: str,
    cs_hits: set[str],
    ethics_hits: set[str],
    framework_hits: set[str],
    attrs_flags: list[str],
) -> list[TopicCandidate]:
    """Candidate list for one utterance, in deterministic emission order."""
    cands = [
        TopicCandidate(Dimension.KEY_DISCUSSION_THEMES, textutil.topic_label(text), text)
    ]
    for kw in sorted(cs_hits):
        cands.append(TopicCandidate(Dimension.TECH_TOPICS, kw, kw))
    for kw in sorted(ethics_hits):
        cands.append(TopicCandidate(Dimension.ETHICAL_CONCEPTS, kw, kw))
    for kw in sorted(framework_hits):
        cands.append(TopicCandidate(Dimension.ETHICAL_FRAMEWORKS_USED, kw, kw))
    for flag in attrs_flags:
        label = ATTR_TOPIC_LABELS[flag]
        cands.append(TopicCandidate(Dimension.DIMENSIONS_OF_ANALYSIS, label, label))
    return cands


class IngestPipeline:
    """Folds utterances into the analytics DB, one ordered queue consumer."""

    def __init__(
        self,
        config: SessionConfig,
        db: Optional[AnalyticsDB] = None,
        id_factory: Optional[Callable[[], str]] = None,
        classifier: DiscourseClassifier = classify_discourse,
        labeler: Callable[[str], str] = textutil.topic_label,
    ):
        self.config = config
        self.db = db if db is not None else AnalyticsDB()
        self.closed = False
        sets = config.load_keywords()
        self.cs_keywords = sets["cs"]
        self.ethics_keywords = sets["ethics"]
        self.framework_keywords = sets["frameworks"]
        self.classifier = classifier
        self.labeler = labeler
        self._next_id = id_factory or self._counter_ids()

    @staticmethod
    def _counter_ids():
        n = 0

        def make() -> str:
            nonlocal n
            n += 1
            return f"r{n}"

        return make

    def close(self) -> None:
        self.closed = True

    def ingest_utterance(self, u: UtteranceRecord) -> list[AnalyticsEffect]:
        if self.closed:
            raise SessionClosed(f"session {self.config.session_id} is closed")
        if u.group_id not in self.config.roster:
            raise UnknownGroup(f"group {u.group_id!r} not in roster")
        if u.discussion_point not in self.config.point_ids:
            raise UnknownDiscussionPoint(f"unknown discussion point {u.discussion_point!r}")

        if u.token_count < self.config.thresholds.min_tokens:
            return [
                AnalyticsEffect(
                    kind="discarded",
                    record_id=None,
                    chart_key=None,
                    group_id=u.group_id,
                    discussion_point=u.discussion_point,
                    t_ms=u.t_ms,
                )
            ]

        cs_hits, ethics_hits = tag_keywords(u.text, self.cs_keywords, self.ethics_keywords)
        framework_hits = self.framework_keywords.match(u.text)
        # Cue flags are utterance-level; is_new_idea is decided per candidate.
        cue_attrs = self.classifier(u.text, False)
        flag_order = [
            flag
            for flag in ("is_agreement", "is_challenge", "is_evidence", "is_extension")
            if getattr(cue_attrs, flag)
        ]

        effects = []
        for cand in derive_candidates(u.text, cs_hits, ethics_hits, framework_hits, flag_order):
            effects.append(self._apply_candidate(cand, u, cue_attrs, cs_hits, ethics_hits))
        return effects

    def _apply_candidate(
        self,
        cand: TopicCandidate,
        u: UtteranceRecord,
        cue_attrs: DiscourseAttrs,
        cs_hits: set[str],
        ethics_hits: set[str],
    ) -> AnalyticsEffect:
        chart_key = (u.discussion_point, cand.dimension)
        embedding = textutil.embed(cand.embed_text, self.config.thresholds.embedding_dim)
        accrual = u.token_count * self.config.thresholds.ms_per_token
        outcome = dedup_topic(
            embedding, self.db.chart_records(chart_key), self.config.thresholds.dup_threshold
        )
        if isinstance(outcome, Match):
            record = self.db.records[outcome.record_id]
            old_freq = record.frequency
            record.frequency += 1
            record.cumulative_time_ms += accrual
            record.contributing_groups.add(u.group_id)
            record.attrs = record.attrs.union(replace(cue_attrs, is_new_idea=False))
            record.cs_keywords |= cs_hits
            record.ethics_keywords |= ethics_hits
            return AnalyticsEffect(
                kind="merged",
                record_id=record.record_id,
                chart_key=chart_key,
                group_id=u.group_id,
                discussion_point=u.discussion_point,
                t_ms=u.t_ms,
                old_frequency=old_freq,
                new_frequency=record.frequency,
            )

        label = cand.label if cand.dimension != Dimension.KEY_DISCUSSION_THEMES else self.labeler(u.text)
        record = AnalyticsRecord(
            record_id=self._next_id(),
            discussion_point=u.discussion_point,
            dimension=cand.dimension,
            topic_label=label,
            embedding=embedding,
            frequency=1,
            cumulative_time_ms=accrual,
            contributing_groups={u.group_id},
            attrs=replace(cue_attrs, is_new_idea=True),
            cs_keywords=set(cs_hits),
            ethics_keywords=set(ethics_hits),
            first_seen_ms=u.t_ms,
        )
        self.db.add(record)
        return AnalyticsEffect(
            kind="created",
            record_id=record.record_id,
            chart_key=chart_key,
            group_id=u.group_id,
            discussion_point=u.discussion_point,
            t_ms=u.t_ms,
            old_frequency=0,
            new_frequency=1,
        )
