"""Semantic block generation pipeline.

A request names a debriefing metric (or none), the pipeline selects the
records that best serve it, and a provider turns them into a semantic block.
The shipped provider is a deterministic template so identical inputs always
produce identical text; an external HTTP provider can be swapped in per
session config.
"""

from __future__ import annotations

import enum
import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Optional, Sequence

from classdeck.analytics import rank_chart
from classdeck.config import ProviderSpec, Thresholds
from classdeck.deck import ContentType, Deck, Provenance, SemanticBlock
from classdeck.errors import NoEligibleRecords, ProviderError
from classdeck.ingest import AnalyticsDB, AnalyticsRecord
from classdeck.textutil import contains_phrase


class Metric(str, enum.Enum):
    CT = "CT"  # critical thinking
    OD = "OD"  # opinion diversity
    CE = "CE"  # class engagement
    CR = "CR"  # CS relevance
    ER = "ER"  # ethics relevance


METRIC_ORDER = (Metric.CT, Metric.OD, Metric.CE, Metric.CR, Metric.ER)


@dataclass(frozen=True)
class SlideContext:
    slide_id: str = ""
    layout: str = ""
    block_texts: tuple[str, ...] = ()


@dataclass(frozen=True)
class BlockRequest:
    discussion_point: str
    metric: Optional[Metric] = None
    topic_scope: Optional[str] = None
    content_type: ContentType = ContentType.COMMENTARY
    slide_context: SlideContext = field(default_factory=SlideContext)
    origin: str = "multimodal"  # multimodal | suggestion_engine | rebind

    def as_dict(self) -> dict:
        return {
            "discussion_point": self.discussion_point,
            "metric": self.metric.value if self.metric else None,
            "topic_scope": self.topic_scope,
            "content_type": self.content_type.value,
            "slide_context": {
                "slide_id": self.slide_context.slide_id,
                "layout": self.slide_context.layout,
                "block_texts": list(self.slide_context.block_texts),
            },
            "origin": self.origin,
        }


ORIGIN_PROVENANCE = {
    "multimodal": Provenance.USER_COMMAND,
    "suggestion_engine": Provenance.SUGGESTION,
    "rebind": Provenance.AUTO_REBIND,
}


# --- representation rules -----------------------------------------------------


def record_represented(record: AnalyticsRecord, blocks: Sequence[SemanticBlock]) -> bool:
    """A record is represented if any block cites it or names its topic."""
    for block in blocks:
        if record.record_id in block.source_record_ids:
            return True
        if contains_phrase(block.text, record.topic_label):
            return True
    return False


def keyword_used(keyword: str, records_with_kw: Sequence[AnalyticsRecord], blocks: Sequence[SemanticBlock]) -> bool:
    """A keyword is used if any block mentions it or cites a record carrying it."""
    carrying = {r.record_id for r in records_with_kw}
    for block in blocks:
        if contains_phrase(block.text, keyword):
            return True
        if carrying.intersection(block.source_record_ids):
            return True
    return False


# --- record selection -----------------------------------------------------------


def fetch_records(
    db: AnalyticsDB,
    deck: Deck,
    request: BlockRequest,
) -> list[AnalyticsRecord]:
    """Select the records a block for this request should be built from.

    Returns the full eligible set in ranking order; callers take the head.
    Raises NoEligibleRecords when the scope is empty or a rule dead-ends.
    """
    scope = rank_chart(db.point_records(request.discussion_point))
    if not scope:
        raise NoEligibleRecords(f"no analytics for {request.discussion_point!r}")
    deck_blocks = deck.blocks()

    if request.metric is None:
        if request.topic_scope is None:
            return list(scope)
        record = db.get(request.topic_scope)
        if record is None:
            raise NoEligibleRecords(f"unknown record {request.topic_scope!r}")
        return [record]

    metric = request.metric
    if metric is Metric.CT:
        flagged = [r for r in scope if r.attrs.is_evidence or r.attrs.is_challenge]
        if flagged:
            return flagged
        top_time = max(r.cumulative_time_ms for r in scope)
        return [next(r for r in scope if r.cumulative_time_ms == top_time)]

    if metric is Metric.OD:
        unrepresented = [r for r in scope if not record_represented(r, deck_blocks)]
        if not unrepresented:
            raise NoEligibleRecords("every idea is already on the deck")
        if scope[0].record_id in {r.record_id for r in unrepresented}:
            return [scope[0]]
        low_freq = min(r.frequency for r in unrepresented)
        return [next(r for r in unrepresented if r.frequency == low_freq)]

    if metric is Metric.CE:
        counts: dict[str, int] = {}
        for r in scope:
            for g in r.contributing_groups:
                counts.setdefault(g, 0)
        for block in deck_blocks:
            cited_groups: set[str] = set()
            for rid in block.source_record_ids:
                rec = db.get(rid)
                if rec is not None and rec.discussion_point == request.discussion_point:
                    cited_groups |= rec.contributing_groups
            for g in cited_groups:
                if g in counts:
                    counts[g] += 1
        least = min(counts.values())
        quiet = {g for g, n in counts.items() if n == least}
        return [r for r in scope if r.contributing_groups & quiet]

    # CR and ER share the keyword rule over their respective keyword fields.
    attr = "cs_keywords" if metric is Metric.CR else "ethics_keywords"
    by_keyword: dict[str, list[AnalyticsRecord]] = {}
    for r in scope:
        for k in getattr(r, attr):
            by_keyword.setdefault(k, []).append(r)
    if not by_keyword:
        raise NoEligibleRecords(f"no {attr} in scope")
    # "most frequently occurring" counts the records carrying the keyword.
    ordered = sorted(by_keyword, key=lambda k: (-len(by_keyword[k]), k))
    top = ordered[0]
    if not keyword_used(top, by_keyword[top], deck_blocks):
        chosen = top
    else:
        unused = [k for k in ordered if not keyword_used(k, by_keyword[k], deck_blocks)]
        if not unused:
            raise NoEligibleRecords("every relevant keyword is already on the deck")
        chosen = min(unused, key=lambda k: (len(by_keyword[k]), k))
    carrying = {r.record_id for r in by_keyword[chosen]}
    return [r for r in scope if r.record_id in carrying]


# --- providers -------------------------------------------------------------------


MARKERS = {
    ContentType.COMMENTARY: "Note",
    ContentType.CLASS_QUESTION: "Question",
    ContentType.COMPARISON: "Comparison",
    ContentType.CASE_STUDY: "Case study",
}


def stub_block_text(request: BlockRequest, records: Sequence[AnalyticsRecord]) -> str:
    """Pure template: a function of (request, records) only."""
    first = records[0]
    metric_seg = f" [{request.metric.value}]" if request.metric else ""
    body = f"{first.topic_label}: mentioned by {len(first.contributing_groups)} group(s)"
    if len(records) >= 2:
        second = records[1]
        body += f", versus {second.topic_label}: mentioned by {len(second.contributing_groups)} group(s)"
    marker = MARKERS[request.content_type]
    if request.content_type is ContentType.CLASS_QUESTION:
        return f"{marker}{metric_seg} {body}. What stands out here?"
    return f"{marker}{metric_seg} {body}."


class StubBlockProvider:
    """Deterministic in-process provider; also the fallback for rebinds."""

    kind = "deterministic_stub"

    def generate(self, request: BlockRequest, records: Sequence[AnalyticsRecord]) -> str:
        return stub_block_text(request, records)


class HttpBlockProvider:
    """POSTs {request, records, context} to an external generative service.

    The payload schema is documented in docs/provider.md. Any transport or
    payload problem surfaces as ProviderError; the caller decides whether to
    fall back to the stub (rebind path) or to propagate (command path).
    """

    kind = "external_generative"

    def __init__(self, endpoint: str, timeout_s: float = 5.0, token_env: str = "CLASSDECK_PROVIDER_TOKEN"):
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self.token_env = token_env

    def generate(self, request: BlockRequest, records: Sequence[AnalyticsRecord]) -> str:
        payload = {
            "request": request.as_dict(),
            "records": [r.as_dict() for r in records],
            "context": {"schema": 1},
        }
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        req = urllib.request.Request(
            self.endpoint, data=json.dumps(payload).encode("utf-8"), headers=headers
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, OSError) as exc:
            raise ProviderError(f"provider call failed: {exc}") from exc
        text = body.get("text", "")
        if not text:
            raise ProviderError("provider returned no text")
        return text


class CountingProvider:
    """Wrapper that counts generate() calls; tests and the pregen audit use it."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    @property
    def kind(self):
        return self.inner.kind

    def generate(self, request, records):
        self.calls += 1
        return self.inner.generate(request, records)


def build_provider(spec: ProviderSpec, thresholds: Thresholds):
    if spec.kind == "external_generative":
        return HttpBlockProvider(spec.endpoint, thresholds.provider_timeout_s, spec.token_env)
    return StubBlockProvider()


# --- block assembly ---------------------------------------------------------------


class GenerationPipeline:
    def __init__(self, db: AnalyticsDB, deck: Deck, provider, id_factory):
        self.db = db
        self.deck = deck
        self.provider = provider
        self._fallback = StubBlockProvider()
        self._ids = id_factory

    def fetch_records(self, request: BlockRequest) -> list[AnalyticsRecord]:
        return fetch_records(self.db, self.deck, request)

    def generate_block(self, request: BlockRequest, records: Sequence[AnalyticsRecord]) -> SemanticBlock:
        """Synthesize a block; rebind-path failures fall back to the stub."""
        if not records:
            raise NoEligibleRecords("cannot generate from zero records")
        try:
            text = self.provider.generate(request, records)
        except ProviderError:
            if request.origin != "rebind":
                raise
            text = self._fallback.generate(request, records)
        return SemanticBlock(
            block_id=self._ids("b"),
            source_record_ids=tuple(r.record_id for r in records),
            content_type=request.content_type,
            text=text,
            metric_tag=request.metric.value if request.metric else None,
            provenance=ORIGIN_PROVENANCE.get(request.origin, Provenance.USER_COMMAND),
        )

    def run(self, request: BlockRequest, limit: int = 1) -> SemanticBlock:
        records = self.fetch_records(request)[: max(1, limit)]
        return self.generate_block(request, records)
