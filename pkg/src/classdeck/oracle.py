"""Brute-force verifiers, kept deliberately naive.

These recompute from first principles what the incremental engine maintains
as it goes: the analytics database as a from-scratch fold, chart ranking by
explicit pairwise scanning, and record selection by literal application of
the metric rules. They share only the pure text primitives (tokenizer,
embedder, keyword tables) with the production path; every aggregation and
selection decision is re-derived here with plain dicts and loops.
"""

from __future__ import annotations

import math
from typing import Sequence

from classdeck import textutil
from classdeck.config import SessionConfig
from classdeck.ingest import (
    ATTR_TOPIC_LABELS,
    CUE_RULES,
    AnalyticsRecord,
    Dimension,
    UtteranceRecord,
)


# --- batch analytics recompute ----------------------------------------------------


def _cue_flags(text: str) -> dict[str, bool]:
    flags = {}
    for attr, cues in CUE_RULES:
        flags[attr] = any(textutil.contains_phrase(text, cue) for cue in cues)
    return flags


def batch_recompute(utterances: Sequence[UtteranceRecord], config: SessionConfig) -> dict:
    """Fold the full utterance log into an analytics dict from scratch.

    Output matches AnalyticsDB.as_dict() so equality is a plain comparison.
    """
    th = config.thresholds
    sets = config.load_keywords()
    records: list[dict] = []
    next_id = 0

    def sparse_embed(text: str) -> dict[int, float]:
        vec: dict[int, float] = {}
        for token in textutil.content_words(text):
            b = textutil.hash_bin(token, th.embedding_dim)
            vec[b] = vec.get(b, 0.0) + 1.0
        norm = math.sqrt(sum(v * v for v in vec.values()))
        return {k: v / norm for k, v in vec.items()} if norm else {}

    def sparse_cos(a: dict[int, float], b: dict[int, float]) -> float:
        total = sum(v * b.get(k, 0.0) for k, v in sorted(a.items()))
        return round(total, textutil.COSINE_DECIMALS)

    def fold_candidate(u: UtteranceRecord, dimension: Dimension, label: str, embed_text: str,
                       flags: dict[str, bool], cs_hits: set, eth_hits: set) -> None:
        nonlocal next_id
        emb = sparse_embed(embed_text)
        best = None
        best_cos = -1.0
        for rec in records:
            if rec["discussion_point"] != u.discussion_point or rec["dimension"] != dimension.value:
                continue
            cos = sparse_cos(emb, rec["_embedding"])
            if cos > best_cos or (cos == best_cos and best is not None and rec["first_seen_ms"] < best["first_seen_ms"]):
                best, best_cos = rec, cos
        accrual = u.token_count * th.ms_per_token
        if best is not None and best_cos >= th.dup_threshold:
            best["frequency"] += 1
            best["cumulative_time_ms"] += accrual
            best["contributing_groups"].add(u.group_id)
            for attr, value in flags.items():
                best["attrs"][attr] = best["attrs"][attr] or value
            best["cs_keywords"] |= cs_hits
            best["ethics_keywords"] |= eth_hits
            return
        next_id += 1
        records.append(
            {
                "record_id": f"r{next_id}",
                "discussion_point": u.discussion_point,
                "dimension": dimension.value,
                "topic_label": label,
                "_embedding": emb,
                "frequency": 1,
                "cumulative_time_ms": accrual,
                "contributing_groups": {u.group_id},
                "attrs": {"is_new_idea": True, **flags},
                "cs_keywords": set(cs_hits),
                "ethics_keywords": set(eth_hits),
                "first_seen_ms": u.t_ms,
            }
        )

    for u in utterances:
        if u.token_count < th.min_tokens:
            continue
        cs_hits = sets["cs"].match(u.text)
        eth_hits = sets["ethics"].match(u.text)
        fw_hits = sets["frameworks"].match(u.text)
        flags = _cue_flags(u.text)

        fold_candidate(u, Dimension.KEY_DISCUSSION_THEMES, textutil.topic_label(u.text),
                       u.text, flags, cs_hits, eth_hits)
        for kw in sorted(cs_hits):
            fold_candidate(u, Dimension.TECH_TOPICS, kw, kw, flags, cs_hits, eth_hits)
        for kw in sorted(eth_hits):
            fold_candidate(u, Dimension.ETHICAL_CONCEPTS, kw, kw, flags, cs_hits, eth_hits)
        for kw in sorted(fw_hits):
            fold_candidate(u, Dimension.ETHICAL_FRAMEWORKS_USED, kw, kw, flags, cs_hits, eth_hits)
        for attr in ("is_agreement", "is_challenge", "is_evidence", "is_extension"):
            if flags[attr]:
                label = ATTR_TOPIC_LABELS[attr]
                fold_candidate(u, Dimension.DIMENSIONS_OF_ANALYSIS, label, label,
                               flags, cs_hits, eth_hits)

    out = {}
    for rec in records:
        out[rec["record_id"]] = {
            "record_id": rec["record_id"],
            "discussion_point": rec["discussion_point"],
            "dimension": rec["dimension"],
            "topic_label": rec["topic_label"],
            "frequency": rec["frequency"],
            "cumulative_time_ms": rec["cumulative_time_ms"],
            "contributing_groups": sorted(rec["contributing_groups"]),
            "attrs": dict(rec["attrs"]),
            "cs_keywords": sorted(rec["cs_keywords"]),
            "ethics_keywords": sorted(rec["ethics_keywords"]),
            "first_seen_ms": rec["first_seen_ms"],
        }
    return dict(sorted(out.items()))


# --- ranking oracle ------------------------------------------------------------------


def rank_by_scan(records: Sequence[AnalyticsRecord]) -> list[str]:
    """Selection sort with the tie-break chain spelled out per comparison."""
    remaining = list(records)
    ordered: list[str] = []
    while remaining:
        best = remaining[0]
        for rec in remaining[1:]:
            if rec.frequency > best.frequency:
                best = rec
            elif rec.frequency == best.frequency:
                if rec.first_seen_ms < best.first_seen_ms:
                    best = rec
                elif rec.first_seen_ms == best.first_seen_ms and rec.topic_label < best.topic_label:
                    best = rec
        ordered.append(best.record_id)
        remaining = [r for r in remaining if r is not best]
    return ordered


def resolve_rank_spec(ordered: list[str], origin: str, index: int) -> str | None:
    if not (1 <= index <= len(ordered)):
        return None
    return ordered[index - 1] if origin == "top" else ordered[len(ordered) - index]


# --- record selection oracle ------------------------------------------------------------


def fetch_records_by_rules(
    records: Sequence[AnalyticsRecord],
    deck_blocks: Sequence,
    discussion_point: str,
    metric: str | None,
    roster: Sequence[str] = (),
) -> list[str]:
    """Literal application of the metric selection rules; returns record ids.

    ``deck_blocks`` is any sequence with .text and .source_record_ids.
    """
    scope = [r for r in records if r.discussion_point == discussion_point]
    ordered_ids = rank_by_scan(scope)
    by_id = {r.record_id: r for r in scope}
    ordered = [by_id[rid] for rid in ordered_ids]
    if not ordered:
        return []

    def represented(rec: AnalyticsRecord) -> bool:
        for block in deck_blocks:
            if rec.record_id in block.source_record_ids:
                return True
            if textutil.contains_phrase(block.text, rec.topic_label):
                return True
        return False

    def kw_used(keyword: str, carrying_ids: set[str]) -> bool:
        for block in deck_blocks:
            if textutil.contains_phrase(block.text, keyword):
                return True
            if carrying_ids & set(block.source_record_ids):
                return True
        return False

    if metric is None:
        return [r.record_id for r in ordered]

    if metric == "CT":
        flagged = [r for r in ordered if r.attrs.is_evidence or r.attrs.is_challenge]
        if flagged:
            return [r.record_id for r in flagged]
        best = ordered[0]
        for r in ordered:
            if r.cumulative_time_ms > best.cumulative_time_ms:
                best = r
        return [best.record_id]

    if metric == "OD":
        unrep = [r for r in ordered if not represented(r)]
        if not unrep:
            return []
        if ordered[0].record_id in [r.record_id for r in unrep]:
            return [ordered[0].record_id]
        least = unrep[0]
        for r in unrep:
            if r.frequency < least.frequency:
                least = r
        return [least.record_id]

    if metric == "CE":
        groups = set()
        for r in ordered:
            groups |= r.contributing_groups
        citation_counts = {g: 0 for g in groups}
        for block in deck_blocks:
            cited = set()
            for rid in block.source_record_ids:
                if rid in by_id:
                    cited |= by_id[rid].contributing_groups
            for g in cited:
                if g in citation_counts:
                    citation_counts[g] += 1
        least = min(citation_counts.values())
        quiet = {g for g, n in citation_counts.items() if n == least}
        return [r.record_id for r in ordered if r.contributing_groups & quiet]

    field = "cs_keywords" if metric == "CR" else "ethics_keywords"
    carriers: dict[str, set[str]] = {}
    for r in ordered:
        for k in getattr(r, field):
            carriers.setdefault(k, set()).add(r.record_id)
    if not carriers:
        return []
    kw_ranked = sorted(carriers, key=lambda k: (-len(carriers[k]), k))
    top = kw_ranked[0]
    if not kw_used(top, carriers[top]):
        chosen = top
    else:
        unused = [k for k in kw_ranked if not kw_used(k, carriers[k])]
        if not unused:
            return []
        chosen = min(unused, key=lambda k: (len(carriers[k]), k))
    return [r.record_id for r in ordered if r.record_id in carriers[chosen]]
