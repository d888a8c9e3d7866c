"""Runnable verifier checks behind the ``oracle`` CLI subcommands.

Each check pits the live implementation against the corresponding
brute-force oracle and returns (passed, details). The acceptance test
suite drives the same functions, so CLI and tests cannot drift apart.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from classdeck import oracle, simlog
from classdeck.config import SessionConfig, DiscussionPoint
from classdeck.deck import ContentType, Deck, PlaceBlock, SemanticBlock
from classdeck.engine import Engine
from classdeck.errors import NoEligibleRecords
from classdeck.genpipe import BlockRequest, Metric, fetch_records
from classdeck.ingest import AnalyticsDB, AnalyticsRecord, Dimension, DiscourseAttrs, UtteranceRecord
from classdeck.service import Replayer


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: str
    elapsed_s: float


def scenario_config(name: str) -> SessionConfig:
    scenario = simlog.SCENARIOS[name]
    return SessionConfig(
        session_id=name,
        title=scenario.name,
        duration_min=scenario.duration_min,
        roster=tuple(f"g{i + 1}" for i in range(scenario.n_groups)),
        discussion_points=tuple(DiscussionPoint(p) for p in scenario.points),
    )


def scenario_rows(name: str) -> list[dict]:
    return simlog.synthesize(simlog.SCENARIOS[name])


# --- check 1: ingest oracle equivalence ------------------------------------------


def check_ingest_equivalence(checkpoint_every: int = 50) -> CheckResult:
    started = time.monotonic()
    mismatches = 0
    checked = 0
    for name in ("session1", "session2", "session3"):
        config = scenario_config(name)
        rows = scenario_rows(name)
        engine = Engine(config)
        utterances: list[UtteranceRecord] = []
        for i, row in enumerate(rows, start=1):
            engine.ingest(row)
            utterances.append(
                UtteranceRecord(
                    session_id=name, group_id=row["group"], discussion_point=row["q"],
                    t_ms=row["t_ms"], text=row["text"],
                )
            )
            if i % checkpoint_every == 0 or i == len(rows):
                checked += 1
                expected = oracle.batch_recompute(utterances, config)
                if engine.db.as_dict() != expected:
                    mismatches += 1
    elapsed = time.monotonic() - started
    return CheckResult(
        name="ingest-equivalence",
        passed=mismatches == 0,
        details=f"{checked} checkpoints over 3 logs, {mismatches} mismatches",
        elapsed_s=elapsed,
    )


# --- check 2: frequency binding quiescent correctness ------------------------------


def _binding_mismatches(engine: Engine) -> list[str]:
    problems = []
    for binding in engine.bindings.bindings.values():
        if not binding.is_frequency_based:
            continue
        snapshot = engine.charts.snapshot(binding.chart_key)
        if snapshot.version == 0:
            continue
        records = engine.db.chart_records(binding.chart_key)
        ordered = oracle.rank_by_scan(records)
        spec = binding.kind.rank_spec
        expected = oracle.resolve_rank_spec(ordered, spec.origin, spec.index)
        if expected is None:
            continue  # rank outside chart; binding legitimately unresolved
        if binding.last_resolved[0] != expected:
            problems.append(
                f"{binding.binding_id} at {spec.label()} on {binding.chart_key}: "
                f"resolved {binding.last_resolved[0]} expected {expected}"
            )
    return problems


def quiescence_script() -> list:
    """Five-slide command set for the surveillance-shaped session."""
    from classdeck.service import ScriptEntry

    return [
        ScriptEntry(20_000, "command", {"voice": "Generate a slide for the top three Key Discussion Themes", "point": "Q1", "req_id": "c1"}),
        ScriptEntry(30_000, "command", {"voice": "Generate the least discussed Tech Topic", "point": "Q1", "req_id": "c2"}),
        ScriptEntry(150_000, "command", {"voice": "Generate a slide about the most popular discussion theme", "point": "Q2", "req_id": "c3"}),
        ScriptEntry(170_000, "command", {"voice": "Compare the highest and lowest frequencies of technology keywords mentioned", "point": "Q2", "req_id": "c4"}),
        ScriptEntry(330_000, "command", {"voice": "Generate a slide for the top two Ethical Concepts", "point": "Q3", "req_id": "c5"}),
    ]


def check_binding_quiescence(speed: float = 20.0) -> CheckResult:
    started = time.monotonic()
    config = scenario_config("session2")
    rows = scenario_rows("session2")
    scenario = simlog.SCENARIOS["session2"]
    failures: list[str] = []
    probed = 0

    def probe(engine: Engine) -> None:
        nonlocal probed
        probed += 1
        failures.extend(_binding_mismatches(engine))

    replayer = Replayer(
        engine=Engine(config),
        rows=rows,
        speed=speed,
        script=quiescence_script(),
        probes={t: probe for t in simlog.probe_points(scenario)},
    )
    replayer.run()
    elapsed = time.monotonic() - started
    return CheckResult(
        name="binding-quiescence",
        passed=not failures and probed == 10,
        details=f"{probed} probes, {len(failures)} mismatches, "
                f"{len(replayer.engine.monitor.swap_log)} swaps, {elapsed:.1f}s wall",
        elapsed_s=elapsed,
    )


# --- check 3: pregen contract -------------------------------------------------------


def check_pregen_contract(speed: float = 0.0) -> CheckResult:
    """Instrumented replay: swaps must come from cache and match sync stub text."""
    started = time.monotonic()
    config = scenario_config("session2")
    rows = scenario_rows("session2")
    engine = Engine(config)
    replayer = Replayer(engine=engine, rows=rows, speed=speed, script=quiescence_script())
    replayer.run()

    swaps = engine.monitor.swap_log
    uncached = [s for s in swaps if not s["from_cache"]]
    text_mismatches = [
        s["binding_id"] for s in swaps if s["block_text"] != s["sync_stub_text"]
    ]
    elapsed = time.monotonic() - started
    passed = bool(swaps) and not uncached and not text_mismatches
    return CheckResult(
        name="pregen-contract",
        passed=passed,
        details=(
            f"{len(swaps)} swaps, {len(uncached)} uncached, "
            f"{len(text_mismatches)} text mismatches"
        ),
        elapsed_s=elapsed,
    )


# --- check 4: record fetcher rules ----------------------------------------------------


def random_analytics_db(rng: random.Random, max_records: int = 20) -> tuple[AnalyticsDB, Deck]:
    db = AnalyticsDB()
    n = rng.randint(1, max_records)
    groups = [f"g{i}" for i in range(1, 7)]
    cs_pool = ["algorithm", "training data", "model", "drone", "encryption"]
    eth_pool = ["bias", "privacy", "consent", "harm", "justice"]
    dims = list(Dimension)
    for i in range(1, n + 1):
        db.add(
            AnalyticsRecord(
                record_id=f"r{i}",
                discussion_point="Q1",
                dimension=rng.choice(dims),
                topic_label=f"topic {i} {rng.choice(['alpha', 'beta', 'gamma'])}",
                embedding=np.zeros(4),
                frequency=rng.randint(1, 9),
                cumulative_time_ms=rng.randint(1_000, 90_000),
                contributing_groups=set(rng.sample(groups, rng.randint(1, 4))),
                attrs=DiscourseAttrs(
                    is_new_idea=True,
                    is_agreement=rng.random() < 0.3,
                    is_challenge=rng.random() < 0.25,
                    is_evidence=rng.random() < 0.25,
                    is_extension=rng.random() < 0.2,
                ),
                cs_keywords=set(rng.sample(cs_pool, rng.randint(0, 2))),
                ethics_keywords=set(rng.sample(eth_pool, rng.randint(0, 2))),
                first_seen_ms=rng.randint(0, 500_000),
            )
        )
    deck = Deck()
    placed = rng.sample(sorted(db.records), k=min(len(db.records), rng.randint(0, 4)))
    for j, rid in enumerate(placed):
        slide_id, _ = deck.create_slide("Q1", region_plan=1)
        record = db.records[rid]
        deck.apply_edit(
            PlaceBlock(
                slide_id=slide_id,
                region_id=deck.slide(slide_id).regions[0].region_id,
                block=SemanticBlock(
                    block_id=f"b{j + 1}",
                    source_record_ids=(rid,),
                    content_type=ContentType.COMMENTARY,
                    text=f"Note {record.topic_label}: mentioned by "
                         f"{len(record.contributing_groups)} group(s).",
                ),
            )
        )
    return db, deck


def check_fetch_rules(cases: int = 100, seed: int = 31) -> CheckResult:
    started = time.monotonic()
    rng = random.Random(seed)
    total = 0
    mismatches = []
    for case in range(cases):
        db, deck = random_analytics_db(rng)
        for metric in Metric:
            total += 1
            request = BlockRequest(discussion_point="Q1", metric=metric)
            try:
                got = [r.record_id for r in fetch_records(db, deck, request)]
            except NoEligibleRecords:
                got = []
            expected = oracle.fetch_records_by_rules(
                list(db.records.values()), deck.blocks(), "Q1", metric.value
            )
            if got != expected:
                mismatches.append((case, metric.value, got, expected))
    elapsed = time.monotonic() - started
    return CheckResult(
        name="fetch-rules",
        passed=not mismatches,
        details=f"{total - len(mismatches)}/{total} exact matches",
        elapsed_s=elapsed,
    )


# --- check 5: gesture corpus ------------------------------------------------------------


def check_gestures(per_class: int = 25, seed: int = 7) -> CheckResult:
    from classdeck.gesturelab import corpus_accuracy

    started = time.monotonic()
    accuracy, confusions = corpus_accuracy(per_class=per_class, seed=seed)
    elapsed = time.monotonic() - started
    return CheckResult(
        name="gestures",
        passed=accuracy >= 0.95,
        details=f"accuracy {accuracy:.3f} over {per_class * 5} strokes, "
                f"{len(confusions)} confusions",
        elapsed_s=elapsed,
    )


ALL_CHECKS = {
    "ingest-equivalence": check_ingest_equivalence,
    "binding-quiescence": check_binding_quiescence,
    "pregen-contract": check_pregen_contract,
    "fetch-rules": check_fetch_rules,
    "gestures": check_gestures,
}
