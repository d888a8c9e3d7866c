import random

import pytest

from classdeck.analytics import ActivitySignal
from classdeck.deck import ContentType, Deck, Layout, PlaceBlock
from classdeck.errors import EmptyAnalytics, NothingToSuggest, SuggestionStale
from classdeck.genpipe import GenerationPipeline, Metric, StubBlockProvider
from classdeck.keywords import load_default
from classdeck.suggest import MetricEvaluator, SuggestionEngine, TriggerState
from conftest import db_with, make_record
from test_genpipe import plain_block


def signal(fraction, remaining_ms, point="Q1"):
    return ActivitySignal(point, fraction, 60_000, remaining_ms)


def evaluator(db, roster=9):
    return MetricEvaluator(db, roster, load_default("cs"), load_default("ethics"))


def build_engine(db, deck=None):
    deck = deck or Deck()
    counters = {}

    def ids(prefix):
        counters[prefix] = counters.get(prefix, 0) + 1
        return f"{prefix}_{counters[prefix]}"

    pipe = GenerationPipeline(db, deck, StubBlockProvider(), id_factory=ids)
    return SuggestionEngine(evaluator(db), pipe, deck, id_factory=ids)


class TestEvaluateMetrics:
    def test_od_is_cited_fraction(self):
        db = db_with(*(make_record(f"r{i}", label=f"idea number {i}") for i in range(1, 5)))
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1", Layout.BULLETS, 2)
        for i, region in enumerate(deck.slide(slide_id).regions, start=1):
            deck.apply_edit(PlaceBlock(slide_id, plain_block(f"b{i}", sources=(f"r{i}",)),
                                       region.region_id))
        scores = evaluator(db).evaluate(deck, "Q1")
        assert scores.deck[Metric.OD] == 0.5

    def test_ce_full_coverage_with_nine_groups(self):
        groups = tuple(f"g{i}" for i in range(1, 10))
        db = db_with(make_record("r1", groups=groups))
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1")
        deck.apply_edit(PlaceBlock(slide_id, plain_block("b1", sources=("r1",)),
                                   deck.slide(slide_id).regions[0].region_id))
        scores = evaluator(db, roster=9).evaluate(deck, "Q1")
        assert scores.deck[Metric.CE] == 1.0

    def test_ct_zero_without_questions_or_evidence(self):
        db = db_with(make_record("r1"))
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1")
        deck.apply_edit(PlaceBlock(slide_id, plain_block("b1", sources=("r1",)),
                                   deck.slide(slide_id).regions[0].region_id))
        scores = evaluator(db).evaluate(deck, "Q1")
        assert scores.deck[Metric.CT] == 0.0

    def test_empty_scope_raises(self):
        with pytest.raises(EmptyAnalytics):
            evaluator(db_with()).evaluate(Deck(), "Q1")

    def test_adding_covering_block_never_lowers_any_metric(self):
        rng = random.Random(5)
        from classdeck.checks import random_analytics_db

        for _ in range(30):
            db, deck = random_analytics_db(rng)
            ev = evaluator(db, roster=6)
            before = ev.evaluate(deck, "Q1").deck
            rid = rng.choice(sorted(db.records))
            slide_id, _ = deck.create_slide("Q1")
            deck.apply_edit(PlaceBlock(
                slide_id,
                plain_block("extra", text=f"Note {db.records[rid].topic_label} now", sources=(rid,)),
                deck.slide(slide_id).regions[0].region_id,
            ))
            after = ev.evaluate(deck, "Q1").deck
            for metric in (Metric.OD, Metric.CE, Metric.CR, Metric.ER):
                assert after[metric] >= before[metric]


class TestTriggers:
    def test_low_activity_fires(self):
        state = TriggerState()
        assert state.trigger_check(signal(0.05, 300_000)) is True

    def test_time_low_fires_even_when_active(self):
        state = TriggerState()
        assert state.trigger_check(signal(0.5, 119_000)) is True

    def test_neither_condition_is_false(self):
        state = TriggerState()
        assert state.trigger_check(signal(0.5, 300_000)) is False

    def test_boundaries_are_strict(self):
        state = TriggerState()
        assert state.trigger_check(signal(0.10, 120_000)) is False

    def test_edge_triggered_until_new_data(self):
        state = TriggerState()
        assert state.trigger_check(signal(0.05, 300_000)) is True
        for _ in range(5):
            assert state.trigger_check(signal(0.04, 300_000)) is False
        state.rearm("Q1")
        assert state.trigger_check(signal(0.05, 300_000)) is True

    def test_conditions_fire_independently(self):
        state = TriggerState()
        assert state.trigger_check(signal(0.05, 300_000)) is True   # activity
        assert state.trigger_check(signal(0.05, 60_000)) is True    # now time too
        assert state.trigger_check(signal(0.05, 50_000)) is False


class TestBuildSuggestions:
    def _db(self):
        return db_with(
            make_record("r1", frequency=8, label="privacy tradeoffs", groups=("g1", "g2")),
            make_record("r2", frequency=4, label="consent fatigue", groups=("g3",)),
            make_record("r3", frequency=2, label="audit trails", groups=("g4",),
                        is_evidence=True),
            make_record("r4", frequency=1, label="deterrence claims", groups=("g5",)),
        )

    def test_worst_metric_targets_lowest_slide(self):
        db = self._db()
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1", Layout.BULLETS, 2)
        deck.apply_edit(PlaceBlock(slide_id, plain_block("b1", sources=("r1",)),
                                   deck.slide(slide_id).regions[0].region_id))
        eng = build_engine(db, deck)
        built = eng.build_suggestions("Q1")
        assert built
        worst = eng.evaluator.evaluate(deck, "Q1").worst_metrics()
        assert {s.metric for s in built} <= set(worst)
        assert all(s.target_slide == slide_id for s in built)

    def test_only_top_rank_surfaced_per_slide(self):
        db = self._db()
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1", Layout.BULLETS, 3)
        eng = build_engine(db, deck)
        built = eng.build_suggestions("Q1")
        surfaced = eng.surfaced()
        if len(built) >= 2:
            entry = surfaced[slide_id]
            ranks = {s.suggestion_id: s.rank for s in built}
            assert ranks[entry["visible"]] == min(ranks.values())
            assert set(entry["hidden"]) == {
                sid for sid in ranks if sid != entry["visible"]
            }

    def test_fully_covered_deck_raises(self):
        db = db_with(make_record("r1", label="privacy", groups=("g1",), is_evidence=True))
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1")
        deck.apply_edit(PlaceBlock(
            slide_id,
            plain_block("b1", text="Question privacy: mentioned by 1 group(s)?", sources=("r1",)),
            deck.slide(slide_id).regions[0].region_id,
        ))
        eng = build_engine(db, Deck())  # fresh engine, same analytics
        eng.deck = deck
        eng.evaluator = evaluator(db, roster=1)
        # every metric at 1.0: one slide with a question citing the only record
        with pytest.raises(NothingToSuggest):
            eng.build_suggestions("Q1")

    def test_ignored_recomputation_suppressed(self):
        db = self._db()
        deck = Deck()
        deck.create_slide("Q1", Layout.BULLETS, 2)
        eng = build_engine(db, deck)
        built = eng.build_suggestions("Q1")
        target = built[0]
        eng.resolve(target.suggestion_id, "ignore")
        rebuilt = eng.build_suggestions("Q1")
        assert all(s.dedup_key != target.dedup_key for s in rebuilt)


class TestResolve:
    def _setup(self):
        db = db_with(
            make_record("r1", frequency=5, label="privacy tradeoffs", groups=("g1",)),
            make_record("r2", frequency=1, label="audit trails", groups=("g2",)),
        )
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1", Layout.BULLETS, 2)
        eng = build_engine(db, deck)
        built = eng.build_suggestions("Q1")
        return db, deck, eng, slide_id, built[0]

    def test_apply_installs_block_and_closes(self):
        _, deck, eng, slide_id, suggestion = self._setup()
        resolution = eng.resolve(suggestion.suggestion_id, "apply")
        assert resolution.state == "applied"
        region = deck.slide(slide_id).region(suggestion.target_region)
        assert region.block.text == suggestion.proposed_block.text
        assert region.block.provenance.value == "suggestion"
        assert deck.undo_stack  # applying is undoable

    def test_refresh_regenerates_against_new_data(self):
        db, deck, eng, slide_id, suggestion = self._setup()
        old_text = suggestion.proposed_block.text
        record = db.records[suggestion.proposed_block.source_record_ids[0]]
        record.contributing_groups |= {"g7", "g8"}   # data moved underneath
        resolution = eng.resolve(suggestion.suggestion_id, "refresh")
        assert resolution.state == "refreshed"
        assert suggestion.proposed_block.text != old_text
        assert suggestion.open  # refreshed stays actionable

    def test_modify_installs_edited_text_as_manual(self):
        _, deck, eng, slide_id, suggestion = self._setup()
        eng.resolve(suggestion.suggestion_id, "modify", edited_text="my own phrasing")
        region = deck.slide(slide_id).region(suggestion.target_region)
        assert region.block.text == "my own phrasing"
        assert region.block.provenance.value == "manual_edit"

    def test_stale_target_forces_refresh(self):
        _, deck, eng, slide_id, suggestion = self._setup()
        deck.apply_edit(PlaceBlock(slide_id, plain_block("intruder", sources=("r1",)),
                                   suggestion.target_region))
        with pytest.raises(SuggestionStale):
            eng.resolve(suggestion.suggestion_id, "apply")

    def test_apply_never_decreases_target_metric(self):
        rng = random.Random(11)
        from classdeck.checks import random_analytics_db

        applied = 0
        for _ in range(50):
            db, deck = random_analytics_db(rng)
            if not deck.slides:
                deck.create_slide("Q1", Layout.BULLETS, 2)
            eng = build_engine(db, deck)
            try:
                built = eng.build_suggestions("Q1")
            except NothingToSuggest:
                continue
            if not built:
                continue
            choice = rng.choice(built)
            before = eng.evaluator.evaluate(deck, "Q1").deck[choice.metric]
            eng.resolve(choice.suggestion_id, "apply")
            after = eng.evaluator.evaluate(deck, "Q1").deck[choice.metric]
            assert after >= before, (choice.metric, before, after)
            applied += 1
        assert applied >= 25  # the property actually exercised


class TestToastPolicy:
    def test_toast_only_for_out_of_view_targets(self, engine):
        from conftest import say

        for i in range(6):
            say(engine, 1_000 + i * 500, f"g{i % 3 + 1}", "Q1",
                "surveillance cameras record every protest in the city square")
        engine.handle_command(
            {"voice": "Generate a slide for the top one Key Discussion Themes",
             "point": "Q1", "req_id": "c"},
        )
        slide_id = engine.deck.slides[-1].slide_id

        # slide visible: trigger fires, no toast
        engine.viewport([slide_id])
        engine.advance(500_000)  # remaining < 2 min
        toasts = [e for e in engine.envelopes if e.kind == "Toast"]
        suggestions = [e for e in engine.envelopes if e.kind == "SuggestionAvailable"]
        assert suggestions and not toasts

        # new data rearms; slide now out of view: toast accompanies the suggestion
        say(engine, 505_000, "g1", "Q1",
            "consent forms nobody reads still count as agreement legally")
        engine.viewport([])
        engine.advance(506_000)
        toasts = [e for e in engine.envelopes if e.kind == "Toast"]
        assert toasts and toasts[-1].payload["slide_id"] == slide_id
