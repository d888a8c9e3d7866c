import json
import random

import pytest

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
)
from classdeck.errors import EmptyDeck, InvalidRegionPlan, SlideFull, TargetNotFound


def block(bid: str, text: str = "", ctype=ContentType.COMMENTARY, sources=("r1",)) -> SemanticBlock:
    return SemanticBlock(
        block_id=bid,
        source_record_ids=tuple(sources),
        content_type=ctype,
        text=text or f"text for {bid}",
    )


def deck_with_slide(layout=Layout.BULLETS, regions=3):
    deck = Deck()
    slide_id, _ = deck.create_slide("Q1", layout, regions)
    return deck, slide_id


class TestCreateSlide:
    def test_three_region_bullets_slide(self):
        deck, slide_id = deck_with_slide(Layout.BULLETS, 3)
        slide = deck.slide(slide_id)
        assert slide.layout is Layout.BULLETS
        assert len(slide.regions) == 3

    def test_default_layout_is_bullets(self):
        deck = Deck()
        slide_id, _ = deck.create_slide("Q1")
        assert deck.slide(slide_id).layout is Layout.BULLETS

    def test_side_by_side_needs_exactly_two_columns(self):
        deck = Deck()
        with pytest.raises(InvalidRegionPlan):
            deck.create_slide("Q1", Layout.SIDE_BY_SIDE, [0, 1, 2])
        slide_id, _ = deck.create_slide("Q1", Layout.SIDE_BY_SIDE, [0, 1])
        assert {r.column for r in deck.slide(slide_id).regions} == {0, 1}


class TestApplyEdit:
    def test_set_layout_side_by_side_splits_two_blocks(self):
        deck, slide_id = deck_with_slide(Layout.BULLETS, 2)
        slide = deck.slide(slide_id)
        for region, bid in zip(slide.regions, ("b1", "b2")):
            deck.apply_edit(PlaceBlock(slide_id, block(bid), region.region_id))
        deck.apply_edit(SetLayout(slide_id, Layout.SIDE_BY_SIDE))
        assert [r.column for r in slide.regions] == [0, 1]
        assert slide.layout is Layout.SIDE_BY_SIDE

    def test_reorder_updates_positions_only(self):
        deck = Deck()
        ids = [deck.create_slide("Q1")[0] for _ in range(3)]
        deck.apply_edit(PlaceBlock(ids[0], block("b1"), deck.slide(ids[0]).regions[0].region_id))
        new_order = (ids[2], ids[0], ids[1])
        deck.apply_edit(ReorderSlides(new_order))
        assert [s.slide_id for s in deck.slides] == list(new_order)
        assert [s.position_in_deck for s in deck.slides] == [0, 1, 2]
        assert deck.slide(ids[0]).regions[0].block.block_id == "b1"

    def test_edit_text_marks_manual_and_keeps_binding(self):
        deck, slide_id = deck_with_slide()
        region = deck.slide(slide_id).regions[0]
        region.binding_id = "bind1"
        deck.apply_edit(PlaceBlock(slide_id, block("b1"), region.region_id))
        deck.apply_edit(EditText(region.region_id, "hand-tuned wording"))
        assert region.block.text == "hand-tuned wording"
        assert region.block.provenance is Provenance.MANUAL_EDIT
        assert region.binding_id == "bind1"

    def test_edit_empty_region_is_target_not_found(self):
        deck, slide_id = deck_with_slide()
        region_id = deck.slide(slide_id).regions[0].region_id
        with pytest.raises(TargetNotFound):
            deck.apply_edit(EditText(region_id, "anything"))


class TestHistory:
    def test_undo_restores_original_text(self):
        deck, slide_id = deck_with_slide()
        region = deck.slide(slide_id).regions[0]
        deck.apply_edit(PlaceBlock(slide_id, block("b1", "original"), region.region_id))
        deck.apply_edit(EditText(region.region_id, "changed"))
        deck.history_step("undo")
        assert region.block.text == "original"

    def test_undo_then_redo_round_trips(self):
        deck, slide_id = deck_with_slide()
        region = deck.slide(slide_id).regions[0]
        deck.apply_edit(PlaceBlock(slide_id, block("b1", "original"), region.region_id))
        deck.apply_edit(EditText(region.region_id, "changed"))
        snapshot = json.dumps(deck.as_dict(), sort_keys=True)
        deck.history_step("undo")
        deck.history_step("redo")
        assert json.dumps(deck.as_dict(), sort_keys=True) == snapshot

    def test_empty_stacks_noop(self):
        deck = Deck()
        assert deck.history_step("undo") is None
        assert deck.history_step("redo") is None

    def test_new_edit_clears_redo(self):
        deck, slide_id = deck_with_slide()
        region = deck.slide(slide_id).regions[0]
        deck.apply_edit(PlaceBlock(slide_id, block("b1"), region.region_id))
        deck.history_step("undo")
        deck.apply_edit(PlaceBlock(slide_id, block("b2"), region.region_id))
        assert deck.redo_stack == []

    def test_system_mutations_skip_undo_stack(self):
        deck, slide_id = deck_with_slide()
        region = deck.slide(slide_id).regions[0]
        depth = len(deck.undo_stack)
        deck.apply_edit(PlaceBlock(slide_id, block("b1"), region.region_id), user=False)
        assert len(deck.undo_stack) == depth


def random_walk(deck: Deck, rng: random.Random, ops: int) -> int:
    """Apply exactly ``ops`` user mutations; returns the number applied."""
    applied = 0
    block_n = 0
    while applied < ops:
        choice = rng.random()
        slides = deck.slides
        if choice < 0.18 or not slides:
            deck.create_slide("Q1", Layout.BULLETS, rng.randint(1, 3))
            applied += 1
            continue
        slide = rng.choice(slides)
        regions = slide.regions
        if choice < 0.45:
            block_n += 1
            deck.apply_edit(
                PlaceBlock(slide.slide_id, block(f"w{block_n}"),
                           rng.choice(regions).region_id if rng.random() < 0.8 else None)
            )
            applied += 1
        elif choice < 0.6:
            filled = [r for r in regions if r.block is not None]
            if filled:
                deck.apply_edit(EditText(rng.choice(filled).region_id, f"edit {block_n}"))
                applied += 1
        elif choice < 0.7:
            filled = [r for r in regions if r.block is not None]
            if filled:
                deck.apply_edit(DeleteBlock(rng.choice(filled).region_id))
                applied += 1
        elif choice < 0.85 and len(slides) > 1:
            order = [s.slide_id for s in slides]
            rng.shuffle(order)
            deck.apply_edit(ReorderSlides(tuple(order)))
            applied += 1
        else:
            if len(regions) >= 2:
                deck.apply_edit(SetLayout(slide.slide_id, Layout.SIDE_BY_SIDE))
            else:
                deck.apply_edit(SetLayout(slide.slide_id, Layout.BULLETS))
            applied += 1
    return applied


class TestHistoryProperty:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_undo_all_then_redo_all_over_200_ops(self, seed):
        deck = Deck()
        initial = json.dumps(deck.as_dict(), sort_keys=True)
        rng = random.Random(seed)
        applied = random_walk(deck, rng, 200)
        final = json.dumps(deck.as_dict(), sort_keys=True)
        undone = 0
        while deck.history_step("undo") is not None:
            undone += 1
        assert json.dumps(deck.as_dict(), sort_keys=True) == initial
        while deck.history_step("redo") is not None:
            pass
        assert json.dumps(deck.as_dict(), sort_keys=True) == final
        assert undone == applied == 200  # every user op was reversible

    @pytest.mark.parametrize("seed", [7, 8])
    def test_delta_log_replays_from_empty(self, seed):
        deck = Deck()
        log: list[DeckDelta] = []
        original_commit = deck._commit

        def recording_commit(ops, user):
            delta = original_commit(ops, user)
            log.append(delta)
            return delta

        deck._commit = recording_commit
        random_walk(deck, random.Random(seed), 120)
        replayed = Deck()
        for delta in log:
            replayed.apply_delta(delta)
        assert replayed.as_dict() == deck.as_dict()


class TestExport:
    def test_five_slides_export_in_deck_order(self):
        deck = Deck()
        for i in range(5):
            slide_id, _ = deck.create_slide("Q1")
            deck.apply_edit(
                PlaceBlock(slide_id, block(f"b{i}", f"point {i}"),
                           deck.slide(slide_id).regions[0].region_id)
            )
        out = deck.export()
        assert out["text"].count("## Slide") == 5
        positions = [line for line in out["text"].splitlines() if line.startswith("## Slide")]
        assert positions == [f"## Slide {i + 1} [Q1] (bullets)" for i in range(5)]

    def test_pie_slide_embeds_live_frequency_table(self):
        deck, slide_id = deck_with_slide(Layout.BULLETS, 1)
        region = deck.slide(slide_id).regions[0]
        region.binding_id = "bind1"
        deck.apply_edit(PlaceBlock(slide_id, block("b1"), region.region_id))
        deck.apply_edit(SetLayout(slide_id, Layout.PIE_CHART))
        table = [("privacy", 4), ("consent", 2)]
        out = deck.export(chart_table=lambda slide: table)
        assert "privacy: 4" in out["text"]
        assert "consent: 2" in out["text"]

    def test_empty_deck_refuses(self):
        with pytest.raises(EmptyDeck):
            Deck().export()


class TestPositionBlock:
    def test_bullets_fill_first_empty(self):
        deck, slide_id = deck_with_slide(Layout.BULLETS, 3)
        regions = deck.slide(slide_id).regions
        deck.apply_edit(PlaceBlock(slide_id, block("b1"), regions[0].region_id))
        deck.apply_edit(PlaceBlock(slide_id, block("b2"), regions[1].region_id))
        region_id, _ = deck.position_block(slide_id, block("b3"))
        assert region_id == regions[2].region_id

    def test_side_by_side_fills_emptier_column(self):
        deck, slide_id = deck_with_slide(Layout.SIDE_BY_SIDE, [0, 0, 1, 1])
        regions = deck.slide(slide_id).regions
        deck.apply_edit(PlaceBlock(slide_id, block("b1"), regions[0].region_id))
        region_id, _ = deck.position_block(slide_id, block("b2"))
        chosen = deck.slide(slide_id).region(region_id)
        assert chosen.column == 1

    def test_full_bullets_slide_raises(self):
        deck, slide_id = deck_with_slide(Layout.BULLETS, 1)
        deck.apply_edit(PlaceBlock(slide_id, block("b1"),
                                   deck.slide(slide_id).regions[0].region_id))
        with pytest.raises(SlideFull):
            deck.position_block(slide_id, block("b2"))
