"""Slide-deck document model.

Slides hold ordered regions; regions hold semantic blocks and may carry a
binding id owned by the binding layer. Every mutation is expressed as a
DeckDelta of self-contained, invertible ops, so the delta log replays from
an empty deck and user edits undo/redo exactly. System mutations (automatic
rebind swaps) flow through the same ops but stay off the undo stack.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from classdeck.errors import (
    EmptyDeck,
    InvalidRegionPlan,
    LayoutConstraintViolated,
    SlideFull,
    TargetNotFound,
)


class Layout(str, enum.Enum):
    BULLETS = "bullets"
    SIDE_BY_SIDE = "side_by_side"
    PIE_CHART = "pie_chart"


class ContentType(str, enum.Enum):
    COMMENTARY = "commentary"
    CLASS_QUESTION = "class_question"
    COMPARISON = "comparison"
    CASE_STUDY = "case_study"


class Provenance(str, enum.Enum):
    USER_COMMAND = "user_command"
    AUTO_REBIND = "auto_rebind"
    SUGGESTION = "suggestion"
    MANUAL_EDIT = "manual_edit"


@dataclass(frozen=True)
class SemanticBlock:
    block_id: str
    source_record_ids: tuple[str, ...]
    content_type: ContentType
    text: str
    metric_tag: Optional[str] = None
    provenance: Provenance = Provenance.USER_COMMAND

    def __post_init__(self):
        if not self.text:
            raise ValueError("semantic block text must be non-empty")
        if not self.source_record_ids:
            raise ValueError("semantic block needs at least one source record")

    def as_dict(self) -> dict:
        return {
            "block_id": self.block_id,
            "source_record_ids": list(self.source_record_ids),
            "content_type": self.content_type.value,
            "text": self.text,
            "metric_tag": self.metric_tag,
            "provenance": self.provenance.value,
        }


def block_from_dict(data: dict) -> SemanticBlock:
    return SemanticBlock(
        block_id=data["block_id"],
        source_record_ids=tuple(data["source_record_ids"]),
        content_type=ContentType(data["content_type"]),
        text=data["text"],
        metric_tag=data.get("metric_tag"),
        provenance=Provenance(data["provenance"]),
    )


@dataclass
class SlideRegion:
    region_id: str
    column: int = 0
    block: Optional[SemanticBlock] = None
    binding_id: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "region_id": self.region_id,
            "column": self.column,
            "block": self.block.as_dict() if self.block else None,
            "binding_id": self.binding_id,
        }


@dataclass
class Slide:
    slide_id: str
    discussion_point: str
    layout: Layout
    regions: list[SlideRegion]
    position_in_deck: int = 0

    def region(self, region_id: str) -> Optional[SlideRegion]:
        for r in self.regions:
            if r.region_id == region_id:
                return r
        return None

    def as_dict(self) -> dict:
        return {
            "slide_id": self.slide_id,
            "discussion_point": self.discussion_point,
            "layout": self.layout.value,
            "regions": [r.as_dict() for r in self.regions],
            "position_in_deck": self.position_in_deck,
        }


def _validate_columns(layout: Layout, columns: list[int]) -> None:
    if not columns:
        raise InvalidRegionPlan("a slide needs at least one region")
    if layout is Layout.SIDE_BY_SIDE:
        if set(columns) != {0, 1}:
            raise InvalidRegionPlan("side_by_side requires exactly columns 0 and 1")
    elif any(c != 0 for c in columns):
        raise InvalidRegionPlan(f"{layout.value} layout is single-column")


def _columns_for(layout: Layout, n: int) -> list[int]:
    """Default column assignment when converting or creating n regions."""
    if layout is Layout.SIDE_BY_SIDE:
        half = (n + 1) // 2
        return [0 if i < half else 1 for i in range(n)]
    return [0] * n


# --- deck ops -----------------------------------------------------------------
#
# Each op is a dict {"op": ..., ...} carrying enough state to apply forward
# and to invert. Keeping them as plain dicts keeps the delta log trivially
# JSON-serializable for the wire and the persistence layer.


def _invert(op: dict) -> dict:
    kind = op["op"]
    if kind == "create_slide":
        return {"op": "remove_slide", "slide": op["slide"]}
    if kind == "remove_slide":
        return {"op": "create_slide", "slide": op["slide"]}
    if kind == "set_layout":
        return {
            "op": "set_layout",
            "slide_id": op["slide_id"],
            "old_layout": op["new_layout"],
            "new_layout": op["old_layout"],
            "old_columns": op["new_columns"],
            "new_columns": op["old_columns"],
        }
    if kind == "set_block":
        return {
            "op": "set_block",
            "slide_id": op["slide_id"],
            "region_id": op["region_id"],
            "old_block": op["new_block"],
            "new_block": op["old_block"],
        }
    if kind == "reorder":
        return {"op": "reorder", "old_order": op["new_order"], "new_order": op["old_order"]}
    if kind == "add_region":
        return {"op": "remove_region", "slide_id": op["slide_id"], "region": op["region"]}
    if kind == "remove_region":
        return {"op": "add_region", "slide_id": op["slide_id"], "region": op["region"]}
    raise ValueError(f"cannot invert op {kind!r}")


@dataclass(frozen=True)
class DeckDelta:
    ops: tuple[dict, ...]
    user: bool = True

    def inverted(self) -> "DeckDelta":
        return DeckDelta(ops=tuple(_invert(op) for op in reversed(self.ops)), user=self.user)

    def as_dict(self) -> dict:
        return {"ops": list(self.ops), "user": self.user}


# Edit commands accepted by apply_edit.


@dataclass(frozen=True)
class SetLayout:
    slide_id: str
    layout: Layout


@dataclass(frozen=True)
class EditText:
    region_id: str
    text: str


@dataclass(frozen=True)
class DeleteBlock:
    region_id: str


@dataclass(frozen=True)
class ReorderSlides:
    order: tuple[str, ...]


@dataclass(frozen=True)
class PlaceBlock:
    """Place (or replace) a block; region_id None appends a region."""

    slide_id: str
    block: SemanticBlock
    region_id: Optional[str] = None
    column: int = 0


Edit = SetLayout | EditText | DeleteBlock | ReorderSlides | PlaceBlock


class Deck:
    def __init__(self, id_factory: Optional[Callable[[str], str]] = None):
        self.slides: list[Slide] = []
        self.undo_stack: list[DeckDelta] = []
        self.redo_stack: list[DeckDelta] = []
        self._ids = id_factory or self._counter_ids()

    @staticmethod
    def _counter_ids():
        counters: dict[str, int] = {}

        def make(prefix: str) -> str:
            counters[prefix] = counters.get(prefix, 0) + 1
            return f"{prefix}{counters[prefix]}"

        return make

    # --- lookups ---------------------------------------------------------

    def slide(self, slide_id: str) -> Slide:
        for s in self.slides:
            if s.slide_id == slide_id:
                return s
        raise TargetNotFound(f"no slide {slide_id!r}")

    def find_region(self, region_id: str) -> tuple[Slide, SlideRegion]:
        for s in self.slides:
            r = s.region(region_id)
            if r is not None:
                return s, r
        raise TargetNotFound(f"no region {region_id!r}")

    def slides_for_point(self, discussion_point: str) -> list[Slide]:
        return [s for s in self.slides if s.discussion_point == discussion_point]

    def blocks(self) -> list[SemanticBlock]:
        return [r.block for s in self.slides for r in s.regions if r.block is not None]

    # --- construction ------------------------------------------------------

    def create_slide(
        self,
        discussion_point: str,
        layout: Layout = Layout.BULLETS,
        region_plan: int | list[int] = 1,
        user: bool = True,
    ) -> tuple[str, DeckDelta]:
        columns = _columns_for(layout, region_plan) if isinstance(region_plan, int) else list(region_plan)
        _validate_columns(layout, columns)
        slide = Slide(
            slide_id=self._ids("s"),
            discussion_point=discussion_point,
            layout=layout,
            regions=[SlideRegion(region_id=self._ids("g"), column=c) for c in columns],
            position_in_deck=len(self.slides),
        )
        delta = self._commit([{"op": "create_slide", "slide": slide.as_dict()}], user=user)
        return slide.slide_id, delta

    # --- edits -------------------------------------------------------------

    def apply_edit(self, edit: Edit, user: bool = True) -> DeckDelta:
        if isinstance(edit, SetLayout):
            ops = self._ops_set_layout(edit)
        elif isinstance(edit, EditText):
            ops = self._ops_edit_text(edit)
        elif isinstance(edit, DeleteBlock):
            ops = self._ops_delete_block(edit)
        elif isinstance(edit, ReorderSlides):
            ops = self._ops_reorder(edit)
        elif isinstance(edit, PlaceBlock):
            ops = self._ops_place_block(edit)
        else:
            raise TargetNotFound(f"unknown edit {edit!r}")
        return self._commit(ops, user=user)

    def _ops_set_layout(self, edit: SetLayout) -> list[dict]:
        slide = self.slide(edit.slide_id)
        new_columns = _columns_for(edit.layout, len(slide.regions))
        try:
            _validate_columns(edit.layout, new_columns)
        except InvalidRegionPlan as exc:
            raise LayoutConstraintViolated(str(exc)) from exc
        if edit.layout is Layout.SIDE_BY_SIDE and len(slide.regions) < 2:
            raise LayoutConstraintViolated("side_by_side needs at least 2 regions")
        if edit.layout is Layout.PIE_CHART and not any(r.binding_id for r in slide.regions):
            raise LayoutConstraintViolated("pie_chart needs at least one bound region")
        return [
            {
                "op": "set_layout",
                "slide_id": slide.slide_id,
                "old_layout": slide.layout.value,
                "new_layout": edit.layout.value,
                "old_columns": [r.column for r in slide.regions],
                "new_columns": new_columns,
            }
        ]

    def _ops_edit_text(self, edit: EditText) -> list[dict]:
        slide, region = self.find_region(edit.region_id)
        if region.block is None:
            raise TargetNotFound(f"region {edit.region_id!r} holds no block")
        new_block = replace(region.block, text=edit.text, provenance=Provenance.MANUAL_EDIT)
        return [
            {
                "op": "set_block",
                "slide_id": slide.slide_id,
                "region_id": region.region_id,
                "old_block": region.block.as_dict(),
                "new_block": new_block.as_dict(),
            }
        ]

    def _ops_delete_block(self, edit: DeleteBlock) -> list[dict]:
        slide, region = self.find_region(edit.region_id)
        if region.block is None:
            raise TargetNotFound(f"region {edit.region_id!r} holds no block")
        return [
            {
                "op": "set_block",
                "slide_id": slide.slide_id,
                "region_id": region.region_id,
                "old_block": region.block.as_dict(),
                "new_block": None,
            }
        ]

    def _ops_reorder(self, edit: ReorderSlides) -> list[dict]:
        current = [s.slide_id for s in self.slides]
        if sorted(edit.order) != sorted(current):
            raise TargetNotFound("reorder must be a permutation of current slide ids")
        return [{"op": "reorder", "old_order": current, "new_order": list(edit.order)}]

    def _ops_place_block(self, edit: PlaceBlock) -> list[dict]:
        slide = self.slide(edit.slide_id)
        ops: list[dict] = []
        region_id = edit.region_id
        if region_id is None:
            region = SlideRegion(region_id=self._ids("g"), column=edit.column)
            ops.append({"op": "add_region", "slide_id": slide.slide_id, "region": region.as_dict()})
        else:
            region = slide.region(region_id)
            if region is None:
                raise TargetNotFound(f"no region {region_id!r} on slide {slide.slide_id!r}")
        ops.append(
            {
                "op": "set_block",
                "slide_id": slide.slide_id,
                "region_id": region.region_id,
                "old_block": region.block.as_dict() if region.block else None,
                "new_block": edit.block.as_dict(),
            }
        )
        return ops

    # --- op application ------------------------------------------------------

    def _commit(self, ops: list[dict], user: bool) -> DeckDelta:
        delta = DeckDelta(ops=tuple(ops), user=user)
        self.apply_delta(delta)
        if user:
            self.undo_stack.append(delta)
            self.redo_stack.clear()
        return delta

    def apply_delta(self, delta: DeckDelta) -> None:
        """Apply ops without touching history (replay and undo both use this)."""
        for op in delta.ops:
            self._apply_op(op)
        self._renumber()

    def push_user(self, deltas: list[DeckDelta]) -> DeckDelta:
        """Record already-applied deltas as a single undoable user mutation.

        Commands touch the deck several times (create slide, place blocks)
        but should undo as one step.
        """
        merged = DeckDelta(ops=tuple(op for d in deltas for op in d.ops), user=True)
        self.undo_stack.append(merged)
        self.redo_stack.clear()
        return merged

    def _apply_op(self, op: dict) -> None:
        kind = op["op"]
        if kind == "create_slide":
            data = op["slide"]
            self.slides.append(
                Slide(
                    slide_id=data["slide_id"],
                    discussion_point=data["discussion_point"],
                    layout=Layout(data["layout"]),
                    regions=[
                        SlideRegion(
                            region_id=r["region_id"],
                            column=r["column"],
                            block=block_from_dict(r["block"]) if r.get("block") else None,
                            binding_id=r.get("binding_id"),
                        )
                        for r in data["regions"]
                    ],
                )
            )
        elif kind == "remove_slide":
            self.slides = [s for s in self.slides if s.slide_id != op["slide"]["slide_id"]]
        elif kind == "set_layout":
            slide = self.slide(op["slide_id"])
            slide.layout = Layout(op["new_layout"])
            for region, column in zip(slide.regions, op["new_columns"]):
                region.column = column
        elif kind == "set_block":
            _, region = self.find_region(op["region_id"])
            region.block = block_from_dict(op["new_block"]) if op["new_block"] else None
        elif kind == "reorder":
            by_id = {s.slide_id: s for s in self.slides}
            self.slides = [by_id[sid] for sid in op["new_order"]]
        elif kind == "add_region":
            slide = self.slide(op["slide_id"])
            r = op["region"]
            slide.regions.append(
                SlideRegion(
                    region_id=r["region_id"],
                    column=r["column"],
                    block=block_from_dict(r["block"]) if r.get("block") else None,
                    binding_id=r.get("binding_id"),
                )
            )
        elif kind == "remove_region":
            slide = self.slide(op["slide_id"])
            slide.regions = [r for r in slide.regions if r.region_id != op["region"]["region_id"]]
        else:
            raise TargetNotFound(f"unknown op {kind!r}")

    def _renumber(self) -> None:
        for i, slide in enumerate(self.slides):
            slide.position_in_deck = i

    # --- history ------------------------------------------------------------

    def history_step(self, direction: str) -> Optional[DeckDelta]:
        """Undo or redo the top user mutation; None when the stack is empty."""
        if direction == "undo":
            if not self.undo_stack:
                return None
            delta = self.undo_stack.pop()
            inverse = delta.inverted()
            self.apply_delta(inverse)
            self.redo_stack.append(delta)
            return inverse
        if direction == "redo":
            if not self.redo_stack:
                return None
            delta = self.redo_stack.pop()
            self.apply_delta(delta)
            self.undo_stack.append(delta)
            return delta
        raise TargetNotFound(f"unknown history direction {direction!r}")

    # --- placement helper used by the generation pipeline ---------------------

    def position_block(self, slide_id: str, block: SemanticBlock, user: bool = True) -> tuple[str, DeckDelta]:
        """First empty region per the slide's layout role; SlideFull otherwise.

        Bullets fill top to bottom; side_by_side fills the emptier column;
        pie_chart attaches the block as a caption region (appending one when
        none is free).
        """
        slide = self.slide(slide_id)
        empties = [r for r in slide.regions if r.block is None]
        if slide.layout is Layout.SIDE_BY_SIDE:
            counts = {
                col: sum(1 for r in slide.regions if r.column == col and r.block is not None)
                for col in (0, 1)
            }
            target_col = 0 if counts[0] <= counts[1] else 1
            ordered = [r for r in empties if r.column == target_col] or [
                r for r in empties if r.column == 1 - target_col
            ]
            if not ordered:
                raise SlideFull(f"slide {slide_id!r} has no empty region")
            region = ordered[0]
        elif slide.layout is Layout.PIE_CHART:
            if empties:
                region = empties[0]
            else:
                delta = self.apply_edit(PlaceBlock(slide_id=slide_id, block=block), user=user)
                return delta.ops[-1]["region_id"], delta
        else:
            if not empties:
                raise SlideFull(f"slide {slide_id!r} has no empty region")
            region = empties[0]
        delta = self.apply_edit(PlaceBlock(slide_id=slide_id, block=block, region_id=region.region_id), user=user)
        return region.region_id, delta

    # --- export ---------------------------------------------------------------

    def export(self, resolve_record=None, chart_table=None) -> dict:
        """Deterministic export: structured text plus a provenance sidecar.

        resolve_record(record_id) -> (topic_label, frequency) or None.
        chart_table(slide) -> list of (label, frequency) for pie slides.
        """
        if not self.slides:
            raise EmptyDeck("nothing to export")
        lines: list[str] = []
        provenance: list[dict] = []
        for slide in self.slides:
            lines.append(f"## Slide {slide.position_in_deck + 1} [{slide.discussion_point}] ({slide.layout.value})")
            if slide.layout is Layout.SIDE_BY_SIDE:
                for col in (0, 1):
                    lines.append(f"### Column {col + 1}")
                    lines.extend(self._region_lines(slide, resolve_record, column=col))
            else:
                lines.extend(self._region_lines(slide, resolve_record))
            if slide.layout is Layout.PIE_CHART and chart_table is not None:
                lines.append("Live frequencies:")
                for label, freq in chart_table(slide):
                    lines.append(f"  {label}: {freq}")
            lines.append("")
            provenance.append(slide.as_dict())
        return {"text": "\n".join(lines), "provenance": provenance}

    def _region_lines(self, slide: Slide, resolve_record, column: int | None = None) -> list[str]:
        out = []
        for region in slide.regions:
            if column is not None and region.column != column:
                continue
            if region.block is None:
                out.append("- (empty)")
                continue
            cite = ""
            if resolve_record is not None:
                labels = []
                for rid in region.block.source_record_ids:
                    resolved = resolve_record(rid)
                    labels.append(f"{rid}={resolved[0]}" if resolved else rid)
                cite = f"  (sources: {', '.join(labels)})"
            out.append(f"- {region.block.text}{cite}")
        return out

    def as_dict(self) -> dict:
        return {"slides": [s.as_dict() for s in self.slides]}
