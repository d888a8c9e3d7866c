"""Multimodal input translation: sketch gestures, voice templates, fusion.

Gestures are classified geometrically against the client-reported canvas
scene; recognition never consults a text provider, so layout refinements
execute directly. Voice arrives as text and is parsed against a fixed
template grammar with slot extraction. Fusion binds deictic slots ("this",
"these") to sketched targets in selection order and yields an executable
plan; ambiguity is an error, never a guess.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from classdeck import textutil
from classdeck.deck import ContentType, Layout
from classdeck.errors import (
    AmbiguousTarget,
    NoMaterialConfigured,
    NoRelevantPassage,
    UnknownCommand,
    UnresolvedDeixis,
)
from classdeck.ingest import Dimension


# --- scene geometry -------------------------------------------------------------


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    @property
    def cx(self) -> float:
        return self.x + self.w / 2

    @property
    def cy(self) -> float:
        return self.y + self.h / 2

    def contains_point(self, px: float, py: float) -> bool:
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    def contains_box(self, other: "BBox") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.x + other.w <= self.x + self.w
            and other.y + other.h <= self.y + self.h
        )


@dataclass(frozen=True)
class SceneElement:
    kind: str  # "chart_element" | "slide" | "block"
    ref: str   # record_id, slide_id, or region_id
    bbox: BBox
    chart_point: str = ""      # chart elements: discussion point
    chart_dimension: str = ""  # chart elements: dimension value


@dataclass(frozen=True)
class CanvasScene:
    elements: tuple[SceneElement, ...] = ()

    def chart_elements(self) -> list[SceneElement]:
        return [e for e in self.elements if e.kind == "chart_element"]

    def slides(self) -> list[SceneElement]:
        return [e for e in self.elements if e.kind == "slide"]

    def blocks(self) -> list[SceneElement]:
        return [e for e in self.elements if e.kind == "block"]


@dataclass(frozen=True)
class Stroke:
    points: tuple[tuple[float, float, int], ...]  # (x, y, t_ms)

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValueError("stroke needs at least one point")

    @property
    def xs(self):
        return [p[0] for p in self.points]

    @property
    def ys(self):
        return [p[1] for p in self.points]

    def bbox(self) -> BBox:
        return BBox(
            min(self.xs), min(self.ys), max(self.xs) - min(self.xs), max(self.ys) - min(self.ys)
        )

    def path_length(self) -> float:
        pts = self.points
        return sum(
            math.hypot(pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1])
            for i in range(len(pts) - 1)
        )

    def loop_area(self) -> float:
        """Shoelace area of the closed polygon through the points."""
        pts = [(x, y) for x, y, _ in self.points]
        area = 0.0
        for i in range(len(pts)):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % len(pts)]
            area += x1 * y2 - x2 * y1
        return abs(area) / 2.0

    def encloses(self, px: float, py: float) -> bool:
        """Ray-cast point-in-polygon over the stroke treated as closed."""
        pts = [(x, y) for x, y, _ in self.points]
        inside = False
        j = len(pts) - 1
        for i in range(len(pts)):
            xi, yi = pts[i]
            xj, yj = pts[j]
            if (yi > py) != (yj > py) and px < (xj - xi) * (py - yi) / (yj - yi) + xi:
                inside = not inside
            j = i
        return inside


class GestureKind(str, enum.Enum):
    CIRCLE_SELECT = "circle_select"
    BRUSH_SELECT = "brush_select"
    VERTICAL_LINE = "vertical_line"
    BULLET_MARKS = "bullet_marks"
    PIE_CIRCLE = "pie_circle"
    STRIKETHROUGH = "strikethrough"
    NONE = "none"


LAYOUT_GESTURES = {
    GestureKind.VERTICAL_LINE: Layout.SIDE_BY_SIDE,
    GestureKind.BULLET_MARKS: Layout.BULLETS,
    GestureKind.PIE_CIRCLE: Layout.PIE_CHART,
}


@dataclass(frozen=True)
class Gesture:
    kind: GestureKind
    targets: tuple[SceneElement, ...] = ()

    @property
    def target_refs(self) -> tuple[str, ...]:
        return tuple(t.ref for t in self.targets)


# Geometry thresholds (all rule-of-thumb, calibrated on the synthetic corpus).
CIRCLE_GAP_FRACTION = 0.15
VLINE_ASPECT = 4.0
VLINE_MAX_TILT_DEG = 15.0
BULLET_MAX_WIDTH_FRACTION = 0.05
BULLET_ALIGN_BAND_FRACTION = 0.10
STRIKE_MIN_CROSS_FRACTION = 0.60


def _is_closed_loop(stroke: Stroke) -> bool:
    length = stroke.path_length()
    if length <= 0:
        return False
    x0, y0, _ = stroke.points[0]
    x1, y1, _ = stroke.points[-1]
    gap = math.hypot(x1 - x0, y1 - y0)
    return gap < CIRCLE_GAP_FRACTION * length and stroke.loop_area() > 0


def _slide_containing(bbox: BBox, scene: CanvasScene) -> Optional[SceneElement]:
    for slide in scene.slides():
        if slide.bbox.contains_box(bbox) or slide.bbox.contains_point(bbox.cx, bbox.cy):
            return slide
    return None


def recognize_gesture(strokes: list[Stroke], scene: CanvasScene) -> Gesture:
    """Classify a stroke group against the scene; unrecognized input is NONE."""
    strokes = [s for s in strokes if s.points]
    if not strokes:
        return Gesture(GestureKind.NONE)

    if len(strokes) >= 2:
        bullets = _match_bullet_marks(strokes, scene)
        if bullets is not None:
            return bullets
        # Multi-stroke but not bullets: classify by the longest stroke.
        strokes = [max(strokes, key=lambda s: s.path_length())]

    stroke = strokes[0]
    if len(stroke.points) < 2:
        return Gesture(GestureKind.NONE)

    if _is_closed_loop(stroke):
        enclosed = [
            e for e in scene.chart_elements() if stroke.encloses(e.bbox.cx, e.bbox.cy)
        ]
        if enclosed:
            enclosed.sort(key=lambda e: (e.bbox.x, e.bbox.y))
            return Gesture(GestureKind.CIRCLE_SELECT, tuple(enclosed))
        wrapped_slides = [s for s in scene.slides() if stroke.encloses(s.bbox.cx, s.bbox.cy)
                          and stroke.bbox().contains_box(s.bbox)]
        if wrapped_slides:
            return Gesture(GestureKind.CIRCLE_SELECT, (wrapped_slides[0],))
        host = _slide_containing(stroke.bbox(), scene)
        if host is not None:
            enclosed_blocks = [b for b in scene.blocks() if stroke.encloses(b.bbox.cx, b.bbox.cy)]
            if not enclosed_blocks:
                return Gesture(GestureKind.PIE_CIRCLE, (host,))
            return Gesture(GestureKind.CIRCLE_SELECT, tuple(enclosed_blocks))
        return Gesture(GestureKind.NONE)

    vline = _match_vertical_line(stroke, scene)
    if vline is not None:
        return vline

    strike = _match_strikethrough(stroke, scene)
    if strike is not None:
        return strike

    brush = _match_brush(stroke, scene)
    if brush is not None:
        return brush

    return Gesture(GestureKind.NONE)


def _match_vertical_line(stroke: Stroke, scene: CanvasScene) -> Optional[Gesture]:
    bbox = stroke.bbox()
    if bbox.h <= 0:
        return None
    width = max(bbox.w, 1e-9)
    if bbox.h / width < VLINE_ASPECT:
        return None
    tilt = math.degrees(math.atan2(width, bbox.h))
    if tilt > VLINE_MAX_TILT_DEG:
        return None
    host = _slide_containing(bbox, scene)
    if host is None:
        return None
    return Gesture(GestureKind.VERTICAL_LINE, (host,))


def _match_bullet_marks(strokes: list[Stroke], scene: CanvasScene) -> Optional[Gesture]:
    group_box = BBox(
        min(s.bbox().x for s in strokes),
        min(s.bbox().y for s in strokes),
        max(s.bbox().x + s.bbox().w for s in strokes) - min(s.bbox().x for s in strokes),
        max(s.bbox().y + s.bbox().h for s in strokes) - min(s.bbox().y for s in strokes),
    )
    host = _slide_containing(group_box, scene)
    if host is None:
        return None
    slide_w = host.bbox.w
    if any(s.bbox().w >= BULLET_MAX_WIDTH_FRACTION * slide_w for s in strokes):
        return None
    lefts = [s.bbox().x for s in strokes]
    if max(lefts) - min(lefts) > BULLET_ALIGN_BAND_FRACTION * slide_w:
        return None
    return Gesture(GestureKind.BULLET_MARKS, (host,))


def _match_strikethrough(stroke: Stroke, scene: CanvasScene) -> Optional[Gesture]:
    bbox = stroke.bbox()
    if bbox.w <= 0:
        return None
    if bbox.h > bbox.w:  # must read as horizontal
        return None
    for block in scene.blocks():
        if not (block.bbox.y <= bbox.cy <= block.bbox.y + block.bbox.h):
            continue
        overlap = min(bbox.x + bbox.w, block.bbox.x + block.bbox.w) - max(bbox.x, block.bbox.x)
        if overlap >= STRIKE_MIN_CROSS_FRACTION * block.bbox.w:
            return Gesture(GestureKind.STRIKETHROUGH, (block,))
    return None


def _match_brush(stroke: Stroke, scene: CanvasScene) -> Optional[Gesture]:
    for element in scene.chart_elements():
        inside = sum(1 for x, y, _ in stroke.points if element.bbox.contains_point(x, y))
        if inside >= 0.7 * len(stroke.points):
            return Gesture(GestureKind.BRUSH_SELECT, (element,))
    return None


# --- voice grammar ---------------------------------------------------------------


class Intent(str, enum.Enum):
    GENERATE_RANK = "generate_rank"
    GENERATE_SELECT = "generate_select"
    COMPARE = "compare"
    FIND_MATERIAL = "find_material"
    REWRITE = "rewrite"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class RankRef:
    origin: str  # "top" | "bottom"
    count: int = 1


@dataclass(frozen=True)
class VoiceCommand:
    intent: Intent
    text: str
    dimension: Optional[Dimension] = None
    rank_refs: tuple[RankRef, ...] = ()
    content_type: Optional[ContentType] = None
    deictic_slots: int = 0


_NUMBER_WORDS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}

_DIMENSION_PHRASES: tuple[tuple[str, Dimension], ...] = (
    ("key discussion themes", Dimension.KEY_DISCUSSION_THEMES),
    ("key discussion theme", Dimension.KEY_DISCUSSION_THEMES),
    ("discussion themes", Dimension.KEY_DISCUSSION_THEMES),
    ("discussion theme", Dimension.KEY_DISCUSSION_THEMES),
    ("themes", Dimension.KEY_DISCUSSION_THEMES),
    ("technology keywords", Dimension.TECH_TOPICS),
    ("technology keyword", Dimension.TECH_TOPICS),
    ("tech topics", Dimension.TECH_TOPICS),
    ("tech topic", Dimension.TECH_TOPICS),
    ("tech keywords", Dimension.TECH_TOPICS),
    ("ethical concepts", Dimension.ETHICAL_CONCEPTS),
    ("ethical concept", Dimension.ETHICAL_CONCEPTS),
    ("ethics keywords", Dimension.ETHICAL_CONCEPTS),
    ("ethical frameworks", Dimension.ETHICAL_FRAMEWORKS_USED),
    ("ethical framework", Dimension.ETHICAL_FRAMEWORKS_USED),
)

_TOP_WORDS = r"(?:top|most(?:\s+\w+)?|highest|popular)"
_BOTTOM_WORDS = r"(?:least(?:\s+\w+)?|lowest|bottom)"

_DEICTIC_RE = re.compile(r"\b(this|here|these|those)\b(?:\s+(\d+|one|two|three|four|five))?")


def count_deictic_slots(text: str) -> int:
    """How many sketched referents the utterance expects.

    "this"/"here" claim one target each; "these"/"those" claim the number
    that follows them, or two when unnumbered ("these keywords").
    """
    slots = 0
    for word, number in _DEICTIC_RE.findall(text):
        if word in ("this", "here"):
            slots += 1
        elif number:
            slots += int(number) if number.isdigit() else _NUMBER_WORDS.get(number, 2)
        else:
            slots += 2
    return slots


def _find_dimension(text: str) -> Optional[Dimension]:
    for phrase, dim in _DIMENSION_PHRASES:
        if textutil.contains_phrase(text, phrase):
            return dim
    return None


def _count_near(text: str) -> int:
    m = re.search(r"\b(\d+)\b", text)
    if m:
        return int(m.group(1))
    for word, n in _NUMBER_WORDS.items():
        if re.search(rf"\b{word}\b", text):
            return n
    return 1


def parse_voice(text: str) -> VoiceCommand:
    """Template parse of an instructor utterance; unmatched input is UNKNOWN."""
    raw = text.strip()
    low = " ".join(textutil.tokenize(raw))
    deictic = count_deictic_slots(low)
    dimension = _find_dimension(low)

    if re.search(r"\bfind\b.*\b(case study|case studies|material|article|reading)\b", low):
        return VoiceCommand(Intent.FIND_MATERIAL, raw, deictic_slots=max(deictic, 0))

    if re.search(r"\b(add|give|write)\b.*\bcommentary\b", low) or re.search(
        r"\bmake\b.*\b(question|commentary)\b", low
    ) or re.search(r"\brewrite\b", low):
        if re.search(r"\bquestion\b", low):
            ctype = ContentType.CLASS_QUESTION
        else:
            ctype = ContentType.COMMENTARY
        return VoiceCommand(Intent.REWRITE, raw, content_type=ctype, deictic_slots=deictic)

    if re.search(r"\bcompare\b", low):
        refs: list[RankRef] = []
        if re.search(r"\b(highest|most)\b.*\b(lowest|least)\b", low):
            refs = [RankRef("top", 1), RankRef("bottom", 1)]
        return VoiceCommand(
            Intent.COMPARE,
            raw,
            dimension=dimension,
            rank_refs=tuple(refs),
            deictic_slots=deictic,
        )

    if re.search(r"\b(talk about|tell .*about|discuss)\b", low) and deictic:
        return VoiceCommand(Intent.GENERATE_SELECT, raw, deictic_slots=deictic)

    if re.search(r"\b(generate|create|make|add)\b.*\bslide\b", low) or re.search(
        r"\bgenerate\b", low
    ):
        top_m = re.search(rf"\b{_TOP_WORDS}\b", low)
        bottom_m = re.search(rf"\b{_BOTTOM_WORDS}\b", low)
        if dimension is not None and (top_m or bottom_m):
            origin = "bottom" if bottom_m else "top"
            count = _count_near(low)
            return VoiceCommand(
                Intent.GENERATE_RANK,
                raw,
                dimension=dimension,
                rank_refs=(RankRef(origin, count),),
                deictic_slots=deictic,
            )

    return VoiceCommand(Intent.UNKNOWN, raw, dimension=dimension, deictic_slots=deictic)


# --- fusion ------------------------------------------------------------------------


@dataclass(frozen=True)
class CommandPlan:
    """What the engine should do; produced purely from gesture+voice."""

    action: str
    dimension: Optional[Dimension] = None
    rank_refs: tuple[RankRef, ...] = ()
    record_ids: tuple[str, ...] = ()
    slide_id: str = ""
    region_id: str = ""
    layout: Optional[Layout] = None
    content_type: Optional[ContentType] = None
    comparison: bool = False
    chart_point: str = ""
    chart_dimension: str = ""
    query: str = ""


def fuse(gesture: Optional[Gesture], voice: Optional[VoiceCommand]) -> Optional[CommandPlan]:
    """Resolve one multimodal action; order of arrival does not matter.

    Returns None when the input is vacuous (bare selection with no verb).
    """
    gesture = gesture if gesture and gesture.kind is not GestureKind.NONE else None

    if voice is None:
        if gesture is None:
            return None
        layout = LAYOUT_GESTURES.get(gesture.kind)
        if layout is not None:
            slide = _require_slide_target(gesture)
            return CommandPlan(action="set_layout", slide_id=slide.ref, layout=layout)
        return None  # selection is pending deixis; nothing to do alone

    if voice.intent is Intent.UNKNOWN:
        if gesture is not None and LAYOUT_GESTURES.get(gesture.kind):
            slide = _require_slide_target(gesture)
            return CommandPlan(
                action="set_layout", slide_id=slide.ref, layout=LAYOUT_GESTURES[gesture.kind]
            )
        raise UnknownCommand(f"no template matches {voice.text!r}")

    if voice.intent is Intent.GENERATE_RANK:
        ref = voice.rank_refs[0]
        return CommandPlan(
            action="create_rank_slide",
            dimension=voice.dimension,
            rank_refs=(ref,),
            content_type=voice.content_type or ContentType.COMMENTARY,
        )

    if voice.intent is Intent.GENERATE_SELECT:
        targets = _chart_targets(gesture)
        if len(targets) < max(1, voice.deictic_slots):
            raise UnresolvedDeixis(f"{voice.text!r} needs a sketched target")
        if voice.deictic_slots <= 1 and len(targets) > 1:
            raise AmbiguousTarget("one referent expected, several selected")
        chosen = targets[: max(1, voice.deictic_slots)]
        return CommandPlan(
            action="create_select_slide",
            record_ids=tuple(t.ref for t in chosen),
            content_type=ContentType.COMMENTARY,
            chart_point=chosen[0].chart_point,
            chart_dimension=chosen[0].chart_dimension,
        )

    if voice.intent is Intent.COMPARE:
        if voice.rank_refs:
            return CommandPlan(
                action="create_rank_slide",
                dimension=voice.dimension,
                rank_refs=voice.rank_refs,
                content_type=ContentType.COMPARISON,
                comparison=True,
            )
        targets = _chart_targets(gesture)
        needed = voice.deictic_slots or 2
        if len(targets) < needed:
            raise UnresolvedDeixis(f"{voice.text!r} needs {needed} sketched targets")
        if len(targets) > needed:
            raise AmbiguousTarget(f"{needed} referents expected, {len(targets)} selected")
        return CommandPlan(
            action="create_select_slide",
            record_ids=tuple(t.ref for t in targets),
            content_type=ContentType.COMPARISON,
            comparison=True,
            chart_point=targets[0].chart_point,
            chart_dimension=targets[0].chart_dimension,
        )

    if voice.intent is Intent.REWRITE:
        if gesture is None or not gesture.targets:
            raise UnresolvedDeixis(f"{voice.text!r} needs a sketched content target")
        target = gesture.targets[0]
        if target.kind != "block":
            raise AmbiguousTarget("rewrite needs a content block target")
        return CommandPlan(
            action="rewrite_block",
            region_id=target.ref,
            content_type=voice.content_type or ContentType.COMMENTARY,
        )

    if voice.intent is Intent.FIND_MATERIAL:
        slide = _slide_target(gesture)
        if slide is None:
            raise UnresolvedDeixis("material retrieval needs a circled slide")
        return CommandPlan(action="find_material", slide_id=slide.ref, query=voice.text)

    raise UnknownCommand(f"unhandled intent {voice.intent}")


def _chart_targets(gesture: Optional[Gesture]) -> list[SceneElement]:
    if gesture is None:
        return []
    return [t for t in gesture.targets if t.kind == "chart_element"]


def _slide_target(gesture: Optional[Gesture]) -> Optional[SceneElement]:
    if gesture is None:
        return None
    for t in gesture.targets:
        if t.kind == "slide":
            return t
    return None


def _require_slide_target(gesture: Gesture) -> SceneElement:
    slide = _slide_target(gesture)
    if slide is None:
        raise UnresolvedDeixis("layout gesture must land on a slide")
    return slide


# --- course material retrieval -------------------------------------------------------


@dataclass(frozen=True)
class Passage:
    document: str
    text: str


def load_corpus(corpus_dir: str | Path) -> list[Passage]:
    path = Path(corpus_dir) if corpus_dir else None
    if path is None or not path.is_dir():
        raise NoMaterialConfigured(f"material directory not configured or missing: {corpus_dir!r}")
    passages = []
    for doc in sorted(path.glob("*.txt")):
        for chunk in doc.read_text(encoding="utf-8").split("\n\n"):
            chunk = chunk.strip()
            if chunk:
                passages.append(Passage(document=doc.name, text=chunk))
    if not passages:
        raise NoMaterialConfigured(f"no .txt material under {corpus_dir!r}")
    return passages


def retrieve_passage(
    slide_text: str,
    query: str,
    passages: list[Passage],
    similarity_floor: float = 0.3,
    embedding_dim: int = 256,
) -> tuple[Passage, float]:
    """Top passage by cosine against the slide content plus the spoken query."""
    probe = textutil.embed(f"{slide_text} {query}", embedding_dim)
    best: Optional[Passage] = None
    best_score = -1.0
    for passage in passages:
        score = textutil.cosine(probe, textutil.embed(passage.text, embedding_dim))
        if score > best_score:
            best, best_score = passage, score
    if best is None or best_score < similarity_floor:
        raise NoRelevantPassage(f"best similarity {best_score:.2f} below floor {similarity_floor}")
    return best, best_score
