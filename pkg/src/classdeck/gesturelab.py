"""Synthetic stroke corpus for calibrating the gesture classifier.

Generates jittered instances of the five sketch classes against a fixed
reference scene (a chart with three bars and a slide holding one text
block). The accuracy gate in the test suite runs over this corpus, and
``classdeck oracle gestures`` reports the same numbers from the CLI.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from classdeck.command import BBox, CanvasScene, GestureKind, SceneElement, Stroke

CLASSES = (
    GestureKind.CIRCLE_SELECT,
    GestureKind.VERTICAL_LINE,
    GestureKind.BULLET_MARKS,
    GestureKind.PIE_CIRCLE,
    GestureKind.STRIKETHROUGH,
)


def reference_scene() -> CanvasScene:
    """Chart with three bars on the left, one slide with a block on the right."""
    bars = [
        SceneElement("chart_element", f"r{i + 1}", BBox(40, 60 + i * 70, 30 + i * 40, 40),
                     chart_point="Q1", chart_dimension="KeyDiscussionThemes")
        for i in range(3)
    ]
    slide = SceneElement("slide", "s1", BBox(400, 50, 400, 300))
    block = SceneElement("block", "g1", BBox(430, 90, 320, 48))
    return CanvasScene(elements=(*bars, slide, block))


@dataclass(frozen=True)
class CorpusCase:
    expected: GestureKind
    strokes: tuple[Stroke, ...]


def _jitter(rng: random.Random, magnitude: float) -> float:
    return rng.uniform(-magnitude, magnitude)


def _circle_stroke(rng: random.Random, cx: float, cy: float, radius: float) -> Stroke:
    points = []
    n = rng.randint(28, 40)
    start = rng.uniform(0, 2 * math.pi)
    for i in range(n):
        angle = start + 2 * math.pi * i / n
        r = radius * (1 + _jitter(rng, 0.08))
        points.append((cx + r * math.cos(angle), cy + r * math.sin(angle), i * 12))
    points.append((points[0][0] + _jitter(rng, 2), points[0][1] + _jitter(rng, 2), n * 12))
    return Stroke(points=tuple(points))


def make_case(kind: GestureKind, rng: random.Random, scene: CanvasScene) -> CorpusCase:
    slide = scene.slides()[0].bbox
    block = scene.blocks()[0].bbox
    bar = scene.chart_elements()[rng.randrange(3)].bbox

    if kind is GestureKind.CIRCLE_SELECT:
        stroke = _circle_stroke(rng, bar.cx + _jitter(rng, 4), bar.cy + _jitter(rng, 4),
                                max(bar.w, bar.h) * 0.9)
        return CorpusCase(kind, (stroke,))

    if kind is GestureKind.PIE_CIRCLE:
        # Empty patch of slide background, below the block.
        cx = slide.cx + _jitter(rng, 20)
        cy = block.y + block.h + 70 + _jitter(rng, 10)
        stroke = _circle_stroke(rng, cx, cy, 45 + _jitter(rng, 5))
        return CorpusCase(kind, (stroke,))

    if kind is GestureKind.VERTICAL_LINE:
        x = slide.cx + _jitter(rng, 30)
        top = slide.y + 20 + _jitter(rng, 8)
        length = slide.h * rng.uniform(0.6, 0.85)
        drift = _jitter(rng, length * 0.08)  # stays under the tilt ceiling
        points = tuple(
            (x + drift * i / 19 + _jitter(rng, 1.2), top + length * i / 19, i * 10)
            for i in range(20)
        )
        return CorpusCase(kind, (Stroke(points=points),))

    if kind is GestureKind.BULLET_MARKS:
        x = slide.x + 24 + _jitter(rng, 6)
        marks = []
        for row in range(rng.randint(2, 4)):
            y = slide.y + 60 + row * 50 + _jitter(rng, 5)
            size = rng.uniform(6, min(14, slide.w * 0.03))
            marks.append(
                Stroke(points=(
                    (x + _jitter(rng, 3), y, row * 200),
                    (x + size, y + size * 0.6, row * 200 + 40),
                    (x + size * 0.4, y + size, row * 200 + 80),
                ))
            )
        return CorpusCase(kind, tuple(marks))

    if kind is GestureKind.STRIKETHROUGH:
        y = block.cy + _jitter(rng, block.h * 0.2)
        start = block.x - rng.uniform(0, 10)
        end = block.x + block.w * rng.uniform(0.75, 1.05)
        points = tuple(
            (start + (end - start) * i / 11, y + _jitter(rng, 2.0), i * 8) for i in range(12)
        )
        return CorpusCase(kind, (Stroke(points=points),))

    raise ValueError(f"no generator for {kind}")


def make_corpus(per_class: int = 25, seed: int = 7) -> list[CorpusCase]:
    rng = random.Random(seed)
    scene = reference_scene()
    cases = []
    for kind in CLASSES:
        for _ in range(per_class):
            cases.append(make_case(kind, rng, scene))
    return cases


def corpus_accuracy(per_class: int = 25, seed: int = 7) -> tuple[float, list[tuple[GestureKind, GestureKind]]]:
    """(accuracy, confusions) of the classifier over the synthetic corpus."""
    from classdeck.command import recognize_gesture

    scene = reference_scene()
    cases = make_corpus(per_class, seed)
    confusions = []
    hits = 0
    for case in cases:
        got = recognize_gesture(list(case.strokes), scene).kind
        if got is case.expected:
            hits += 1
        else:
            confusions.append((case.expected, got))
    return hits / len(cases), confusions
