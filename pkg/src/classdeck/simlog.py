"""Synthetic session transcripts shaped like real classroom discussions.

Each scenario mirrors one of the bundled session configurations: group
count, a 10-minute span, and three discussion points whose activity rises
and falls in sequence. Topic popularity drifts over time so chart ranks
genuinely churn, which is what exercises rebinds and the pregen cache.
Output is deterministic for a given seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class TopicCluster:
    base: str                 # repeated verbatim so duplicates merge
    extras: tuple[str, ...]   # short suffixes that keep cosine above the merge bar
    early_weight: float
    late_weight: float

    def weight(self, frac: float) -> float:
        return self.early_weight + (self.late_weight - self.early_weight) * frac


@dataclass(frozen=True)
class Scenario:
    name: str
    n_groups: int
    duration_min: int
    points: tuple[str, ...]
    pools: dict[str, tuple[TopicCluster, ...]]
    utterance_target: int
    quiet_windows: tuple[tuple[int, int], ...] = ()
    seed: int = 11
    short_utterance_rate: float = 0.08

    @property
    def duration_ms(self) -> int:
        return self.duration_min * 60_000


CUES = (
    "",
    "",
    "I agree with that,",
    "But what about",
    "For example, one study found",
    "Building on that point,",
    "Exactly, and",
)

SHORT_UTTERANCES = ("ok", "yeah", "right", "hmm true", "good point")


def _phase_window(index: int, n_points: int, duration_ms: int) -> tuple[int, int]:
    """Overlapping activity phases: Q1 first, later points shifted right."""
    span = duration_ms / (n_points + 0.4)
    start = int(index * span * 0.9)
    end = int(min(duration_ms - 5_000, start + span * 1.6))
    return start, end


def _pick_cluster(rng: random.Random, pool, frac: float) -> TopicCluster:
    weights = [max(0.01, c.weight(frac)) for c in pool]
    return rng.choices(pool, weights=weights, k=1)[0]


def _in_quiet(t: int, windows) -> bool:
    return any(start <= t < end for start, end in windows)


def synthesize(scenario: Scenario) -> list[dict]:
    rng = random.Random(scenario.seed)
    groups = [f"g{i + 1}" for i in range(scenario.n_groups)]
    per_point = scenario.utterance_target // len(scenario.points)
    rows: list[dict] = []

    for index, point in enumerate(scenario.points):
        start, end = _phase_window(index, len(scenario.points), scenario.duration_ms)
        pool = scenario.pools[point]
        for _ in range(per_point):
            t = rng.randint(start, end)
            attempts = 0
            while _in_quiet(t, scenario.quiet_windows) and attempts < 20:
                t = rng.randint(start, end)
                attempts += 1
            if _in_quiet(t, scenario.quiet_windows):
                continue
            group = rng.choice(groups)
            if rng.random() < scenario.short_utterance_rate:
                text = rng.choice(SHORT_UTTERANCES)
            else:
                frac = (t - start) / max(1, end - start)
                cluster = _pick_cluster(rng, pool, frac)
                cue = rng.choice(CUES)
                extra = rng.choice(cluster.extras) if cluster.extras and rng.random() < 0.5 else ""
                text = " ".join(part for part in (cue, cluster.base, extra) if part)
            rows.append({"t_ms": t, "group": group, "q": point, "text": text})

    rows.sort(key=lambda r: (r["t_ms"], r["group"], r["text"]))
    return rows


def write_jsonl(rows: list[dict], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# --- bundled scenarios -------------------------------------------------------------


def _pool(*clusters: tuple[str, tuple[str, ...], float, float]) -> tuple[TopicCluster, ...]:
    return tuple(TopicCluster(base, extras, early, late) for base, extras, early, late in clusters)


GENAI_POOLS = {
    "Q1": _pool(
        ("generative ai models copy copyrighted art without permission from artists",
         ("online", "today"), 5.0, 2.0),
        ("training data includes copyrighted books scraped from the whole internet",
         ("constantly", "at scale"), 2.0, 6.0),
        ("artists lose income when models imitate their personal style",
         ("every year", "quickly"), 2.5, 3.0),
        ("nobody gave consent for their work to train these systems",
         ("clearly",), 1.5, 2.5),
    ),
    "Q2": _pool(
        ("web scraping collects massive datasets of copyrighted images for training",
         ("cheaply", "silently"), 4.0, 2.5),
        ("the model memorizes training examples and reproduces them almost exactly",
         ("verbatim",), 2.0, 5.0),
        ("attribution disappears because outputs blend thousands of original works",
         ("entirely",), 2.0, 3.0),
    ),
    "Q3": _pool(
        ("licensing deals could pay artists whose work trains generative models",
         ("fairly", "directly"), 3.5, 3.0),
        ("watermarking generated outputs would help trace copyright violations",
         ("reliably",), 2.0, 4.5),
        ("stronger fair use rules must balance innovation with intellectual property",
         ("carefully",), 2.5, 3.0),
    ),
}

SURVEILLANCE_POOLS = {
    "Q1": _pool(
        ("governments justify mass surveillance as protection against crime and terrorism",
         ("everywhere", "officially"), 5.0, 2.0),
        ("citizens trade privacy for security without real informed consent",
         ("daily",), 2.0, 6.0),
        ("unchecked state power grows when oversight of surveillance is weak",
         ("steadily",), 2.0, 3.5),
        ("freedom of speech suffers when people know they are watched",
         ("online",), 1.5, 3.0),
    ),
    "Q2": _pool(
        ("facial recognition cameras track individuals across entire cities in real time",
         ("already", "everywhere"), 4.5, 2.0),
        ("phone inspections and dna collection expand surveillance into private life",
         ("deeply",), 2.0, 5.0),
        ("predictive policing algorithms target minority neighborhoods unfairly",
         ("repeatedly",), 2.0, 4.0),
    ),
    "Q3": _pool(
        ("surveillance deters crime in public spaces according to officials",
         ("sometimes",), 4.0, 2.5),
        ("chilling effects on dissent outweigh the security benefits claimed",
         ("clearly",), 2.0, 5.0),
        ("data collection without limits enables future abuse by any government",
         ("eventually",), 2.5, 3.5),
    ),
}

WEAPONS_POOLS = {
    "Q1": _pool(
        ("precision laser weapons could reduce civilian casualties in warfare",
         ("significantly",), 4.5, 2.0),
        ("lowering the cost of violence makes starting wars easier for states",
         ("dangerously",), 2.0, 5.5),
        ("laser weapons escalate an arms race between rival militaries",
         ("quickly",), 2.0, 3.5),
    ),
    "Q2": _pool(
        ("robots cannot weigh moral responsibility when deciding to kill humans",
         ("ever",), 4.5, 2.5),
        ("autonomous weapons misidentify targets because sensor data is noisy",
         ("routinely",), 2.0, 5.0),
        ("human judgment must stay in the loop for deadly force decisions",
         ("always",), 2.5, 4.0),
    ),
    "Q3": _pool(
        ("global treaties should ban fully autonomous weapons before deployment spreads",
         ("soon",), 4.0, 3.0),
        ("verification of robotic weapons treaties is nearly impossible in practice",
         ("sadly",), 2.0, 4.5),
        ("accountability for machine decisions in war remains completely unresolved",
         ("legally",), 2.0, 3.5),
    ),
}

SCENARIOS = {
    "session1": Scenario(
        name="session1",
        n_groups=23,
        duration_min=10,
        points=("Q1", "Q2", "Q3"),
        pools=GENAI_POOLS,
        utterance_target=480,
        seed=101,
    ),
    "session2": Scenario(
        name="session2",
        n_groups=9,
        duration_min=10,
        points=("Q1", "Q2", "Q3"),
        pools=SURVEILLANCE_POOLS,
        utterance_target=330,
        quiet_windows=tuple((60_000 * k - 4_500, 60_000 * k) for k in range(1, 11)),
        seed=102,
    ),
    "session3": Scenario(
        name="session3",
        n_groups=9,
        duration_min=10,
        points=("Q1", "Q2", "Q3"),
        pools=WEAPONS_POOLS,
        utterance_target=320,
        seed=103,
    ),
}


def probe_points(scenario: Scenario) -> list[int]:
    """Session-clock instants at the end of each quiet window (quiescent)."""
    return [end - 100 for _, end in scenario.quiet_windows]
