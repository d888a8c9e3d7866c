#!/usr/bin/env python3
"""Regenerate the bundled session transcripts and configs under sessions/.

The transcripts are committed so replays are reproducible without running
this script; rerun it only when the scenarios in classdeck.simlog change.
"""

import json
from pathlib import Path

from classdeck import simlog

TITLES = {
    "session1": "Generative AI and Copyright",
    "session2": "Technology and Surveillance",
    "session3": "Laser Weapons and AI-Controlled Robotic Weapons",
}

PROMPTS = {
    "session1": {
        "Q1": "What are the primary causes of copyright infringement concerns with generative AI?",
        "Q2": "How do the technology's mechanisms and the use of copyrighted material contribute?",
        "Q3": "What strategies or legal frameworks could help address copyright challenges?",
    },
    "session2": {
        "Q1": "How do governments balance security and freedom?",
        "Q2": "What level of surveillance do you think is appropriate?",
        "Q3": "What are the benefits and drawbacks of such an intrusive program?",
    },
    "session3": {
        "Q1": "Do laser weapons make war more ethical or more dangerous?",
        "Q2": "Should robots be trusted to decide when to use deadly force in war?",
        "Q3": "Should there be global rules or treaties for robotic and laser weapons?",
    },
}


def main() -> None:
    root = Path(__file__).resolve().parent.parent / "sessions"
    root.mkdir(exist_ok=True)
    for name, scenario in simlog.SCENARIOS.items():
        rows = simlog.synthesize(scenario)
        simlog.write_jsonl(rows, root / f"{name}.jsonl")
        config = {
            "session_id": name,
            "title": TITLES[name],
            "duration_min": scenario.duration_min,
            "roster": [f"g{i + 1}" for i in range(scenario.n_groups)],
            "discussion_points": [
                {"id": p, "prompt": PROMPTS[name][p]} for p in scenario.points
            ],
            "transcript": f"{name}.jsonl",
            "material_dir": "../materials",
        }
        (root / f"{name}.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
        print(f"wrote sessions/{name}.json ({len(rows)} utterances)")


if __name__ == "__main__":
    main()
