"""Keyword sets for tagging CS and Ethics concepts in utterances.

File format is one entry per line, ``canonical: variant, variant, ...``.
A bare line is a canonical with itself as the only variant. Matching is
case-insensitive and whole-word (multiword variants match as phrases);
matches always report the canonical form.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from classdeck.errors import MissingKeywordConfig
from classdeck.textutil import tokenize


@dataclass(frozen=True)
class KeywordSet:
    name: str
    # variant token tuple -> canonical keyword
    variants: dict[tuple[str, ...], str]

    def match(self, text: str) -> set[str]:
        """Canonical keywords whose variants occur in the text."""
        hay = tokenize(text)
        found: set[str] = set()
        for needle, canonical in self.variants.items():
            n = len(needle)
            if any(tuple(hay[i : i + n]) == needle for i in range(len(hay) - n + 1)):
                found.add(canonical)
        return found

    @property
    def canonicals(self) -> set[str]:
        return set(self.variants.values())


def parse_keyword_lines(name: str, lines: list[str]) -> KeywordSet:
    variants: dict[tuple[str, ...], str] = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" in line:
            canonical, rest = line.split(":", 1)
            forms = [canonical] + rest.split(",")
        else:
            canonical, forms = line, [line]
        canonical = canonical.strip().lower()
        for form in forms:
            toks = tuple(tokenize(form))
            if toks:
                variants[toks] = canonical
    if not variants:
        raise MissingKeywordConfig(f"keyword set {name!r} is empty")
    return KeywordSet(name=name, variants=variants)


def load_keyword_file(name: str, path: str | Path) -> KeywordSet:
    path = Path(path)
    if not path.exists():
        raise MissingKeywordConfig(f"keyword file not found: {path}")
    return parse_keyword_lines(name, path.read_text(encoding="utf-8").splitlines())


def load_default(name: str) -> KeywordSet:
    """Load one of the shipped sets: cs, ethics, or frameworks."""
    source = resources.files("classdeck.data.keywords").joinpath(f"{name}.txt")
    try:
        text = source.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise MissingKeywordConfig(f"no built-in keyword set {name!r}") from exc
    return parse_keyword_lines(name, text.splitlines())
