"""Text primitives shared by the pipeline and its brute-force oracles.

Everything here is a pure function of its inputs. The default embedder is a
hashed bag of content words, L2-normalized over a fixed number of bins, so
two processes (or two runs years apart) produce bit-identical vectors.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

EMBEDDING_DIM = 256

_TOKEN_RE = re.compile(r"[a-z0-9']+")

# Small closed-class list; enough to keep topic labels and embeddings focused
# on content words without dragging in a full NLP dependency.
STOPWORDS = frozenset(
    """
    a an the this that these those there here
    i you we they he she it me us them my your our their its
    is are was were be been being am
    do does did done have has had having
    will would can could shall should may might must
    and or but nor so yet if then else when while because as than
    of in on at by for with about into onto from to up down out off over under
    not no don't doesn't isn't aren't won't can't
    what which who whom whose how why where
    very just also too really quite some any all each both few more most other
    ok okay yeah yes hmm uh um oh well like think thing things say said
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens, apostrophes kept ("don't" stays one token)."""
    return _TOKEN_RE.findall(text.lower())


def content_words(text: str) -> list[str]:
    words = [t for t in tokenize(text) if t not in STOPWORDS]
    return words if words else tokenize(text)


def token_count(text: str) -> int:
    return len(tokenize(text))


def hash_bin(token: str, dim: int) -> int:
    # blake2b rather than hash(): the latter is salted per process.
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def embed(text: str, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Unit-norm hashed bag-of-content-words vector.

    Deterministic across processes; returns the zero vector only for text
    with no tokens at all (callers gate on token count first).
    """
    vec = np.zeros(dim, dtype=np.float64)
    for token in content_words(text):
        vec[hash_bin(token, dim)] += 1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


# Similarities are quantized before any threshold or argmax decision so that
# independent implementations (dense numpy here, sparse dicts in the oracle)
# cannot disagree by a final ulp.
COSINE_DECIMALS = 12


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; inputs are unit vectors so this is a dot product."""
    return round(float(np.dot(a, b)), COSINE_DECIMALS)


def topic_label(text: str) -> str:
    """Label stub for a fresh topic: its top-2 content-word bigram.

    "Top" means highest in-utterance count, ties broken by first appearance;
    the label preserves appearance order so it reads like a phrase.
    """
    words = content_words(text)
    counts: dict[str, int] = {}
    first_pos: dict[str, int] = {}
    for i, w in enumerate(words):
        counts[w] = counts.get(w, 0) + 1
        first_pos.setdefault(w, i)
    top = sorted(counts, key=lambda w: (-counts[w], first_pos[w]))[:2]
    top.sort(key=lambda w: first_pos[w])
    return " ".join(top)


def contains_phrase(text: str, phrase: str) -> bool:
    """Case-insensitive whole-word match of a (possibly multiword) phrase."""
    needle = tokenize(phrase)
    if not needle:
        return False
    hay = tokenize(text)
    n = len(needle)
    return any(hay[i : i + n] == needle for i in range(len(hay) - n + 1))
