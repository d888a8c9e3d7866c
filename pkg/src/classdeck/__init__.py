"""classdeck: live discussion analytics feeding a semantically bound slide deck.

The engine ingests a stream of small-group utterances, maintains ranked
topic charts per discussion point, and keeps a slide deck in sync with the
data through semantic bindings, pre-generated block swaps, and goal-ranked
change suggestions. Everything is deterministic when run with the bundled
stub providers, so full sessions can be replayed and verified offline.
"""

__version__ = "0.1.0"

from classdeck.config import SessionConfig, Thresholds
from classdeck.engine import Engine

__all__ = ["Engine", "SessionConfig", "Thresholds", "__version__"]
