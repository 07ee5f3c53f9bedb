"""playtrace: 2D playground traces, a tensed synthetic grammar, an exact
truth oracle, and a deterministic dataset factory."""

from . import bot, dataset, grammar, oracle, world

__all__ = ["bot", "dataset", "grammar", "oracle", "world"]
__version__ = "0.1.0"
