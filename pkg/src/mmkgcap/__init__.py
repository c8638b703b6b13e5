"""Multi-modal knowledge-graph construction and entity-aware captioning toolkit."""

__version__ = "0.1.0"

from . import core, errors, gat, graph, kb, matcher, metrics, trainer  # noqa: F401
