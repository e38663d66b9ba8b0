"""reviewkg: mine app reviews for ethical concerns, the issues behind them,
and the requirements users suggest, and link everything into a typed
knowledge graph that can be queried and exported.

The pipeline stages mirror the CLI subcommands: ingest a review corpus,
annotate entity spans (by hand or with the trained sequence labeler),
build the graph, then query or export it.
"""

__version__ = "0.1.0"

from reviewkg.errors import ReviewKgError

__all__ = ["ReviewKgError", "__version__"]
