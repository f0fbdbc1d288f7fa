"""Data-collection harness for the head-pruning optimizer.

Applies pruning masks to a causal language model, measures grouped
toxicity bias on generated continuations and perplexity on a text corpus,
and emits sample/effect files in the formats the optimizer consumes.
"""

__version__ = "0.1.0"
