"""Exact token probabilities and perplexity lower bounds from a known PCFG."""

from ._kernels import BACKEND
from .grammar_core import Grammar, load_grammar, parse_grammar_text

__version__ = "0.1.0"
__all__ = ["BACKEND", "Grammar", "load_grammar", "parse_grammar_text"]
