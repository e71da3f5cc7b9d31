"""Prefix probabilities and causal token probabilities.

This is the probabilistic Earley recursion with the left-corner and unit
closures precomputed, specialised to binarized grammars.  After the unit
closure is folded into the inside chart, the only incomplete items that carry
information are binary items ``k: A -> B . C`` in state set ``j``:

    forward = f_k[A] * P(A -> B C) * inside_top[B](k, j)
    inner   =          P(A -> B C) * inside_top[B](k, j)

Prediction from those items through the left-corner closure gives the
predicted-nonterminal forward vector ``f_j``, and scanning ``w_{j+1}`` from
it gives the prefix probability ``P(w_1 .. w_{j+1}) = sum_X f_j[X] P(X -> w_{j+1})``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DeadPrefix
from .inside_outside import inside


@dataclass
class PrefixChart:
    """Collapsed Earley chart.  ``forward[j]`` is the log prediction mass per
    nonterminal at state set ``j``; ``prefix_logp[j]`` is log P(w_1..w_j)."""

    token_ids: list
    forward: np.ndarray
    prefix_logp: np.ndarray
    inside: np.ndarray

    @property
    def n(self):
        return len(self.token_ids)

    @property
    def dead_at(self):
        """1-based position of the first zero-mass prefix, or None."""
        dead = np.flatnonzero(self.prefix_logp == -np.inf)
        return int(dead[0]) if len(dead) else None

    def items(self, grammar, j):
        """Dotted binary items ``(k, (A, B, C), forward, inner)`` of state set
        ``j`` with nonzero mass, all in log space."""
        out = []
        with np.errstate(divide="ignore"):
            logp = np.log(grammar.bin_prob)
        for k in range(j):
            inner = logp + self.inside[k, j, grammar.bin_left]
            fwd = inner + self.forward[k, grammar.bin_lhs]
            for r in np.flatnonzero(np.isfinite(fwd)):
                rule = (int(grammar.bin_lhs[r]), int(grammar.bin_left[r]),
                        int(grammar.bin_right[r]))
                out.append((k, rule, float(fwd[r]), float(inner[r])))
        return out


@dataclass(frozen=True)
class CausalScore:
    position: int
    token: str
    logp: float
    prefix_logp: float


def prefix_chart(grammar, tokens, prune=None, chart=None):
    if chart is None:
        chart = inside(grammar, tokens, prune)
    lex = grammar.lexical_logp_table(chart.token_ids)
    forward, prefix = _kernels.prefix_forward(
        chart.inside, lex, grammar.bin_lhs, grammar.bin_left, grammar.bin_right,
        grammar.bin_prob, grammar.left_corner_t_csr, grammar.start)
    return PrefixChart(chart.token_ids, forward, prefix, chart.inside)


def prefix_logprob(grammar, prefix, prune=None):
    """log of the total probability of sentences starting with ``prefix``
    (``-inf`` for a dead prefix; 0 for the empty prefix)."""
    if not prefix:
        return 0.0
    return float(prefix_chart(grammar, prefix, prune).prefix_logp[-1])


def causal_scores(grammar, tokens, prune=None, chart=None):
    pc = prefix_chart(grammar, tokens, prune, chart)
    if pc.dead_at is not None:
        raise DeadPrefix(pc.dead_at)
    lp = pc.prefix_logp
    return [CausalScore(i, tok, float(lp[i] - lp[i - 1]), float(lp[i]))
            for i, tok in enumerate(tokens, 1)]


def causal_ppl(scores):
    """Perplexity from causal scores: a flat list for one sentence, or a list
    of per-sentence lists for a corpus (aggregated over all tokens)."""
    flat = []
    for s in scores:
        if isinstance(s, (list, tuple)):
            flat.extend(s)
        else:
            flat.append(s)
    if not flat:
        raise ValueError("no scored tokens")
    total = sum(s.logp if isinstance(s, CausalScore) else float(s) for s in flat)
    return math.exp(-total / len(flat))


def completion_logprob(grammar, tokens, prune=None):
    """log P(sentence) - log P(prefix = sentence): the end-of-sentence mass
    left out of the per-token conditionals.  Always <= 0."""
    chart = inside(grammar, tokens, prune)
    pc = prefix_chart(grammar, tokens, prune, chart)
    if pc.dead_at is not None:
        raise DeadPrefix(pc.dead_at)
    if chart.no_parse:
        return -math.inf
    return min(0.0, chart.sentence_logp - float(pc.prefix_logp[-1]))
